#include "cppf/vote_targets.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace cppf {

double wrap_angle(double radians) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double r = std::fmod(radians, two_pi);
  if (r < 0.0) r += two_pi;
  if (r >= two_pi) r = 0.0;
  return r;
}

Vec3 pair_direction(const Vec3& p1, const Vec3& p2) {
  const Vec3 diff = p2 - p1;
  const double len = diff.norm();
  if (!(len > kDegeneratePairDistance)) throw GeometryError("degenerate pair");
  return diff / len;
}

PairFrame PairFrame::of(const Vec3& p1, const Vec3& p2) {
  PairFrame f;
  f.d = pair_direction(p1, p2);
  f.perp = orthogonal_unit(f.d);
  f.binormal = f.d.cross(f.perp);
  return f;
}

Vec3 PairFrame::ring(double angle) const { return std::cos(angle) * perp + std::sin(angle) * binormal; }

CenterTargets center_targets(const Vec3& center, const Vec3& p1, const Vec3& p2) {
  const Vec3 d = pair_direction(p1, p2);
  CenterTargets t;
  t.mu = (center - p1).dot(d);
  t.nu = (center - (p1 + t.mu * d)).norm();
  return t;
}

Vec3 center_candidate(const CenterTargets& targets, double sigma, const Vec3& p1, const Vec3& p2) {
  const PairFrame f = PairFrame::of(p1, p2);
  return p1 + targets.mu * f.d + targets.nu * f.ring(sigma);
}

OrientationTargets orientation_targets(const UnitVec3& e1, const UnitVec3& e2, const Vec3& p1, const Vec3& p2) {
  if (std::abs(e1.dot(e2)) > 1e-6) throw GeometryError("orientation_targets: axes are not orthogonal");
  const Vec3 d = pair_direction(p1, p2);
  return {e1.dot(d), e2.dot(d)};
}

UnitVec3 orientation_candidate(double alpha, double theta, const Vec3& p1, const Vec3& p2) {
  if (!(std::abs(alpha) <= 1.0)) throw GeometryError("orientation_candidate: |alpha| > 1");
  const PairFrame f = PairFrame::of(p1, p2);
  const double radial = std::sqrt(std::max(0.0, 1.0 - alpha * alpha));
  return UnitVec3(alpha * f.d + radial * f.ring(theta));
}

}  // namespace cppf
