#pragma once

#include "cppf/geometry.hpp"

namespace cppf {

/// Pairs closer than this are rejected as degenerate.
inline constexpr double kDegeneratePairDistance = 1e-9;

/// Signed offset of the center's foot along the pair direction (mu) and its
/// distance from the pair line (nu). Both in meters.
struct CenterTargets {
  double mu = 0.0;
  double nu = 0.0;
};

/// Cosines between the pair direction and the up (alpha) / right (beta) axes.
struct OrientationTargets {
  double alpha = 0.0;
  double beta = 0.0;
};

/// Radial angle wrapped to [0, 2pi).
double wrap_angle(double radians);

/// Unit direction from p1 to p2. Throws GeometryError("degenerate pair").
Vec3 pair_direction(const Vec3& p1, const Vec3& p2);

CenterTargets center_targets(const Vec3& center, const Vec3& p1, const Vec3& p2);

/// Point on the circle of radius nu around p1 + mu*d, in the plane normal to d.
Vec3 center_candidate(const CenterTargets& targets, double sigma, const Vec3& p1, const Vec3& p2);

OrientationTargets orientation_targets(const UnitVec3& e1, const UnitVec3& e2, const Vec3& p1, const Vec3& p2);

/// Unit vector u with u.d = alpha, swept around the axis d by theta.
UnitVec3 orientation_candidate(double alpha, double theta, const Vec3& p1, const Vec3& p2);

/// Orthonormal frame (d, d_perp, d x d_perp) for a pair; shared by the
/// candidate generators so that enumeration can skip re-deriving it.
struct PairFrame {
  Vec3 d;
  Vec3 perp;
  Vec3 binormal;
  static PairFrame of(const Vec3& p1, const Vec3& p2);
  Vec3 ring(double angle) const;
};

}  // namespace cppf
