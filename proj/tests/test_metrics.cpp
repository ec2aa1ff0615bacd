#include <doctest.h>

#include "cppf/mesh.hpp"
#include "cppf/metrics.hpp"
#include "test_util.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

using namespace cppf;
using cppf::testing::random_rot;
using cppf::testing::random_vec;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

double aabb_iou(const Vec3& ca, const Vec3& ha, const Vec3& cb, const Vec3& hb) {
  const Vec3 lo = (ca - ha).cwiseMax(cb - hb);
  const Vec3 hi = (ca + ha).cwiseMin(cb + hb);
  const Vec3 ext = (hi - lo).cwiseMax(0.0);
  const double inter = ext.prod();
  return inter / ((2 * ha).prod() + (2 * hb).prod() - inter);
}

}  // namespace

TEST_CASE("identical poses have zero error") {
  std::mt19937_64 rng(1);
  const Pose9D p(random_rot(rng), random_vec(rng), Vec3(0.1, 0.1, 0.1));
  const auto e = pose_error(p, p);
  CHECK(e.rot_deg < 1e-6);
  CHECK(e.trans_cm == 0.0);
}

TEST_CASE("rotation about the symmetry axis is free") {
  std::mt19937_64 rng(2);
  const Pose9D gt(random_rot(rng), Vec3::Zero(), Vec3::Ones());
  for (double deg : {30.0, 90.0, 179.0}) {
    const Pose9D pred(gt.rotation * so3_exp(Vec3(0, deg * kDeg, 0)), Vec3::Zero(), Vec3::Ones());
    CHECK(pose_error(pred, gt, Vec3::UnitY()).rot_deg < 1e-6);
    CHECK(pose_error(pred, gt).rot_deg == doctest::Approx(deg).epsilon(1e-9));
  }
}

TEST_CASE("symmetric error matches a dense scan over the axis") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const Pose9D a(random_rot(rng), Vec3::Zero(), Vec3::Ones());
    const Pose9D b(random_rot(rng), Vec3::Zero(), Vec3::Ones());
    double best = 1e300;
    for (int k = 0; k < 36000; ++k) {
      const Rotation spun = a.rotation * so3_exp(Vec3(0, 2.0 * std::numbers::pi * k / 36000, 0));
      best = std::min(best, rotation_angle(spun, b.rotation));
    }
    CHECK(std::abs(pose_error(a, b, Vec3::UnitY()).rot_deg - best / kDeg) < 0.01);
    CHECK(pose_error(a, b).rot_deg == doctest::Approx(pose_error(b, a).rot_deg).epsilon(1e-9));
  }
}

TEST_CASE("box IoU basics") {
  const Pose9D unit(Rotation(), Vec3::Zero(), Vec3::Constant(0.5));
  CHECK(box_iou({unit}, {unit}) == doctest::Approx(1.0).epsilon(0.01));
  const Pose9D far(Rotation(), Vec3(2, 0, 0), Vec3::Constant(0.5));
  CHECK(box_iou({unit}, {far}) == 0.0);
  const Pose9D half(Rotation(), Vec3(0.5, 0, 0), Vec3::Constant(0.5));
  CHECK(std::abs(box_iou({unit}, {half}) - 1.0 / 3.0) < 0.02);
  const Pose9D turned(so3_exp(Vec3(0.3, 0.2, 0.1)), Vec3(0.1, 0, 0), Vec3(0.4, 0.5, 0.6));
  CHECK(box_iou({unit}, {turned}) == box_iou({turned}, {unit}));
}

TEST_CASE("box IoU matches axis-aligned overlap") {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 50; ++i) {
    const Vec3 ca = 0.1 * random_vec(rng), cb = 0.1 * random_vec(rng);
    const Vec3 ha = random_vec(rng, 0.05, 0.2), hb = random_vec(rng, 0.05, 0.2);
    const double iou = box_iou({Pose9D(Rotation(), ca, ha)}, {Pose9D(Rotation(), cb, hb)});
    CHECK(std::abs(iou - aabb_iou(ca, ha, cb, hb)) < 0.02);
    CHECK(iou >= 0.0);
    CHECK(iou <= 1.0);
  }
}

TEST_CASE("ADD and ADD-S") {
  std::mt19937_64 rng(5);
  std::vector<Vec3> pts;
  for (int i = 0; i < 200; ++i) pts.push_back(random_vec(rng));
  const Pose9D gt(random_rot(rng), Vec3(0, 0, 0.5), Vec3(0.05, 0.05, 0.05));
  CHECK(add_metric(gt, gt, pts, false) == 0.0);
  const Vec3 delta(0.01, -0.02, 0.005);
  const Pose9D shifted(gt.rotation, gt.translation + delta, gt.scale);
  CHECK(add_metric(shifted, gt, pts, false) == doctest::Approx(delta.norm()).epsilon(1e-12));
  CHECK(add_metric(shifted, gt, pts, true) <= delta.norm() + 1e-12);
  CHECK_THROWS(add_metric(gt, gt, {}, false));
}

TEST_CASE("ADD-S is near zero for a rotated sphere") {
  const Mesh sphere = resolve_mesh("builtin:sphere");
  const auto pts = sphere.sample_surface(1000, 3);
  std::mt19937_64 rng(6);
  const Pose9D gt(Rotation(), Vec3(0, 0, 0.5), sphere.half_extents);
  const Pose9D pred(random_rot(rng), gt.translation, gt.scale);
  // Mean nearest-neighbour spacing of 1000 points on a 6 cm sphere is under 4 mm.
  CHECK(add_metric(pred, gt, pts, true) < 0.004);
  CHECK(add_metric(pred, gt, pts, false) > 0.02);
}

TEST_CASE("AUC of the step accuracy curve") {
  CHECK(auc({0.0, 0.0, 0.0}) == 1.0);
  CHECK(auc({0.2, 0.11}) == 0.0);
  CHECK(std::abs(auc({0.05}) - 0.5) < 1e-9);
  // Hand integration: accuracy is 0.5 on [0.02, 0.06) and 1 after.
  CHECK(std::abs(auc({0.02, 0.06}) - (0.5 * 0.04 + 1.0 * 0.04) / 0.1) < 1e-12);
  CHECK_THROWS(auc({}));
}

TEST_CASE("perfect predictions give a perfect report") {
  std::mt19937_64 rng(7);
  const Mesh mesh = resolve_mesh("builtin:lshape");
  const auto pts = mesh.sample_surface(300, 1);
  std::vector<SampleScore> scores;
  for (int i = 0; i < 10; ++i) {
    const Pose9D gt(random_rot(rng), Vec3(0, 0, 0.5) + 0.02 * random_vec(rng), mesh.half_extents);
    scores.push_back(score_sample(std::to_string(i), gt, gt, pts, std::nullopt));
  }
  const auto r = aggregate(scores);
  for (const auto& e : r.pose_ap) CHECK(e.value == 1.0);
  CHECK(r.iou25 == 1.0);
  CHECK(r.iou50 == 1.0);
  CHECK(r.add_auc == 1.0);
  CHECK(r.adds_auc == 1.0);
  for (const auto& s : scores) CHECK(std::abs(s.iou - 1.0) <= 0.01);
}

TEST_CASE("report does not depend on sample order and counts misses") {
  std::mt19937_64 rng(8);
  const Mesh mesh = resolve_mesh("builtin:cube");
  const auto pts = mesh.sample_surface(200, 2);
  std::vector<SampleScore> scores;
  for (int i = 0; i < 12; ++i) {
    const Pose9D gt(random_rot(rng), Vec3(0, 0, 0.5), mesh.half_extents);
    const Pose9D pred(so3_exp(random_vec(rng) * 0.1) * gt.rotation, gt.translation + 0.02 * random_vec(rng), gt.scale);
    scores.push_back(score_sample(std::to_string(i), pred, gt, pts, std::nullopt, 20000));
  }
  scores.push_back(score_sample("missing", std::nullopt, Pose9D(), pts, std::nullopt));
  CHECK(scores.back().missing);
  const auto a = aggregate(scores);
  auto shuffled = scores;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  CHECK(report_csv(aggregate(shuffled)) == report_csv(a));
  CHECK(a.missing == 1);
  for (const auto& e : a.pose_ap) CHECK(e.value <= 12.0 / 13.0);

  // Monotone in both thresholds.
  for (const auto& e : a.pose_ap)
    for (const auto& f : a.pose_ap)
      if (f.rot_deg >= e.rot_deg && f.trans_cm >= e.trans_cm) CHECK(f.value >= e.value);
}
