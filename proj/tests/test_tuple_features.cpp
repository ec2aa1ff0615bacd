#include <doctest.h>

#include "cppf/mesh.hpp"
#include "cppf/scene.hpp"
#include "cppf/tuple_features.hpp"
#include "test_util.hpp"

#include <algorithm>
#include <cmath>

using namespace cppf;
using cppf::testing::random_rigid;
using cppf::testing::random_vec;

namespace {

PointCloud view_cloud(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const Mesh mesh = resolve_mesh("builtin:lshape");
  PointCloud cloud = sample_view(mesh, random_pose(mesh, rng)).cloud;
  compute_descriptors(cloud, DescriptorConfig{});
  return cloud;
}

PointCloud random_cloud(std::mt19937_64& rng, int n) {
  PointCloud c;
  for (int i = 0; i < n; ++i) {
    c.points.push_back(random_vec(rng));
    c.normals.push_back(random_vec(rng).normalized());
  }
  return c;
}

}  // namespace

TEST_CASE("feature dimension formula") {
  for (int n = 2; n <= 10; ++n) {
    std::mt19937_64 rng(n);
    PointCloud c = random_cloud(rng, 20);
    c.descriptors = Eigen::MatrixXd::Random(20, 7);
    std::vector<int> idx(n);
    for (int i = 0; i < n; ++i) idx[i] = i;
    CHECK(compute_feature(c, idx).size() == feature_dim(n, 7));
    CHECK(feature_dim(n, 7) == 3 * n * (n - 1) / 2 + n * (n - 1) / 2 + 7 * n);
  }
  CHECK(feature_dim(5, 24) == 160);
}

TEST_CASE("two-point cloud yields the unique pair") {
  PointCloud c;
  c.points = {Vec3(0, 0, 0), Vec3(1, 0, 0)};
  c.normals = {Vec3(0, 0, 1), Vec3(0, 0, 1)};
  const auto t = sample_tuples(c, 1, 2, 3);
  REQUIRE(t.size() == 1);
  std::vector<int> idx = t[0].indices;
  std::sort(idx.begin(), idx.end());
  CHECK(idx == std::vector<int>{0, 1});
  CHECK_THROWS(sample_tuples(c, 1, 3, 3));
  CHECK_THROWS(sample_tuples(c, 0, 2, 3));
}

TEST_CASE("hand-computed feature") {
  PointCloud c;
  c.points = {Vec3(0, 0, 0), Vec3(1, 0, 0)};
  c.normals = {Vec3(0, 0, 1), Vec3(0, 0, 1)};
  const Eigen::VectorXd f = compute_feature(c, {0, 1});
  REQUIRE(f.size() == 4);
  CHECK(f(0) == 1.0);
  CHECK(f(1) == 0.0);
  CHECK(f(2) == 0.0);
  CHECK(f(3) == 1.0);
  c.normals[1] = Vec3(0, 0, -1);
  CHECK(compute_feature(c, {0, 1})(3) == 1.0);
  PointCloud bare;
  bare.points = c.points;
  CHECK_THROWS(compute_feature(bare, {0, 1}));
}

TEST_CASE("tuples have distinct indices and non-degenerate voting pairs") {
  const PointCloud cloud = view_cloud(1);
  const auto tuples = sample_tuples(cloud, 2000, 5, 11);
  REQUIRE(tuples.size() == 2000);
  for (const auto& t : tuples) {
    auto idx = t.indices;
    std::sort(idx.begin(), idx.end());
    CHECK(std::adjacent_find(idx.begin(), idx.end()) == idx.end());
    CHECK((cloud.points[t.indices[0]] - cloud.points[t.indices[1]]).norm() > 1e-9);
  }
  const auto again = sample_tuples(cloud, 2000, 5, 11);
  for (std::size_t i = 0; i < tuples.size(); ++i) CHECK(again[i].indices == tuples[i].indices);
}

TEST_CASE("voting slot membership is near uniform") {
  std::mt19937_64 rng(5);
  const PointCloud cloud = random_cloud(rng, 1000);
  const auto tuples = sample_tuples(cloud, 10000, 5, 17);
  std::vector<int> count(1000, 0);
  for (const auto& t : tuples) {
    ++count[t.indices[0]];
    ++count[t.indices[1]];
  }
  const auto [lo, hi] = std::minmax_element(count.begin(), count.end());
  REQUIRE(*lo > 0);
  CHECK(static_cast<double>(*hi) / *lo < 1.5);
}

TEST_CASE("F2 stays in the unit interval") {
  std::mt19937_64 rng(6);
  const PointCloud c = random_cloud(rng, 50);
  auto tuples = sample_tuples(c, 200, 5, 1);
  compute_features(c, tuples);
  for (const auto& t : tuples) {
    for (int k = 0; k < 10; ++k) {
      const double f2 = t.feature(30 + k);
      CHECK(f2 >= 0.0);
      CHECK(f2 <= 1.0);
    }
  }
}

TEST_CASE("F1 and F2 are translation invariant") {
  std::mt19937_64 rng(7);
  const PointCloud c = random_cloud(rng, 50);
  auto tuples = sample_tuples(c, 50, 5, 1);
  for (int trial = 0; trial < 100; ++trial) {
    const Vec3 t = random_vec(rng, -5.0, 5.0);
    PointCloud moved = c;
    for (auto& p : moved.points) p += t;
    const auto& tup = tuples[trial % tuples.size()];
    CHECK((compute_feature(c, tup.indices) - compute_feature(moved, tup.indices)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("F2 and F3 are rigid invariant and F1 rotates") {
  const PointCloud cloud = view_cloud(2);
  const auto tuples = sample_tuples(cloud, 100, 5, 9);
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    const Pose9D g = random_rigid(rng);
    PointCloud moved = transform(cloud, g);
    compute_descriptors(moved, DescriptorConfig{});
    for (const auto& t : tuples) {
      const Eigen::VectorXd a = compute_feature(cloud, t.indices);
      const Eigen::VectorXd b = compute_feature(moved, t.indices);
      CHECK((a.tail(a.size() - 30) - b.tail(b.size() - 30)).cwiseAbs().maxCoeff() < 1e-9);
      for (int k = 0; k < 10; ++k) {
        const Vec3 fa = a.segment<3>(3 * k), fb = b.segment<3>(3 * k);
        CHECK((g.rotation * fa - fb).norm() < 1e-12);
      }
    }
  }
}

TEST_CASE("isolated point has a flagged zero descriptor") {
  PointCloud c;
  c.points = {Vec3(0, 0, 0.5), Vec3(1, 0, 0.5)};
  c.normals = {Vec3(0, 0, -1), Vec3(0, 0, -1)};
  const NeighborGrid grid(c.points, 0.02);
  const auto d = local_descriptor(c, grid, 0, DescriptorConfig{});
  CHECK(d.empty_neighborhood);
  CHECK(d.values.size() == 24);
  CHECK(d.values.isZero(0.0));
  CHECK(compute_descriptors(c, DescriptorConfig{}) == 2);
}

TEST_CASE("planar patch puts all normal mass in the top bin") {
  PointCloud c;
  for (int i = 0; i < 15; ++i)
    for (int j = 0; j < 15; ++j) {
      c.points.emplace_back(0.003 * i, 0.003 * j, 0.5);
      c.normals.emplace_back(0, 0, -1);
    }
  const NeighborGrid grid(c.points, 0.02);
  const auto d = local_descriptor(c, grid, 112, DescriptorConfig{});
  REQUIRE_FALSE(d.empty_neighborhood);
  CHECK(d.values(15) == doctest::Approx(1.0));
  // Offsets lie in the plane, so |n . offset| is zero.
  CHECK(d.values(16) == doctest::Approx(1.0));
  for (int block = 0; block < 3; ++block) CHECK(d.values.segment(8 * block, 8).sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("descriptor blocks are normalized or flagged") {
  const PointCloud cloud = view_cloud(3);
  const NeighborGrid grid(cloud.points, 0.02);
  for (int i = 0; i < static_cast<int>(cloud.size()); i += 37) {
    const auto d = local_descriptor(cloud, grid, i, DescriptorConfig{});
    for (int block = 0; block < 3; ++block) {
      const double s = d.values.segment(8 * block, 8).sum();
      CHECK((d.empty_neighborhood ? s == 0.0 : std::abs(s - 1.0) < 1e-9));
    }
  }
}

TEST_CASE("ground truth attaches to the voting pair") {
  std::mt19937_64 rng(4);
  const Mesh mesh = resolve_mesh("builtin:cube");
  const SceneSample s = sample_view(mesh, random_pose(mesh, rng));
  auto tuples = sample_tuples(s.cloud, 10, 5, 2);
  attach_ground_truth(tuples, s.canonical, s.gt_pose.scale);
  for (const auto& t : tuples) {
    REQUIRE(t.gt_canonical.has_value());
    CHECK((*t.gt_canonical)[0] == s.canonical[t.indices[0]]);
    CHECK((*t.gt_canonical)[1] == s.canonical[t.indices[1]]);
    CHECK(*t.gt_scale == s.gt_pose.scale);
  }
}
