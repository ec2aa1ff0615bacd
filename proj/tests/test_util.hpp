#pragma once

#include "cppf/geometry.hpp"

#include <Eigen/Geometry>

#include <random>

namespace cppf::testing {

inline Vec3 random_vec(std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  return {u(rng), u(rng), u(rng)};
}

/// Uniform rotation built from a normalized Gaussian quaternion.
inline Rotation random_rot(std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  q.normalize();
  return Rotation::nearest(q.toRotationMatrix());
}

inline Pose9D random_rigid(std::mt19937_64& rng) { return Pose9D(random_rot(rng), random_vec(rng), Vec3::Ones()); }

}  // namespace cppf::testing
