#pragma once

#include "cppf/geometry.hpp"
#include "cppf/mesh.hpp"

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace cppf {

/// Pinhole camera at the origin looking down +z, image y pointing down.
struct CameraIntrinsics {
  double fx = 200.0;
  double fy = 200.0;
  double cx = 80.0;
  double cy = 80.0;
  int width = 160;
  int height = 160;
};

struct SceneSample {
  PointCloud cloud;
  Pose9D gt_pose;
  /// Per-point canonical coordinates; clutter points carry arbitrary values.
  std::vector<Vec3> canonical;
  /// True for injected clutter.
  std::vector<bool> noise_mask;
  std::string category;

  std::size_t size() const { return cloud.size(); }
};

struct NoiseConfig {
  double clutter_fraction = 0.0;
  double depth_jitter_sigma = 0.0;
  double mask_dilation = 4.0;
  void validate() const;
};

class EmptyViewError : public std::runtime_error {
 public:
  EmptyViewError() : std::runtime_error("empty view") {}
};

/// Rasterizes the posed mesh into a depth buffer and back-projects visible pixels.
SceneSample sample_view(const Mesh& mesh, const Pose9D& pose, const CameraIntrinsics& camera = {},
                        int normal_k = 16);

/// Appends clutter points and jitters depth. Identity when both are zero.
/// Otherwise normals are re-estimated and descriptors are dropped.
SceneSample corrupt(const SceneSample& sample, const NoiseConfig& cfg, std::uint64_t seed,
                    const CameraIntrinsics& camera = {}, int normal_k = 16);

/// Uniformly random rotation.
Rotation random_rotation(std::mt19937_64& rng);

/// Random in-frustum pose for a mesh: uniform rotation, 0.45-0.6 m depth,
/// scale = mesh half-extents times a uniform factor in [0.85, 1.15].
Pose9D random_pose(const Mesh& mesh, std::mt19937_64& rng);

/// Writes <dir>/<id>.ply and <dir>/<id>.pose.txt.
void write_sample(const std::string& dir, const std::string& id, const SceneSample& sample);
SceneSample read_sample(const std::string& dir, const std::string& id);

}  // namespace cppf
