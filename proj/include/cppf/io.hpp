#pragma once

#include "cppf/geometry.hpp"

#include <string>
#include <vector>

namespace cppf {

/// Cloud as stored on disk; canonical coordinates and noise flags are optional
/// vertex properties (cx cy cz, noise) written by dataset generation.
struct StoredCloud {
  PointCloud cloud;
  std::vector<Vec3> canonical;
  std::vector<bool> noise;
};

/// ASCII PLY with x y z [nx ny nz] [cx cy cz noise].
void write_ply(const std::string& path, const StoredCloud& data);
/// Reads ASCII PLY. Unknown vertex properties are ignored. Throws std::runtime_error.
StoredCloud read_ply(const std::string& path);

/// Pose sidecar: line 1 R row-major (9 values), line 2 t, line 3 s.
void write_pose(const std::string& path, const Pose9D& pose);
Pose9D read_pose(const std::string& path);

/// Formats a double with round-trip precision.
std::string fmt_real(double v);

}  // namespace cppf
