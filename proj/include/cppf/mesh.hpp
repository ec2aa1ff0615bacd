#pragma once

#include "cppf/geometry.hpp"

#include <array>
#include <string>
#include <vector>

namespace cppf {

/// Triangle mesh normalized to the canonical cube.
///
/// Vertices are centered on the tight axis-aligned box of the source mesh and
/// divided per axis by its half-extents, so every axis spans exactly [-1, 1].
/// `half_extents` keeps the source size in meters; a pose whose scale equals
/// it reproduces the source geometry.
struct Mesh {
  std::string name;
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> triangles;
  Vec3 half_extents = Vec3::Ones();
  /// Continuous symmetry axis in the canonical frame, if any.
  std::optional<Vec3> symmetry_axis;

  /// Area-uniform surface samples in canonical coordinates.
  std::vector<Vec3> sample_surface(int count, unsigned long long seed) const;
};

/// Normalizes raw vertices (meters) into a canonical Mesh.
Mesh canonicalize(std::string name, const std::vector<Vec3>& raw_vertices,
                  std::vector<std::array<int, 3>> triangles);

Mesh make_box(const Vec3& half_extents, std::string name = "cube");
/// Cylinder with its axis along canonical +y.
Mesh make_cylinder(double radius, double half_height, int segments = 48, std::string name = "cylinder");
/// Extruded L profile; no rotational or mirror symmetry.
Mesh make_lshape(std::string name = "lshape");
Mesh make_sphere(double radius, int rings = 24, int segments = 48, std::string name = "sphere");

/// Loads an ASCII OBJ or PLY triangle mesh. Throws std::runtime_error naming the path.
Mesh load_mesh(const std::string& path);

/// Resolves "builtin:<cube|cylinder|lshape|sphere>" or a file path.
Mesh resolve_mesh(const std::string& spec);

/// Category symmetry table: bottle, can, bowl, cylinder and sphere are y-symmetric.
std::optional<Vec3> category_symmetry(const std::string& category);

}  // namespace cppf
