#include "cppf/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

namespace cppf {

std::vector<Vec3> Mesh::sample_surface(int count, unsigned long long seed) const {
  std::vector<double> cumulative;
  cumulative.reserve(triangles.size());
  double total = 0.0;
  for (const auto& t : triangles) {
    const Vec3 a = vertices[t[0]].cwiseProduct(half_extents);
    const Vec3 b = vertices[t[1]].cwiseProduct(half_extents);
    const Vec3 c = vertices[t[2]].cwiseProduct(half_extents);
    total += 0.5 * (b - a).cross(c - a).norm();
    cumulative.push_back(total);
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Vec3> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    const double pick = unit(rng) * total;
    const auto it = std::lower_bound(cumulative.begin(), cumulative.end(), pick);
    const auto& t = triangles[std::min<std::size_t>(it - cumulative.begin(), triangles.size() - 1)];
    double u = unit(rng), v = unit(rng);
    if (u + v > 1.0) {
      u = 1.0 - u;
      v = 1.0 - v;
    }
    out.push_back(vertices[t[0]] + u * (vertices[t[1]] - vertices[t[0]]) + v * (vertices[t[2]] - vertices[t[0]]));
  }
  return out;
}

Mesh canonicalize(std::string name, const std::vector<Vec3>& raw_vertices,
                  std::vector<std::array<int, 3>> triangles) {
  if (raw_vertices.empty() || triangles.empty()) throw std::runtime_error("mesh '" + name + "' has no triangles");
  Vec3 lo = raw_vertices[0], hi = raw_vertices[0];
  for (const auto& v : raw_vertices) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  const Vec3 center = 0.5 * (lo + hi);
  const Vec3 half = 0.5 * (hi - lo);
  if ((half.array() <= 0.0).any()) throw std::runtime_error("mesh '" + name + "' is flat along an axis");
  for (const auto& t : triangles) {
    for (int i : t) {
      if (i < 0 || i >= static_cast<int>(raw_vertices.size())) {
        throw std::runtime_error("mesh '" + name + "' has an out-of-range vertex index");
      }
    }
  }
  Mesh m;
  m.name = std::move(name);
  m.half_extents = half;
  m.vertices.reserve(raw_vertices.size());
  for (const auto& v : raw_vertices) m.vertices.push_back((v - center).cwiseQuotient(half));
  m.triangles = std::move(triangles);
  m.symmetry_axis = category_symmetry(m.name);
  return m;
}

namespace {

// Adds an outward-facing quad (a, b, c, d counter-clockwise seen from outside).
void add_quad(std::vector<std::array<int, 3>>& tris, int a, int b, int c, int d) {
  tris.push_back({a, b, c});
  tris.push_back({a, c, d});
}

// Extrudes a counter-clockwise polygon in the xy-plane along z.
void extrude(const std::vector<Eigen::Vector2d>& poly, double half_depth, std::vector<Vec3>& verts,
             std::vector<std::array<int, 3>>& tris) {
  const int n = static_cast<int>(poly.size());
  for (const auto& p : poly) verts.emplace_back(p.x(), p.y(), half_depth);
  for (const auto& p : poly) verts.emplace_back(p.x(), p.y(), -half_depth);
  for (int i = 0; i < n; ++i) {
    const int j = (i + 1) % n;
    add_quad(tris, i + n, j + n, j, i);
  }
}

}  // namespace

Mesh make_box(const Vec3& h, std::string name) {
  std::vector<Vec3> v;
  for (int i = 0; i < 8; ++i) {
    v.emplace_back((i & 1) ? h.x() : -h.x(), (i & 2) ? h.y() : -h.y(), (i & 4) ? h.z() : -h.z());
  }
  std::vector<std::array<int, 3>> t;
  add_quad(t, 0, 4, 6, 2);  // -x
  add_quad(t, 1, 3, 7, 5);  // +x
  add_quad(t, 0, 1, 5, 4);  // -y
  add_quad(t, 2, 6, 7, 3);  // +y
  add_quad(t, 0, 2, 3, 1);  // -z
  add_quad(t, 4, 5, 7, 6);  // +z
  return canonicalize(std::move(name), v, std::move(t));
}

Mesh make_cylinder(double radius, double half_height, int segments, std::string name) {
  std::vector<Vec3> v;
  std::vector<std::array<int, 3>> t;
  for (int i = 0; i < segments; ++i) {
    const double a = 2.0 * std::numbers::pi * i / segments;
    v.emplace_back(radius * std::cos(a), half_height, radius * std::sin(a));
    v.emplace_back(radius * std::cos(a), -half_height, radius * std::sin(a));
  }
  const int top = static_cast<int>(v.size());
  v.emplace_back(0.0, half_height, 0.0);
  const int bottom = static_cast<int>(v.size());
  v.emplace_back(0.0, -half_height, 0.0);
  for (int i = 0; i < segments; ++i) {
    const int j = (i + 1) % segments;
    add_quad(t, 2 * i, 2 * j, 2 * j + 1, 2 * i + 1);
    t.push_back({top, 2 * j, 2 * i});
    t.push_back({bottom, 2 * i + 1, 2 * j + 1});
  }
  return canonicalize(std::move(name), v, std::move(t));
}

Mesh make_lshape(std::string name) {
  // Long arm along x, short thick arm along y, shallow in z.
  const std::vector<Eigen::Vector2d> poly = {
      {-0.08, -0.05}, {0.08, -0.05}, {0.08, -0.01}, {-0.03, -0.01}, {-0.03, 0.06}, {-0.08, 0.06}};
  std::vector<Vec3> v;
  std::vector<std::array<int, 3>> t;
  extrude(poly, 0.025, v, t);
  const int n = static_cast<int>(poly.size());
  // Caps: split the L into two convex quads, front (+z) and back (-z).
  const auto cap = [&](int off, bool front) {
    const auto quad = [&](int a, int b, int c, int d) {
      if (front) add_quad(t, off + a, off + b, off + c, off + d);
      else add_quad(t, off + d, off + c, off + b, off + a);
    };
    quad(0, 1, 2, 3);
    quad(0, 3, 4, 5);
  };
  cap(0, true);
  cap(n, false);
  return canonicalize(std::move(name), v, std::move(t));
}

Mesh make_sphere(double radius, int rings, int segments, std::string name) {
  std::vector<Vec3> v;
  std::vector<std::array<int, 3>> t;
  v.emplace_back(0.0, radius, 0.0);
  for (int r = 1; r < rings; ++r) {
    const double phi = std::numbers::pi * r / rings;
    for (int s = 0; s < segments; ++s) {
      const double a = 2.0 * std::numbers::pi * s / segments;
      v.emplace_back(radius * std::sin(phi) * std::cos(a), radius * std::cos(phi), radius * std::sin(phi) * std::sin(a));
    }
  }
  v.emplace_back(0.0, -radius, 0.0);
  const int south = static_cast<int>(v.size()) - 1;
  const auto at = [&](int r, int s) { return 1 + (r - 1) * segments + (s % segments); };
  for (int s = 0; s < segments; ++s) {
    t.push_back({0, at(1, s + 1), at(1, s)});
    t.push_back({south, at(rings - 1, s), at(rings - 1, s + 1)});
  }
  for (int r = 1; r < rings - 1; ++r) {
    for (int s = 0; s < segments; ++s) {
      add_quad(t, at(r, s), at(r, s + 1), at(r + 1, s + 1), at(r + 1, s));
    }
  }
  return canonicalize(std::move(name), v, std::move(t));
}

namespace {

Mesh load_obj(const std::string& path, std::istream& in) {
  std::vector<Vec3> v;
  std::vector<std::array<int, 3>> t;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "v") {
      Vec3 p;
      if (!(ls >> p.x() >> p.y() >> p.z())) throw std::runtime_error(path + ": malformed vertex line");
      v.push_back(p);
    } else if (tag == "f") {
      std::vector<int> idx;
      std::string tok;
      while (ls >> tok) {
        const int i = std::stoi(tok.substr(0, tok.find('/')));
        idx.push_back(i > 0 ? i - 1 : static_cast<int>(v.size()) + i);
      }
      if (idx.size() < 3) throw std::runtime_error(path + ": face with fewer than 3 vertices");
      for (std::size_t k = 1; k + 1 < idx.size(); ++k) t.push_back({idx[0], idx[k], idx[k + 1]});
    }
  }
  return canonicalize(std::filesystem::path(path).stem().string(), v, std::move(t));
}

Mesh load_ply_mesh(const std::string& path, std::istream& in) {
  std::string line;
  std::getline(in, line);
  if (line.rfind("ply", 0) != 0) throw std::runtime_error(path + ": not a PLY file");
  std::size_t nv = 0, nf = 0;
  int vprops = 0;
  int xi = -1;
  std::string current;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt != "ascii") throw std::runtime_error(path + ": only ASCII PLY is supported");
    } else if (tag == "element") {
      std::size_t count = 0;
      ls >> current >> count;
      if (current == "vertex") nv = count;
      if (current == "face") nf = count;
    } else if (tag == "property" && current == "vertex") {
      std::string type, name;
      ls >> type >> name;
      if (name == "x") xi = vprops;
      ++vprops;
    } else if (tag == "end_header") {
      break;
    }
  }
  if (xi < 0) throw std::runtime_error(path + ": PLY lacks vertex x/y/z");
  std::vector<Vec3> v(nv);
  for (std::size_t i = 0; i < nv; ++i) {
    std::vector<double> vals(vprops);
    for (auto& x : vals)
      if (!(in >> x)) throw std::runtime_error(path + ": truncated vertex data");
    v[i] = Vec3(vals[xi], vals[xi + 1], vals[xi + 2]);
  }
  std::vector<std::array<int, 3>> t;
  for (std::size_t i = 0; i < nf; ++i) {
    int count = 0;
    if (!(in >> count) || count < 3) throw std::runtime_error(path + ": malformed face");
    std::vector<int> idx(count);
    for (auto& k : idx) in >> k;
    for (int k = 1; k + 1 < count; ++k) t.push_back({idx[0], idx[k], idx[k + 1]});
  }
  return canonicalize(std::filesystem::path(path).stem().string(), v, std::move(t));
}

}  // namespace

Mesh load_mesh(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open mesh file: " + path);
  const std::string ext = std::filesystem::path(path).extension().string();
  if (ext == ".obj" || ext == ".OBJ") return load_obj(path, in);
  if (ext == ".ply" || ext == ".PLY") return load_ply_mesh(path, in);
  throw std::runtime_error("unsupported mesh format: " + path);
}

Mesh resolve_mesh(const std::string& spec) {
  if (spec.rfind("builtin:", 0) == 0) {
    const std::string kind = spec.substr(8);
    if (kind == "cube") return make_box(Vec3(0.06, 0.06, 0.06));
    if (kind == "cylinder") return make_cylinder(0.04, 0.08);
    if (kind == "lshape") return make_lshape();
    if (kind == "sphere") return make_sphere(0.06);
    throw std::runtime_error("unknown builtin mesh: " + spec);
  }
  return load_mesh(spec);
}

std::optional<Vec3> category_symmetry(const std::string& category) {
  static const char* symmetric[] = {"bottle", "can", "bowl", "cylinder", "sphere"};
  for (const char* s : symmetric) {
    if (category == s) return kCanonicalUp;
  }
  return std::nullopt;
}

}  // namespace cppf
