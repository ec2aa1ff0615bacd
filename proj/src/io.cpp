#include "cppf/io.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace cppf {

std::string fmt_real(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_ply(const std::string& path, const StoredCloud& data) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  const auto& c = data.cloud;
  const bool normals = c.normals.size() == c.points.size() && !c.points.empty();
  const bool canonical = data.canonical.size() == c.points.size() && !c.points.empty();
  out << "ply\nformat ascii 1.0\nelement vertex " << c.points.size() << "\n";
  out << "property double x\nproperty double y\nproperty double z\n";
  if (normals) out << "property double nx\nproperty double ny\nproperty double nz\n";
  if (canonical) out << "property double cx\nproperty double cy\nproperty double cz\nproperty uchar noise\n";
  out << "end_header\n";
  for (std::size_t i = 0; i < c.points.size(); ++i) {
    const auto& p = c.points[i];
    out << fmt_real(p.x()) << ' ' << fmt_real(p.y()) << ' ' << fmt_real(p.z());
    if (normals) {
      const auto& n = c.normals[i];
      out << ' ' << fmt_real(n.x()) << ' ' << fmt_real(n.y()) << ' ' << fmt_real(n.z());
    }
    if (canonical) {
      const auto& q = data.canonical[i];
      const bool noisy = i < data.noise.size() && data.noise[i];
      out << ' ' << fmt_real(q.x()) << ' ' << fmt_real(q.y()) << ' ' << fmt_real(q.z()) << ' ' << (noisy ? 1 : 0);
    }
    out << '\n';
  }
}

StoredCloud read_ply(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("ply", 0) != 0) throw std::runtime_error(path + ": not a PLY file");
  std::size_t count = 0;
  std::map<std::string, int> column;
  int ncols = 0;
  bool in_vertex = false;
  bool header_done = false;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt != "ascii") throw std::runtime_error(path + ": only ASCII PLY is supported");
    } else if (tag == "element") {
      std::string name;
      std::size_t n = 0;
      ls >> name >> n;
      in_vertex = name == "vertex";
      if (in_vertex) count = n;
    } else if (tag == "property" && in_vertex) {
      std::string type, name;
      ls >> type >> name;
      column[name] = ncols++;
    } else if (tag == "end_header") {
      header_done = true;
      break;
    }
  }
  if (!header_done) throw std::runtime_error(path + ": missing end_header");
  for (const char* k : {"x", "y", "z"}) {
    if (!column.count(k)) throw std::runtime_error(path + ": missing vertex property " + k);
  }
  const bool normals = column.count("nx") && column.count("ny") && column.count("nz");
  const bool canonical = column.count("cx") && column.count("cy") && column.count("cz");
  StoredCloud data;
  data.cloud.points.reserve(count);
  std::vector<double> row(ncols);
  for (std::size_t i = 0; i < count; ++i) {
    for (auto& v : row) {
      if (!(in >> v)) throw std::runtime_error(path + ": truncated vertex data");
    }
    data.cloud.points.emplace_back(row[column["x"]], row[column["y"]], row[column["z"]]);
    if (normals) data.cloud.normals.emplace_back(row[column["nx"]], row[column["ny"]], row[column["nz"]]);
    if (canonical) {
      data.canonical.emplace_back(row[column["cx"]], row[column["cy"]], row[column["cz"]]);
      data.noise.push_back(column.count("noise") && row[column["noise"]] != 0.0);
    }
  }
  return data;
}

void write_pose(const std::string& path, const Pose9D& pose) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  const Mat3& r = pose.rotation.matrix();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) out << fmt_real(r(i, j)) << (i == 2 && j == 2 ? '\n' : ' ');
  out << fmt_real(pose.translation.x()) << ' ' << fmt_real(pose.translation.y()) << ' '
      << fmt_real(pose.translation.z()) << '\n';
  out << fmt_real(pose.scale.x()) << ' ' << fmt_real(pose.scale.y()) << ' ' << fmt_real(pose.scale.z()) << '\n';
}

Pose9D read_pose(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  Mat3 r;
  Vec3 t, s;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) in >> r(i, j);
  in >> t.x() >> t.y() >> t.z() >> s.x() >> s.y() >> s.z();
  if (!in) throw std::runtime_error(path + ": malformed pose file");
  return Pose9D(Rotation(r), t, s);
}

}  // namespace cppf
