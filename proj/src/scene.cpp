#include "cppf/scene.hpp"

#include "cppf/io.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <numbers>

namespace cppf {

void NoiseConfig::validate() const {
  if (!(clutter_fraction >= 0.0 && clutter_fraction < 1.0)) {
    throw std::invalid_argument("NoiseConfig: clutter_fraction must be in [0, 1)");
  }
  if (depth_jitter_sigma < 0.0 || mask_dilation < 0.0) {
    throw std::invalid_argument("NoiseConfig: negative field");
  }
}

namespace {

constexpr double kNearPlane = 0.01;

void assign_normals(SceneSample& s, int k) {
  const auto n = s.cloud.points.size();
  if (static_cast<int>(n) >= k) {
    s.cloud.normals = estimate_normals(s.cloud.points, k).normals;
  } else {
    s.cloud.normals.resize(n);
    for (std::size_t i = 0; i < n; ++i) s.cloud.normals[i] = -s.cloud.points[i].normalized();
  }
}

Vec3 pixel_ray(const CameraIntrinsics& cam, double u, double v) {
  return Vec3((u - cam.cx) / cam.fx, (v - cam.cy) / cam.fy, 1.0);
}

}  // namespace

SceneSample sample_view(const Mesh& mesh, const Pose9D& pose, const CameraIntrinsics& cam, int normal_k) {
  pose.validate();
  std::vector<Vec3> world(mesh.vertices.size());
  for (std::size_t i = 0; i < world.size(); ++i) world[i] = pose.apply(mesh.vertices[i]);

  const std::size_t npix = static_cast<std::size_t>(cam.width) * cam.height;
  std::vector<double> depth(npix, std::numeric_limits<double>::infinity());

  for (const auto& tri : mesh.triangles) {
    const Vec3& a = world[tri[0]];
    const Vec3& b = world[tri[1]];
    const Vec3& c = world[tri[2]];
    if (a.z() <= kNearPlane || b.z() <= kNearPlane || c.z() <= kNearPlane) continue;
    const Vec3 normal = (b - a).cross(c - a);
    if (normal.squaredNorm() == 0.0) continue;
    const double plane = normal.dot(a);
    const Eigen::Vector2d pa(cam.fx * a.x() / a.z() + cam.cx, cam.fy * a.y() / a.z() + cam.cy);
    const Eigen::Vector2d pb(cam.fx * b.x() / b.z() + cam.cx, cam.fy * b.y() / b.z() + cam.cy);
    const Eigen::Vector2d pc(cam.fx * c.x() / c.z() + cam.cx, cam.fy * c.y() / c.z() + cam.cy);
    const double area = (pb - pa).x() * (pc - pa).y() - (pb - pa).y() * (pc - pa).x();
    if (area == 0.0) continue;
    const int x0 = std::max(0, static_cast<int>(std::floor(std::min({pa.x(), pb.x(), pc.x()}) - 0.5)));
    const int x1 = std::min(cam.width - 1, static_cast<int>(std::ceil(std::max({pa.x(), pb.x(), pc.x()}) - 0.5)));
    const int y0 = std::max(0, static_cast<int>(std::floor(std::min({pa.y(), pb.y(), pc.y()}) - 0.5)));
    const int y1 = std::min(cam.height - 1, static_cast<int>(std::ceil(std::max({pa.y(), pb.y(), pc.y()}) - 0.5)));
    const auto edge = [](const Eigen::Vector2d& p, const Eigen::Vector2d& q, double x, double y) {
      return (q.x() - p.x()) * (y - p.y()) - (q.y() - p.y()) * (x - p.x());
    };
    for (int py = y0; py <= y1; ++py) {
      for (int px = x0; px <= x1; ++px) {
        const double u = px + 0.5, v = py + 0.5;
        double w0 = edge(pb, pc, u, v), w1 = edge(pc, pa, u, v), w2 = edge(pa, pb, u, v);
        if (area < 0.0) {
          w0 = -w0;
          w1 = -w1;
          w2 = -w2;
        }
        if (w0 < 0.0 || w1 < 0.0 || w2 < 0.0) continue;
        const Vec3 ray = pixel_ray(cam, u, v);
        const double denom = normal.dot(ray);
        if (std::abs(denom) < 1e-12 * normal.norm()) continue;
        const double z = plane / denom;
        if (z <= kNearPlane) continue;
        double& slot = depth[static_cast<std::size_t>(py) * cam.width + px];
        if (z < slot) slot = z;
      }
    }
  }

  SceneSample s;
  s.gt_pose = pose;
  s.category = mesh.name;
  for (int py = 0; py < cam.height; ++py) {
    for (int px = 0; px < cam.width; ++px) {
      const double z = depth[static_cast<std::size_t>(py) * cam.width + px];
      if (!std::isfinite(z)) continue;
      const Vec3 p = pixel_ray(cam, px + 0.5, py + 0.5) * z;
      s.cloud.points.push_back(p);
      s.canonical.push_back(pose.to_canonical(p));
    }
  }
  if (s.cloud.points.empty()) throw EmptyViewError();
  s.noise_mask.assign(s.cloud.points.size(), false);
  assign_normals(s, normal_k);
  return s;
}

SceneSample corrupt(const SceneSample& sample, const NoiseConfig& cfg, std::uint64_t seed,
                    const CameraIntrinsics& cam, int normal_k) {
  cfg.validate();
  if (cfg.clutter_fraction == 0.0 && cfg.depth_jitter_sigma == 0.0) return sample;

  SceneSample s = sample;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::size_t n = s.cloud.points.size();

  if (cfg.depth_jitter_sigma > 0.0) {
    std::normal_distribution<double> jitter(0.0, cfg.depth_jitter_sigma);
    for (std::size_t i = 0; i < n; ++i) {
      if (s.noise_mask[i]) continue;
      Vec3& p = s.cloud.points[i];
      const double z = p.z();
      p *= (z + jitter(rng)) / z;
      s.canonical[i] = s.gt_pose.to_canonical(p);
    }
  }

  const auto clutter = static_cast<std::size_t>(std::llround(cfg.clutter_fraction * static_cast<double>(n)));
  if (clutter > 0) {
    Vec3 lo = s.cloud.points[0], hi = s.cloud.points[0];
    for (std::size_t i = 0; i < n; ++i) {
      lo = lo.cwiseMin(s.cloud.points[i]);
      hi = hi.cwiseMax(s.cloud.points[i]);
    }
    const Vec3 margin = 0.3 * (hi - lo);
    const std::size_t halo = cfg.mask_dilation > 0.0 ? clutter / 2 : 0;
    for (std::size_t k = 0; k < clutter; ++k) {
      Vec3 p;
      if (k < clutter - halo) {
        // Support plane just below the object (image-down is +y).
        p.x() = lo.x() - margin.x() + unit(rng) * (hi.x() - lo.x() + 2.0 * margin.x());
        p.z() = lo.z() - margin.z() + unit(rng) * (hi.z() - lo.z() + 2.0 * margin.z());
        p.y() = hi.y() + 0.005;
      } else {
        // Loose-mask halo: background pixels just outside the silhouette.
        const auto j = std::min<std::size_t>(static_cast<std::size_t>(unit(rng) * n), n - 1);
        const Vec3& q = sample.cloud.points[j];
        const double u = cam.fx * q.x() / q.z() + cam.cx;
        const double v = cam.fy * q.y() / q.z() + cam.cy;
        const double ang = 2.0 * std::numbers::pi * unit(rng);
        const double rad = 1.0 + unit(rng) * cfg.mask_dilation;
        const double z = q.z() + 0.01 + 0.05 * unit(rng);
        p = pixel_ray(cam, u + rad * std::cos(ang), v + rad * std::sin(ang)) * z;
      }
      s.cloud.points.push_back(p);
      s.canonical.emplace_back(2.0 * unit(rng) - 1.0, 2.0 * unit(rng) - 1.0, 2.0 * unit(rng) - 1.0);
      s.noise_mask.push_back(true);
    }
  }
  // Points moved or were added; descriptors must be recomputed by the caller.
  s.cloud.descriptors.resize(0, 0);
  assign_normals(s, normal_k);
  return s;
}

Rotation random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::Quaterniond q;
  do {
    q = Eigen::Quaterniond(g(rng), g(rng), g(rng), g(rng));
  } while (q.norm() < 1e-6);
  q.normalize();
  return Rotation::nearest(q.toRotationMatrix());
}

Pose9D random_pose(const Mesh& mesh, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Rotation r = random_rotation(rng);
  const Vec3 t(-0.03 + 0.06 * unit(rng), -0.03 + 0.06 * unit(rng), 0.45 + 0.15 * unit(rng));
  const double factor = 0.85 + 0.3 * unit(rng);
  return Pose9D(r, t, mesh.half_extents * factor);
}

void write_sample(const std::string& dir, const std::string& id, const SceneSample& sample) {
  std::filesystem::create_directories(dir);
  StoredCloud data{sample.cloud, sample.canonical, sample.noise_mask};
  write_ply(dir + "/" + id + ".ply", data);
  write_pose(dir + "/" + id + ".pose.txt", sample.gt_pose);
}

SceneSample read_sample(const std::string& dir, const std::string& id) {
  StoredCloud data = read_ply(dir + "/" + id + ".ply");
  SceneSample s;
  s.cloud = std::move(data.cloud);
  s.canonical = std::move(data.canonical);
  s.noise_mask = std::move(data.noise);
  if (s.noise_mask.size() != s.cloud.points.size()) s.noise_mask.assign(s.cloud.points.size(), false);
  const std::string pose_path = dir + "/" + id + ".pose.txt";
  if (std::filesystem::exists(pose_path)) s.gt_pose = read_pose(pose_path);
  return s;
}

}  // namespace cppf
