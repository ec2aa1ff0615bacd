#include "cppf/geometry.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace cppf {

namespace {

constexpr int kReorthonormalizeEvery = 100;

double orthonormality_error(const Mat3& m) {
  return (m.transpose() * m - Mat3::Identity()).cwiseAbs().maxCoeff();
}

}  // namespace

UnitVec3::UnitVec3(const Vec3& v) {
  const double n = v.norm();
  if (!(n > 0.0) || !std::isfinite(n)) throw GeometryError("UnitVec3: zero or non-finite vector");
  v_ = v / n;
}

Rotation::Rotation(const Mat3& m) {
  if (!m.allFinite()) throw GeometryError("Rotation: non-finite matrix");
  if (orthonormality_error(m) > 1e-6 || std::abs(m.determinant() - 1.0) > 1e-6) {
    throw GeometryError("Rotation: matrix is not in SO(3)");
  }
  m_ = orthonormality_error(m) > 1e-13 ? nearest(m).m_ : m;
}

Rotation Rotation::nearest(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 u = svd.matrixU();
  const Mat3& v = svd.matrixV();
  if ((u * v.transpose()).determinant() < 0.0) u.col(2) *= -1.0;
  Rotation r;
  r.m_ = u * v.transpose();
  return r;
}

Rotation Rotation::operator*(const Rotation& o) const {
  Rotation r;
  r.m_ = m_ * o.m_;
  r.compositions_ = std::max(compositions_, o.compositions_) + 1;
  if (r.compositions_ > kReorthonormalizeEvery) {
    r = nearest(r.m_);
  }
  return r;
}

Rotation Rotation::inverse() const {
  Rotation r;
  r.m_ = m_.transpose();
  r.compositions_ = compositions_;
  return r;
}

Mat3 hat(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return m;
}

Rotation so3_exp(const Vec3& omega) {
  const double theta = omega.norm();
  const Mat3 k = hat(omega);
  double a, b;
  if (theta < 1e-6) {
    const double t2 = theta * theta;
    a = 1.0 - t2 / 6.0 + t2 * t2 / 120.0;
    b = 0.5 - t2 / 24.0 + t2 * t2 / 720.0;
  } else {
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / (theta * theta);
  }
  return Rotation::nearest(Mat3::Identity() + a * k + b * k * k);
}

Vec3 so3_log(const Rotation& r) {
  const Mat3& m = r.matrix();
  const Vec3 vee(m(2, 1) - m(1, 2), m(0, 2) - m(2, 0), m(1, 0) - m(0, 1));
  const double s = 0.5 * vee.norm();
  const double c = 0.5 * (m.trace() - 1.0);
  const double theta = std::atan2(s, c);
  if (theta < 1e-8) return 0.5 * vee;
  if (std::numbers::pi - theta < 1e-5) {
    // Near pi the antisymmetric part vanishes; read the axis off the
    // symmetric part using its largest diagonal entry.
    const Mat3 b = 0.5 * (m + Mat3::Identity());
    int k = 0;
    b.diagonal().maxCoeff(&k);
    Vec3 axis = b.col(k) / std::sqrt(std::max(b(k, k), 1e-300));
    axis.normalize();
    if (axis.dot(vee) < 0.0) axis = -axis;
    return theta * axis;
  }
  return theta / (2.0 * s) * vee;
}

double rotation_angle(const Rotation& a, const Rotation& b) {
  const Mat3 d = a.matrix().transpose() * b.matrix();
  return so3_log(Rotation::nearest(d)).norm();
}

Pose9D::Pose9D(Rotation r, Vec3 t, Vec3 s) : rotation(std::move(r)), translation(std::move(t)), scale(std::move(s)) {
  validate();
}

Vec3 Pose9D::apply(const Vec3& canonical) const {
  return rotation * canonical.cwiseProduct(scale) + translation;
}

Vec3 Pose9D::to_canonical(const Vec3& p) const {
  return to_metric_canonical(p).cwiseQuotient(scale);
}

Vec3 Pose9D::to_metric_canonical(const Vec3& p) const {
  return rotation.matrix().transpose() * (p - translation);
}

void Pose9D::validate() const {
  if (!translation.allFinite()) throw GeometryError("Pose9D: non-finite translation");
  if (!scale.allFinite() || (scale.array() <= 0.0).any()) {
    throw GeometryError("Pose9D: scale components must be positive");
  }
}

Pose9D compose(const Pose9D& h, const Pose9D& g) {
  Pose9D out;
  out.rotation = h.rotation * g.rotation;
  out.translation = h.rotation * g.translation + h.translation;
  out.scale = g.scale;
  return out;
}

Pose9D inverse_rigid(const Pose9D& g) {
  Pose9D out;
  out.rotation = g.rotation.inverse();
  out.translation = -(out.rotation * g.translation);
  out.scale = Vec3::Ones();
  return out;
}

void PointCloud::validate() const {
  if (points.empty()) throw GeometryError("PointCloud: no points");
  if (!normals.empty() && normals.size() != points.size()) {
    throw GeometryError("PointCloud: normals length differs from points");
  }
  if (descriptors.cols() > 0 && static_cast<std::size_t>(descriptors.rows()) != points.size()) {
    throw GeometryError("PointCloud: descriptor rows differ from points");
  }
}

bool OrientedBox::contains(const Vec3& p) const {
  const Vec3 c = pose.to_canonical(p);
  return c.cwiseAbs().maxCoeff() <= 1.0;
}

std::array<Vec3, 8> OrientedBox::corners() const {
  std::array<Vec3, 8> out;
  for (int i = 0; i < 8; ++i) {
    const Vec3 c((i & 1) ? 1.0 : -1.0, (i & 2) ? 1.0 : -1.0, (i & 4) ? 1.0 : -1.0);
    out[i] = pose.apply(c);
  }
  return out;
}

PointCloud transform(const PointCloud& cloud, const Pose9D& pose) {
  PointCloud out;
  out.points.reserve(cloud.points.size());
  for (const auto& p : cloud.points) out.points.push_back(pose.apply(p));
  out.normals.reserve(cloud.normals.size());
  for (const auto& n : cloud.normals) out.normals.push_back((pose.rotation * n).normalized());
  out.descriptors = cloud.descriptors;
  return out;
}

Vec3 orthogonal_unit(const Vec3& d) {
  int axis = 0;
  double best = std::abs(d.x());
  for (int k = 1; k < 3; ++k) {
    if (std::abs(d[k]) < best) {
      best = std::abs(d[k]);
      axis = k;
    }
  }
  Vec3 e = Vec3::Zero();
  e[axis] = 1.0;
  return (e - e.dot(d) * d).normalized();
}

NeighborGrid::NeighborGrid(std::span<const Vec3> points, double cell) : points_(points), cell_(cell) {
  if (!(cell > 0.0)) throw GeometryError("NeighborGrid: cell size must be positive");
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::max());
  Vec3 hi = -lo;
  for (const auto& p : points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  if (points.empty()) lo = hi = Vec3::Zero();
  const double max_cells = 8.0 * static_cast<double>(points.size()) + 64.0;
  for (;;) {
    const Vec3 ext = (hi - lo) / cell_;
    const double cells = (std::floor(ext.x()) + 1) * (std::floor(ext.y()) + 1) * (std::floor(ext.z()) + 1);
    if (cells <= max_cells) break;
    cell_ *= 1.5;
  }
  origin_ = lo;
  nx_ = static_cast<long>(std::floor((hi.x() - lo.x()) / cell_)) + 1;
  ny_ = static_cast<long>(std::floor((hi.y() - lo.y()) / cell_)) + 1;
  nz_ = static_cast<long>(std::floor((hi.z() - lo.z()) / cell_)) + 1;

  const std::size_t ncell = static_cast<std::size_t>(nx_ * ny_ * nz_);
  std::vector<int> counts(ncell + 1, 0);
  std::vector<long> keys(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    long ix, iy, iz;
    cell_of(points[i], ix, iy, iz);
    keys[i] = key(ix, iy, iz);
    ++counts[keys[i] + 1];
  }
  for (std::size_t c = 0; c < ncell; ++c) counts[c + 1] += counts[c];
  start_ = counts;
  order_.resize(points.size());
  std::vector<int> fill(counts.begin(), counts.end() - 1);
  for (std::size_t i = 0; i < points.size(); ++i) order_[fill[keys[i]]++] = static_cast<int>(i);
}

long NeighborGrid::key(long ix, long iy, long iz) const { return (iz * ny_ + iy) * nx_ + ix; }

void NeighborGrid::cell_of(const Vec3& p, long& ix, long& iy, long& iz) const {
  const Vec3 r = (p - origin_) / cell_;
  ix = std::clamp(static_cast<long>(std::floor(r.x())), 0L, nx_ - 1);
  iy = std::clamp(static_cast<long>(std::floor(r.y())), 0L, ny_ - 1);
  iz = std::clamp(static_cast<long>(std::floor(r.z())), 0L, nz_ - 1);
}

void NeighborGrid::radius(const Vec3& q, double r, std::vector<int>& out) const {
  out.clear();
  const Vec3 lo = (q - origin_).array() - r;
  const Vec3 hi = (q - origin_).array() + r;
  const long x0 = std::max(0L, static_cast<long>(std::floor(lo.x() / cell_)));
  const long y0 = std::max(0L, static_cast<long>(std::floor(lo.y() / cell_)));
  const long z0 = std::max(0L, static_cast<long>(std::floor(lo.z() / cell_)));
  const long x1 = std::min(nx_ - 1, static_cast<long>(std::floor(hi.x() / cell_)));
  const long y1 = std::min(ny_ - 1, static_cast<long>(std::floor(hi.y() / cell_)));
  const long z1 = std::min(nz_ - 1, static_cast<long>(std::floor(hi.z() / cell_)));
  const double r2 = r * r;
  for (long iz = z0; iz <= z1; ++iz)
    for (long iy = y0; iy <= y1; ++iy)
      for (long ix = x0; ix <= x1; ++ix) {
        const long c = key(ix, iy, iz);
        for (int j = start_[c]; j < start_[c + 1]; ++j) {
          const int idx = order_[j];
          if ((points_[idx] - q).squaredNorm() <= r2) out.push_back(idx);
        }
      }
  std::sort(out.begin(), out.end());
}

void NeighborGrid::knn(const Vec3& q, int k, std::vector<int>& out) const {
  out.clear();
  const int n = static_cast<int>(points_.size());
  k = std::min(k, n);
  if (k <= 0) return;
  long cx, cy, cz;
  cell_of(q, cx, cy, cz);
  std::vector<std::pair<double, int>> cand;
  const long max_ring = std::max({nx_, ny_, nz_});
  for (long ring = 0; ring <= max_ring; ++ring) {
    for (long iz = cz - ring; iz <= cz + ring; ++iz) {
      if (iz < 0 || iz >= nz_) continue;
      for (long iy = cy - ring; iy <= cy + ring; ++iy) {
        if (iy < 0 || iy >= ny_) continue;
        for (long ix = cx - ring; ix <= cx + ring; ++ix) {
          if (ix < 0 || ix >= nx_) continue;
          const long cheb = std::max({std::abs(ix - cx), std::abs(iy - cy), std::abs(iz - cz)});
          if (cheb != ring) continue;
          const long c = key(ix, iy, iz);
          for (int j = start_[c]; j < start_[c + 1]; ++j) {
            const int idx = order_[j];
            cand.emplace_back((points_[idx] - q).squaredNorm(), idx);
          }
        }
      }
    }
    if (static_cast<int>(cand.size()) >= k) {
      std::nth_element(cand.begin(), cand.begin() + (k - 1), cand.end());
      const double kth = cand[k - 1].first;
      const double reach = static_cast<double>(ring) * cell_;
      if (kth <= reach * reach) break;
    }
  }
  std::partial_sort(cand.begin(), cand.begin() + k, cand.end());
  for (int i = 0; i < k; ++i) out.push_back(cand[i].second);
}

NormalEstimate estimate_normals(std::span<const Vec3> points, int k) {
  if (k < 3) throw GeometryError("estimate_normals: k must be at least 3");
  if (static_cast<int>(points.size()) < k) throw GeometryError("estimate_normals: fewer points than k");

  Vec3 lo = points[0], hi = points[0];
  for (const auto& p : points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const double diag = std::max((hi - lo).norm(), 1e-9);
  const double cell = std::max(diag * std::sqrt(static_cast<double>(k) / static_cast<double>(points.size())), 1e-9);
  NeighborGrid grid(points, cell);

  NormalEstimate est;
  est.normals.resize(points.size());
  est.degenerate.assign(points.size(), false);
  std::vector<int> nbr;
  for (std::size_t i = 0; i < points.size(); ++i) {
    grid.knn(points[i], k, nbr);
    Vec3 mean = Vec3::Zero();
    for (int j : nbr) mean += points[j];
    mean /= static_cast<double>(nbr.size());
    Mat3 cov = Mat3::Zero();
    for (int j : nbr) {
      const Vec3 d = points[j] - mean;
      cov += d * d.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
    const Vec3 ev = eig.eigenvalues();
    const double scale = std::max(ev(2), 1e-300);
    Vec3 n;
    if (ev(1) <= 1e-12 * scale || ev(2) <= 0.0) {
      est.degenerate[i] = true;
      const double len = points[i].norm();
      n = len > 0.0 ? Vec3(-points[i] / len) : Vec3(0.0, 0.0, -1.0);
    } else {
      n = eig.eigenvectors().col(0).normalized();
      const double facing = -n.dot(points[i]);
      if (std::abs(facing) > 1e-12 * std::max(1.0, points[i].norm())) {
        if (facing < 0.0) n = -n;
      } else {
        int a = 0;
        n.cwiseAbs().maxCoeff(&a);
        if (n[a] < 0.0) n = -n;
      }
    }
    est.normals[i] = n;
  }
  return est;
}

}  // namespace cppf
