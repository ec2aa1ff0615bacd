#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cppf {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Raised when an input violates a documented precondition.
class GeometryError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Canonical object frame. Up is +y, right is +x.
inline const Vec3 kCanonicalUp{0.0, 1.0, 0.0};
inline const Vec3 kCanonicalRight{1.0, 0.0, 0.0};

/// Unit-length direction. Construction normalizes and rejects zero vectors.
class UnitVec3 {
 public:
  UnitVec3() : v_(0.0, 0.0, 1.0) {}
  explicit UnitVec3(const Vec3& v);

  const Vec3& vec() const { return v_; }
  double dot(const UnitVec3& o) const { return v_.dot(o.v_); }
  double dot(const Vec3& o) const { return v_.dot(o); }
  UnitVec3 operator-() const { return UnitVec3::trusted(-v_); }

  /// Wraps a vector the caller guarantees to be unit length.
  static UnitVec3 trusted(const Vec3& v) {
    UnitVec3 u;
    u.v_ = v;
    return u;
  }

 private:
  Vec3 v_;
};

/// Proper rotation in SO(3), stored as a matrix.
class Rotation {
 public:
  Rotation() : m_(Mat3::Identity()) {}
  /// Accepts a matrix already in SO(3) (checked to 1e-6, then re-orthonormalized).
  explicit Rotation(const Mat3& m);

  static Rotation identity() { return Rotation(); }
  /// Nearest rotation (polar decomposition) to an arbitrary nonsingular matrix.
  static Rotation nearest(const Mat3& m);

  const Mat3& matrix() const { return m_; }
  Vec3 operator*(const Vec3& v) const { return m_ * v; }
  Rotation operator*(const Rotation& o) const;
  Rotation inverse() const;

  /// Column k of the matrix, i.e. the image of canonical axis k.
  Vec3 axis(int k) const { return m_.col(k); }

 private:
  Mat3 m_;
  int compositions_ = 0;
};

Rotation so3_exp(const Vec3& omega);
Vec3 so3_log(const Rotation& r);
/// Skew-symmetric cross-product matrix.
Mat3 hat(const Vec3& v);
/// Geodesic angle between two rotations, radians in [0, pi].
double rotation_angle(const Rotation& a, const Rotation& b);

/// Rotation + translation + per-axis scale. Maps canonical p to R * diag(s) * p + t.
struct Pose9D {
  Rotation rotation;
  Vec3 translation = Vec3::Zero();
  Vec3 scale = Vec3::Ones();

  Pose9D() = default;
  Pose9D(Rotation r, Vec3 t, Vec3 s);

  Vec3 apply(const Vec3& canonical) const;
  /// Inverse of apply: diag(s)^-1 R^T (p - t).
  Vec3 to_canonical(const Vec3& p) const;
  /// Metric canonical point R^T (p - t), i.e. canonical scaled by s.
  Vec3 to_metric_canonical(const Vec3& p) const;
  void validate() const;
};

/// Composition h∘g for unit-scale poses (rigid part only, scale taken from g).
Pose9D compose(const Pose9D& h, const Pose9D& g);
/// Inverse of a unit-scale pose.
Pose9D inverse_rigid(const Pose9D& g);

/// Points with unit normals and optional fixed-width descriptors.
struct PointCloud {
  std::vector<Vec3> points;
  std::vector<Vec3> normals;
  /// One row per point; zero columns when absent.
  Eigen::MatrixXd descriptors;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  bool has_normals() const { return normals.size() == points.size() && !points.empty(); }
  int descriptor_dim() const { return static_cast<int>(descriptors.cols()); }
  void validate() const;
};

/// Box whose frame and half-extents come from a pose: canonical [-1,1]^3.
struct OrientedBox {
  Pose9D pose;
  bool contains(const Vec3& p) const;
  std::array<Vec3, 8> corners() const;
};

/// Applies p -> R diag(s) p + t to positions and R to normals.
PointCloud transform(const PointCloud& cloud, const Pose9D& pose);

/// Unit vector orthogonal to d: least-aligned coordinate axis with d projected out.
Vec3 orthogonal_unit(const Vec3& d);

/// Uniform bucket grid for neighbor queries on a fixed point set.
class NeighborGrid {
 public:
  NeighborGrid(std::span<const Vec3> points, double cell);

  /// Indices within radius of q (inclusive), ascending index order.
  void radius(const Vec3& q, double r, std::vector<int>& out) const;
  /// k nearest indices to point q sorted by (distance, index).
  void knn(const Vec3& q, int k, std::vector<int>& out) const;

 private:
  long key(long ix, long iy, long iz) const;
  void cell_of(const Vec3& p, long& ix, long& iy, long& iz) const;

  std::span<const Vec3> points_;
  double cell_;
  Vec3 origin_;
  long nx_ = 1, ny_ = 1, nz_ = 1;
  std::vector<int> start_;
  std::vector<int> order_;
};

struct NormalEstimate {
  std::vector<Vec3> normals;
  /// True where the neighborhood covariance had rank < 2.
  std::vector<bool> degenerate;
};

/// PCA normals over k nearest neighbors, oriented toward the origin.
NormalEstimate estimate_normals(std::span<const Vec3> points, int k = 16);

}  // namespace cppf
