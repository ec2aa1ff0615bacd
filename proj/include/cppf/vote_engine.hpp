#pragma once

#include "cppf/geometry.hpp"
#include "cppf/predictor.hpp"
#include "cppf/tuple_features.hpp"
#include "cppf/vote_targets.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace cppf {

/// One voting pair: observed endpoints, the targets derived from its decoded
/// canonical coordinates, and its filtering state.
struct PairVoteRecord {
  int tuple = 0;
  int index1 = 0, index2 = 0;
  Vec3 p1 = Vec3::Zero(), p2 = Vec3::Zero();
  /// Decoded canonical coordinates scaled to meters by the record's scale.
  std::array<Vec3, 2> metric_canonical{Vec3::Zero(), Vec3::Zero()};
  /// Decoded canonical coordinates in [-1, 1].
  std::array<Vec3, 2> canonical{Vec3::Zero(), Vec3::Zero()};
  Vec3 scale = Vec3::Ones();
  CenterTargets center;
  OrientationTargets orientation;
  double epsilon = 0.0;
  bool kept = true;
  double weight = 1.0;
};

struct FilterConfig {
  double tau = 0.5;
  double eta = 1.0;
  int sigma_samples = 360;
  int theta_samples = 360;
  /// Filtering and re-weighting; off means every record votes with weight 1.
  bool enabled = true;
  /// Vote e2 on the beta cone. Off derives e2 from the best azimuth only.
  bool use_beta = true;
  /// Re-run the center vote with filtered, re-weighted records.
  bool second_center_pass = false;
  void validate() const;
};

struct CenterGrid {
  Vec3 origin = Vec3::Zero();
  double voxel = 0.002;
  std::array<long, 3> dims{1, 1, 1};
  std::vector<double> counts;

  /// Grid covering the tight box of `points`, padded by `padding` times its largest extent per side.
  static CenterGrid covering(const std::vector<Vec3>& points, double voxel = 0.002, double padding = 0.5);
  long cell_count() const { return dims[0] * dims[1] * dims[2]; }
  /// Linear index or -1 when outside.
  long index_of(const Vec3& p) const;
  Vec3 center_of(long index) const;
};

struct OrientationGrid {
  double resolution_deg = 1.0;
  int rows = 180;
  int cols = 360;
  std::vector<double> counts;
  /// Per-row area compensation 1 / max(sin(inclination), sin(resolution)).
  std::vector<double> row_weight;

  explicit OrientationGrid(double resolution_deg = 1.0);
  long index_of(const Vec3& u) const;
  Vec3 direction_of(long index) const;
};

/// Metric canonical targets for a decoded pair, with the object center at the origin.
std::pair<CenterTargets, OrientationTargets> derive_pair_targets(const Vec3& canonical1, const Vec3& canonical2,
                                                                 const Vec3& scale);

/// Builds records from tuples and predictions; degenerate decoded pairs are dropped and counted.
std::vector<PairVoteRecord> build_records(const PointCloud& cloud, std::span<const TupleSample> tuples,
                                          std::span<const CanonicalPrediction> predictions, DecodeMode mode,
                                          std::uint64_t seed, int* dropped = nullptr);

struct CenterVote {
  Vec3 center = Vec3::Zero();
  long cell = -1;
};

/// Kept records cast `sigma_samples` weighted votes around their circles.
CenterVote vote_center(const std::vector<PairVoteRecord>& records, CenterGrid& grid, const FilterConfig& cfg,
                       int workers = 1);

/// Marks the top ceil(tau * K) records by epsilon as discarded (ties: input order).
void filter_noisy_pairs(std::vector<PairVoteRecord>& records, const Vec3& center, const FilterConfig& cfg);

/// Weight = 1/(m(p1)+eta) * 1/(m(p2)+eta), m counting kept records that use the point.
void reweight(std::vector<PairVoteRecord>& records, double eta);

struct OrientationVote {
  Vec3 e1 = Vec3::UnitY();
  Vec3 e2 = Vec3::UnitX();
  Rotation rotation;
  long e1_cell = -1;
  long e2_cell = -1;
  double e2_peak_to_mean = 0.0;
  bool azimuth_ambiguous = false;
};

OrientationVote vote_orientation(const std::vector<PairVoteRecord>& records, OrientationGrid& up_grid,
                                 OrientationGrid& right_grid, const FilterConfig& cfg, int workers = 1);

/// Weighted mean of kept records' scales.
Vec3 vote_scale(const std::vector<PairVoteRecord>& records);

/// Rotation with columns (right, up, right x up) from voted axes; right is
/// projected orthogonal to up.
Rotation rotation_from_axes(const Vec3& up, const Vec3& right);

void write_records_csv(const std::string& path, const std::vector<PairVoteRecord>& records);
/// Raw little-endian dump: int64 rank, int64 dims..., then f64 counts.
void write_grid_binary(const std::string& path, const std::vector<long>& dims, const std::vector<double>& counts);

}  // namespace cppf
