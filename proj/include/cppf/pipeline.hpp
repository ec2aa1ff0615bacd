#pragma once

#include "cppf/predictor.hpp"
#include "cppf/refine.hpp"
#include "cppf/scene.hpp"
#include "cppf/tuple_features.hpp"
#include "cppf/vote_engine.hpp"

#include <cstdint>
#include <memory>
#include <vector>

namespace cppf {

struct PipelineConfig {
  int tuples = 5000;        // K
  int tuple_size = 5;       // N
  int normal_k = 16;
  DescriptorConfig descriptor;
  FilterConfig filter;
  double voxel = 0.002;
  double grid_padding = 0.5;
  double orientation_resolution_deg = 1.0;
  RefineConfig refine;
  bool refine_enabled = true;
  DecodeMode decode = DecodeMode::kExpectation;
  std::uint64_t seed = 1;
  int workers = 1;
  void validate() const;
};

struct PoseEstimate {
  Pose9D pose;
  /// Voting output before refinement.
  Pose9D voted;
  bool azimuth_ambiguous = false;
  double initial_lcoord = 0.0;
  double final_lcoord = 0.0;
  long center_cell = -1;
  long up_cell = -1;
  long right_cell = -1;
  int dropped_records = 0;
  bool refine_rank_deficient = false;
  std::vector<PairVoteRecord> records;
};

/// Computes normals (if absent) and descriptors for a cloud in place.
void prepare_cloud(PointCloud& cloud, const PipelineConfig& cfg);

/// Tuples with features (and ground truth when the sample carries canonical coordinates).
std::vector<TupleSample> make_tuples(const SceneSample& sample, const PipelineConfig& cfg, std::uint64_t seed);

/// Full estimate: tuples, prediction, center vote, filtering, re-weighting,
/// orientation and scale votes, online refinement. `sample.cloud` must already
/// be prepared (see prepare_cloud).
PoseEstimate estimate_pose(const SceneSample& sample, const CanonicalPredictor& predictor, const PipelineConfig& cfg);

/// Same as estimate_pose but reusing tuples already built for this sample.
PoseEstimate estimate_pose(const SceneSample& sample, const std::vector<TupleSample>& tuples,
                           const CanonicalPredictor& predictor, const PipelineConfig& cfg);

/// Refinement correspondences from kept records, targets scaled by `scale`.
std::vector<Correspondence> correspondences_from(const std::vector<PairVoteRecord>& records, const Vec3& scale);

/// Index of the smallest loss; ties go to the lowest index.
std::size_t ensemble_select(const std::vector<double>& final_losses);

struct EnsembleEstimate {
  PoseEstimate estimate;
  std::size_t chosen = 0;
  std::vector<double> losses;
};

/// Runs every predictor on the same tuples and keeps the lowest refined L_coord.
EnsembleEstimate estimate_pose_ensemble(const SceneSample& sample,
                                        const std::vector<const CanonicalPredictor*>& predictors,
                                        const PipelineConfig& cfg);

}  // namespace cppf
