#include "cppf/pipeline.hpp"

#include <algorithm>
#include <stdexcept>

namespace cppf {

void PipelineConfig::validate() const {
  if (tuples < 1) throw std::invalid_argument("PipelineConfig: K must be at least 1");
  if (tuple_size < 2) throw std::invalid_argument("PipelineConfig: N must be at least 2");
  if (!(voxel > 0.0) || !(orientation_resolution_deg > 0.0)) throw std::invalid_argument("PipelineConfig: grid resolution");
  descriptor.validate();
  filter.validate();
  refine.validate();
}

void prepare_cloud(PointCloud& cloud, const PipelineConfig& cfg) {
  cloud.validate();
  if (!cloud.has_normals()) {
    if (static_cast<int>(cloud.size()) >= cfg.normal_k) {
      cloud.normals = estimate_normals(cloud.points, cfg.normal_k).normals;
    } else {
      cloud.normals.resize(cloud.size());
      for (std::size_t i = 0; i < cloud.size(); ++i) cloud.normals[i] = -cloud.points[i].normalized();
    }
  }
  if (cfg.descriptor.dim() > 0 && cloud.descriptor_dim() != cfg.descriptor.dim()) {
    compute_descriptors(cloud, cfg.descriptor);
  }
}

std::vector<TupleSample> make_tuples(const SceneSample& sample, const PipelineConfig& cfg, std::uint64_t seed) {
  auto tuples = sample_tuples(sample.cloud, cfg.tuples, cfg.tuple_size, seed);
  compute_features(sample.cloud, tuples);
  if (sample.canonical.size() == sample.cloud.size()) attach_ground_truth(tuples, sample.canonical, sample.gt_pose.scale);
  return tuples;
}

std::vector<Correspondence> correspondences_from(const std::vector<PairVoteRecord>& records, const Vec3& scale) {
  std::vector<Correspondence> out;
  for (const auto& r : records) {
    if (!r.kept) continue;
    out.push_back({r.p1, r.canonical[0].cwiseProduct(scale)});
    out.push_back({r.p2, r.canonical[1].cwiseProduct(scale)});
  }
  return out;
}

PoseEstimate estimate_pose(const SceneSample& sample, const CanonicalPredictor& predictor, const PipelineConfig& cfg) {
  cfg.validate();
  return estimate_pose(sample, make_tuples(sample, cfg, cfg.seed), predictor, cfg);
}

PoseEstimate estimate_pose(const SceneSample& sample, const std::vector<TupleSample>& tuples,
                           const CanonicalPredictor& predictor, const PipelineConfig& cfg) {
  cfg.validate();
  PoseEstimate est;
  const auto predictions = predictor.predict(tuples);
  est.records = build_records(sample.cloud, tuples, predictions, cfg.decode, cfg.seed ^ 0x5bd1e995ULL,
                              &est.dropped_records);
  if (est.records.empty()) throw std::runtime_error("estimate_pose: every voting pair was degenerate");
  auto& records = est.records;

  CenterGrid grid = CenterGrid::covering(sample.cloud.points, cfg.voxel, cfg.grid_padding);
  CenterVote center = vote_center(records, grid, cfg.filter, cfg.workers);

  if (cfg.filter.enabled) {
    filter_noisy_pairs(records, center.center, cfg.filter);
    reweight(records, cfg.filter.eta);
    if (cfg.filter.second_center_pass) {
      std::fill(grid.counts.begin(), grid.counts.end(), 0.0);
      center = vote_center(records, grid, cfg.filter, cfg.workers);
    }
  }
  est.center_cell = center.cell;

  OrientationGrid up(cfg.orientation_resolution_deg), right(cfg.orientation_resolution_deg);
  const OrientationVote orient = vote_orientation(records, up, right, cfg.filter, cfg.workers);
  est.up_cell = orient.e1_cell;
  est.right_cell = orient.e2_cell;
  est.azimuth_ambiguous = orient.azimuth_ambiguous;

  const Vec3 scale = vote_scale(records);
  est.voted = Pose9D(orient.rotation, center.center, scale);
  est.pose = est.voted;

  const auto pairs = correspondences_from(records, scale);
  if (cfg.refine_enabled) {
    const RefineResult refined = refine(pairs, est.voted, cfg.refine);
    est.pose = refined.pose;
    est.initial_lcoord = refined.initial_loss;
    est.final_lcoord = refined.final_loss;
    est.refine_rank_deficient = refined.rank_deficient;
  } else {
    est.initial_lcoord = est.final_lcoord = alignment_loss(pairs, est.voted.rotation, est.voted.translation);
  }
  return est;
}

std::size_t ensemble_select(const std::vector<double>& final_losses) {
  if (final_losses.empty()) throw std::invalid_argument("ensemble_select: no models");
  std::size_t best = 0;
  for (std::size_t i = 1; i < final_losses.size(); ++i) {
    if (final_losses[i] < final_losses[best]) best = i;
  }
  return best;
}

EnsembleEstimate estimate_pose_ensemble(const SceneSample& sample,
                                        const std::vector<const CanonicalPredictor*>& predictors,
                                        const PipelineConfig& cfg) {
  if (predictors.empty()) throw std::invalid_argument("estimate_pose_ensemble: no predictors");
  const auto tuples = make_tuples(sample, cfg, cfg.seed);
  std::vector<PoseEstimate> all;
  EnsembleEstimate out;
  for (const auto* p : predictors) {
    all.push_back(estimate_pose(sample, tuples, *p, cfg));
    out.losses.push_back(all.back().final_lcoord);
  }
  out.chosen = ensemble_select(out.losses);
  out.estimate = std::move(all[out.chosen]);
  return out;
}

}  // namespace cppf
