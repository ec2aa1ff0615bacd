#pragma once

#include "cppf/geometry.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

namespace cppf {

/// Ordered N-point tuple. Only the first two points cast votes; the rest add context.
struct TupleSample {
  std::vector<int> indices;
  Eigen::VectorXd feature;
  std::optional<std::array<Vec3, 2>> gt_canonical;
  std::optional<Vec3> gt_scale;
};

/// Three-block rotation-invariant histogram standing in for SHOT.
struct DescriptorConfig {
  double radius = 0.02;
  int distance_bins = 8;
  int normal_bins = 8;
  int offset_bins = 8;

  int dim() const { return distance_bins + normal_bins + offset_bins; }
  void validate() const;
};

inline int pair_count(int n) { return n * (n - 1) / 2; }

/// Length of [F1 | F2 | F3] for N points and descriptor width D.
inline int feature_dim(int n, int descriptor_dim) { return 3 * pair_count(n) + pair_count(n) + n * descriptor_dim; }

/// Draws K tuples of N distinct indices. The voting pair (slots 1 and 2) is read
/// from a stream of shuffled permutations so every point occupies those slots
/// equally often; context slots are uniform.
std::vector<TupleSample> sample_tuples(const PointCloud& cloud, int k, int n, std::uint64_t seed);

/// [F1 | F2 | F3]: pairwise offsets p_j - p_i (i < j, lexicographic), abs normal
/// cosines per pair, then each point's descriptor in tuple order.
Eigen::VectorXd compute_feature(const PointCloud& cloud, const std::vector<int>& indices);

struct DescriptorResult {
  Eigen::VectorXd values;
  bool empty_neighborhood = false;
};

/// Descriptor of one point; `grid` must index `cloud.points`.
DescriptorResult local_descriptor(const PointCloud& cloud, const NeighborGrid& grid, int index,
                                  const DescriptorConfig& cfg);

/// Fills cloud.descriptors for every point. Returns the number of empty neighborhoods.
int compute_descriptors(PointCloud& cloud, const DescriptorConfig& cfg);

/// Fills TupleSample::feature for all tuples.
void compute_features(const PointCloud& cloud, std::vector<TupleSample>& tuples);

/// Attaches ground-truth canonical coordinates (first two points) and scale.
void attach_ground_truth(std::vector<TupleSample>& tuples, const std::vector<Vec3>& canonical, const Vec3& scale);

}  // namespace cppf
