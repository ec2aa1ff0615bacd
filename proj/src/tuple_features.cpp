#include "cppf/tuple_features.hpp"

#include "cppf/vote_targets.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace cppf {

void DescriptorConfig::validate() const {
  if (!(radius > 0.0)) throw std::invalid_argument("DescriptorConfig: radius must be positive");
  if (distance_bins < 0 || normal_bins < 0 || offset_bins < 0) {
    throw std::invalid_argument("DescriptorConfig: negative bin count");
  }
}

std::vector<TupleSample> sample_tuples(const PointCloud& cloud, int k, int n, std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("sample_tuples: N must be at least 2");
  if (k < 1) throw std::invalid_argument("sample_tuples: K must be at least 1");
  const int size = static_cast<int>(cloud.size());
  if (size < n) throw std::invalid_argument("sample_tuples: cloud has fewer points than N");

  std::mt19937_64 rng(seed);
  std::vector<int> perm(size);
  std::iota(perm.begin(), perm.end(), 0);
  std::size_t cursor = perm.size();
  const auto next_voter = [&]() {
    if (cursor == perm.size()) {
      std::shuffle(perm.begin(), perm.end(), rng);
      cursor = 0;
    }
    return perm[cursor++];
  };
  std::uniform_int_distribution<int> any(0, size - 1);

  std::vector<TupleSample> out;
  out.reserve(k);
  const long max_attempts = 1000L + 100L * k;
  long attempts = 0;
  int first = next_voter();
  while (static_cast<int>(out.size()) < k) {
    if (++attempts > max_attempts) throw std::invalid_argument("sample_tuples: cannot find a non-degenerate pair");
    const int second = next_voter();
    if (second == first ||
        (cloud.points[second] - cloud.points[first]).norm() <= kDegeneratePairDistance) {
      first = second;
      continue;
    }
    TupleSample t;
    t.indices.reserve(n);
    t.indices.push_back(first);
    t.indices.push_back(second);
    while (static_cast<int>(t.indices.size()) < n) {
      const int c = any(rng);
      if (std::find(t.indices.begin(), t.indices.end(), c) == t.indices.end()) t.indices.push_back(c);
    }
    out.push_back(std::move(t));
    first = next_voter();
  }
  return out;
}

Eigen::VectorXd compute_feature(const PointCloud& cloud, const std::vector<int>& indices) {
  if (!cloud.has_normals()) throw std::invalid_argument("compute_feature: cloud has no normals");
  const int n = static_cast<int>(indices.size());
  const int d = cloud.descriptor_dim();
  Eigen::VectorXd f(feature_dim(n, d));
  int pos = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      f.segment<3>(pos) = cloud.points[indices[j]] - cloud.points[indices[i]];
      pos += 3;
    }
  }
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double c = cloud.normals[indices[i]].dot(cloud.normals[indices[j]]);
      f(pos++) = std::max(c, -c);
    }
  }
  for (int i = 0; i < n; ++i) {
    if (d > 0) f.segment(pos, d) = cloud.descriptors.row(indices[i]).transpose();
    pos += d;
  }
  return f;
}

namespace {

int bin_of(double value, double range, int bins) {
  const int b = static_cast<int>(std::floor(value / range * bins));
  return std::clamp(b, 0, bins - 1);
}

void normalize_block(Eigen::VectorXd& v, int start, int len) {
  if (len == 0) return;
  const double sum = v.segment(start, len).sum();
  if (sum > 0.0) v.segment(start, len) /= sum;
}

}  // namespace

DescriptorResult local_descriptor(const PointCloud& cloud, const NeighborGrid& grid, int index,
                                  const DescriptorConfig& cfg) {
  cfg.validate();
  if (!cloud.has_normals()) throw std::invalid_argument("local_descriptor: cloud has no normals");
  DescriptorResult res;
  res.values = Eigen::VectorXd::Zero(cfg.dim());
  const Vec3& center = cloud.points[index];
  const Vec3& normal = cloud.normals[index];
  std::vector<int> nbr;
  grid.radius(center, cfg.radius, nbr);
  const int b0 = 0, b1 = cfg.distance_bins, b2 = cfg.distance_bins + cfg.normal_bins;
  int used = 0;
  for (int j : nbr) {
    if (j == index) continue;
    const Vec3 off = cloud.points[j] - center;
    const double dist = off.norm();
    ++used;
    if (cfg.distance_bins > 0) res.values(b0 + bin_of(dist, cfg.radius, cfg.distance_bins)) += 1.0;
    if (cfg.normal_bins > 0) {
      res.values(b1 + bin_of(std::abs(normal.dot(cloud.normals[j])), 1.0, cfg.normal_bins)) += 1.0;
    }
    if (cfg.offset_bins > 0 && dist > 0.0) {
      res.values(b2 + bin_of(std::abs(normal.dot(off) / dist), 1.0, cfg.offset_bins)) += 1.0;
    }
  }
  if (used == 0) {
    res.empty_neighborhood = true;
    return res;
  }
  normalize_block(res.values, b0, cfg.distance_bins);
  normalize_block(res.values, b1, cfg.normal_bins);
  normalize_block(res.values, b2, cfg.offset_bins);
  return res;
}

int compute_descriptors(PointCloud& cloud, const DescriptorConfig& cfg) {
  cfg.validate();
  NeighborGrid grid(cloud.points, cfg.radius);
  cloud.descriptors.resize(static_cast<Eigen::Index>(cloud.size()), cfg.dim());
  int empty = 0;
  for (int i = 0; i < static_cast<int>(cloud.size()); ++i) {
    const auto r = local_descriptor(cloud, grid, i, cfg);
    cloud.descriptors.row(i) = r.values.transpose();
    empty += r.empty_neighborhood ? 1 : 0;
  }
  return empty;
}

void compute_features(const PointCloud& cloud, std::vector<TupleSample>& tuples) {
  for (auto& t : tuples) t.feature = compute_feature(cloud, t.indices);
}

void attach_ground_truth(std::vector<TupleSample>& tuples, const std::vector<Vec3>& canonical, const Vec3& scale) {
  for (auto& t : tuples) {
    t.gt_canonical = std::array<Vec3, 2>{canonical[t.indices[0]], canonical[t.indices[1]]};
    t.gt_scale = scale;
  }
}

}  // namespace cppf
