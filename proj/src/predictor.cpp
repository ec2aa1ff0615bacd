#include "cppf/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

namespace cppf {

void CanonicalPrediction::validate(double tol) const {
  if (dist.rows() != 6 || dist.cols() < 1) throw std::invalid_argument("CanonicalPrediction: expected 6 x bins");
  if ((dist.array() < 0.0).any()) throw std::invalid_argument("CanonicalPrediction: negative mass");
  for (int r = 0; r < 6; ++r) {
    if (std::abs(dist.row(r).sum() - 1.0) > tol) throw std::invalid_argument("CanonicalPrediction: row not normalized");
  }
}

int bin_index(double x, int bins) {
  const int b = static_cast<int>(std::floor((x + 1.0) * 0.5 * bins));
  return std::clamp(b, 0, bins - 1);
}

std::array<Vec3, 2> decode_coordinates(const CanonicalPrediction& pred, DecodeMode mode, std::mt19937_64* rng) {
  const int bins = pred.bins();
  std::array<Vec3, 2> out;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int p = 0; p < 2; ++p) {
    for (int a = 0; a < 3; ++a) {
      const auto row = pred.dist.row(3 * p + a);
      if (mode == DecodeMode::kExpectation) {
        double sum = 0.0, mass = 0.0;
        for (int b = 0; b < bins; ++b) {
          sum += row(b) * bin_center(b, bins);
          mass += row(b);
        }
        out[p][a] = mass > 0.0 ? std::clamp(sum / mass, -1.0, 1.0) : 0.0;
      } else {
        if (rng == nullptr) throw std::invalid_argument("decode_coordinates: sampling needs an rng");
        const double target = unit(*rng) * row.sum();
        double acc = 0.0;
        int chosen = bins - 1;
        for (int b = 0; b < bins; ++b) {
          acc += row(b);
          if (target < acc) {
            chosen = b;
            break;
          }
        }
        out[p][a] = bin_center(chosen, bins);
      }
    }
  }
  return out;
}

void OraclePredictorConfig::validate() const {
  if (coord_noise_sigma < 0.0 || scale_noise_sigma < 0.0) throw std::invalid_argument("oracle: negative noise");
  if (!(collision_rate >= 0.0 && collision_rate <= 1.0)) throw std::invalid_argument("oracle: collision_rate outside [0,1]");
  if (bins < 1) throw std::invalid_argument("oracle: bins must be positive");
}

OraclePredictor::OraclePredictor(OraclePredictorConfig cfg) : cfg_(cfg) { cfg_.validate(); }

std::uint64_t OraclePredictor::feature_hash(const TupleSample& t) {
  if (t.feature.size() < 3) throw std::invalid_argument("oracle: tuple has no feature");
  const int n = static_cast<int>(t.indices.size());
  const double dist = t.feature.segment<3>(0).norm();
  const double cosine = t.feature(3 * pair_count(n));
  const auto qd = static_cast<std::uint64_t>(std::llround(dist / 0.005));
  const auto qc = static_cast<std::uint64_t>(std::llround(cosine / 0.1));
  return qd * 16u + qc;
}

std::vector<CanonicalPrediction> OraclePredictor::predict(std::span<const TupleSample> tuples) const {
  const int bins = cfg_.bins;
  std::mt19937_64 rng(cfg_.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<CanonicalPrediction> out(tuples.size());
  std::vector<std::array<int, 6>> gt_bins(tuples.size());
  for (std::size_t i = 0; i < tuples.size(); ++i) {
    const auto& t = tuples[i];
    if (!t.gt_canonical || !t.gt_scale) throw std::invalid_argument("oracle: tuple lacks ground truth");
    auto& pred = out[i];
    pred.dist = Eigen::MatrixXd::Zero(6, bins);
    for (int p = 0; p < 2; ++p) {
      for (int a = 0; a < 3; ++a) {
        const double clean = (*t.gt_canonical)[p][a];
        gt_bins[i][3 * p + a] = bin_index(clean, bins);
        const double noisy = clean + (cfg_.coord_noise_sigma > 0.0 ? cfg_.coord_noise_sigma * gauss(rng) : 0.0);
        pred.dist(3 * p + a, bin_index(noisy, bins)) = 1.0;
      }
    }
    pred.scale = *t.gt_scale;
    if (cfg_.scale_noise_sigma > 0.0) {
      for (int a = 0; a < 3; ++a) pred.scale[a] = std::max(1e-6, pred.scale[a] + cfg_.scale_noise_sigma * gauss(rng));
    }
  }

  if (cfg_.collision_rate > 0.0) {
    std::unordered_map<std::uint64_t, std::vector<std::size_t>> buckets;
    std::vector<std::uint64_t> keys(tuples.size());
    for (std::size_t i = 0; i < tuples.size(); ++i) {
      keys[i] = feature_hash(tuples[i]);
      buckets[keys[i]].push_back(i);
    }
    for (std::size_t i = 0; i < tuples.size(); ++i) {
      if (unit(rng) >= cfg_.collision_rate) continue;
      const auto& members = buckets[keys[i]];
      Eigen::MatrixXd hist = Eigen::MatrixXd::Zero(6, bins);
      for (std::size_t m : members) {
        for (int r = 0; r < 6; ++r) hist(r, gt_bins[m][r]) += 1.0;
      }
      out[i].dist = hist / static_cast<double>(members.size());
    }
  }
  return out;
}

}  // namespace cppf
