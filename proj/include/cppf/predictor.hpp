#pragma once

#include "cppf/geometry.hpp"
#include "cppf/tuple_features.hpp"

#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace cppf {

inline constexpr int kDefaultBins = 32;

/// Per-axis categorical distributions over canonical bins for the two voting
/// points (row = 3 * point + axis) plus a metric scale estimate.
struct CanonicalPrediction {
  Eigen::MatrixXd dist;  // 6 x bins
  Vec3 scale = Vec3::Ones();

  int bins() const { return static_cast<int>(dist.cols()); }
  void validate(double tol = 1e-6) const;
};

/// Center of bin b in [-1, 1] split into `bins` equal cells.
inline double bin_center(int b, int bins) { return -1.0 + (2.0 * b + 1.0) / bins; }
/// Bin holding canonical coordinate x (clamped into [-1, 1]).
int bin_index(double x, int bins);

enum class DecodeMode { kExpectation, kSample };

/// Decodes both voting points. `rng` is required for kSample.
std::array<Vec3, 2> decode_coordinates(const CanonicalPrediction& pred, DecodeMode mode,
                                       std::mt19937_64* rng = nullptr);

/// Maps tuples (features and, for oracles, ground truth) to predictions.
class CanonicalPredictor {
 public:
  virtual ~CanonicalPredictor() = default;
  virtual std::vector<CanonicalPrediction> predict(std::span<const TupleSample> tuples) const = 0;
  virtual int bins() const = 0;
  virtual std::string name() const = 0;
};

struct OraclePredictorConfig {
  double coord_noise_sigma = 0.0;
  double collision_rate = 0.0;
  double scale_noise_sigma = 0.0;
  int bins = kDefaultBins;
  std::uint64_t seed = 0;
  void validate() const;
};

/// Predicts from ground-truth canonical coordinates with controlled corruption.
///
/// Gaussian noise (canonical units) is added before binning, so zero noise
/// gives a delta at the ground-truth bin. With probability `collision_rate` a
/// tuple's distribution is replaced by the histogram of ground-truth bins over
/// every tuple in the batch sharing its quantized point-pair feature, which is
/// how colliding pairs look to a learned model.
class OraclePredictor final : public CanonicalPredictor {
 public:
  explicit OraclePredictor(OraclePredictorConfig cfg);

  std::vector<CanonicalPrediction> predict(std::span<const TupleSample> tuples) const override;
  int bins() const override { return cfg_.bins; }
  std::string name() const override { return "oracle"; }
  const OraclePredictorConfig& config() const { return cfg_; }

  /// Hash bucket of the first pair: distance in 5 mm steps, abs normal cosine in 0.1 steps.
  static std::uint64_t feature_hash(const TupleSample& t);

 private:
  OraclePredictorConfig cfg_;
};

}  // namespace cppf
