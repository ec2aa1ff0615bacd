#pragma once

#include "cppf/predictor.hpp"

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace cppf {

enum class CoordLoss { kMse, kCrossEntropy };

struct PredictorConfig {
  int hidden_width = 128;
  int hidden_layers = 4;
  int bins = kDefaultBins;
  double learning_rate = 1e-3;
  int epochs = 100;
  int lr_halving_period = 25;
  int batch_size = 256;
  CoordLoss loss = CoordLoss::kMse;
  std::uint64_t seed = 7;
  void validate() const;
};

/// Column-per-example training data for the coordinate/scale heads.
struct TrainingSet {
  Eigen::MatrixXd features;  // dim x n
  Eigen::MatrixXd coords;    // 6 x n, first point xyz then second point xyz
  Eigen::MatrixXd scales;    // 3 x n

  Eigen::Index size() const { return features.cols(); }
  void append(const std::vector<TupleSample>& tuples);
};

class DimensionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LossParts {
  double coord = 0.0;
  double scale = 0.0;
  double total() const { return coord + scale; }
};

/// Residual MLP: input standardization, ReLU trunk with residual hidden
/// blocks, a softmax coordinate head (6 x bins) and a linear scale head.
class Mlp {
 public:
  struct Layer {
    Eigen::MatrixXd w;
    Eigen::VectorXd b;
  };

  Mlp() = default;
  Mlp(int input_dim, const PredictorConfig& cfg);

  int input_dim() const { return input_dim_; }
  int bins() const { return bins_; }
  int hidden_width() const { return width_; }
  int hidden_layers() const { return depth_; }

  /// Fits the input standardization to data. Called once before training.
  void fit_normalization(const Eigen::MatrixXd& features);

  /// Per-column predictions.
  std::vector<CanonicalPrediction> forward(const Eigen::MatrixXd& features) const;

  /// Loss of a batch; fills gradients when `grads` is non-null.
  LossParts loss(const Eigen::MatrixXd& features, const Eigen::MatrixXd& coords, const Eigen::MatrixXd& scales,
                 CoordLoss kind, std::vector<Layer>* grads) const;

  std::vector<Layer>& layers() { return layers_; }
  const std::vector<Layer>& layers() const { return layers_; }
  Eigen::Index parameter_count() const;
  Eigen::VectorXd flat_parameters() const;
  void set_flat_parameters(const Eigen::VectorXd& flat);
  static Eigen::VectorXd flatten(const std::vector<Layer>& layers);

  // Optimizer state, persisted with the checkpoint so training can resume.
  std::vector<Layer> adam_m, adam_v;
  std::uint64_t adam_step = 0;
  int epochs_done = 0;
  std::vector<double> loss_history;

  void save(const std::string& path) const;
  static Mlp load(const std::string& path);

 private:
  struct Cache;
  void run(const Eigen::MatrixXd& features, Cache& cache) const;

  int input_dim_ = 0;
  int width_ = 0;
  int depth_ = 0;
  int bins_ = 0;
  Eigen::VectorXd mean_, inv_std_;
  std::vector<Layer> layers_;  // input, residual blocks, coord head, scale head
};

struct TrainCallbacks {
  std::function<void(int epoch, double loss, double lr)> on_epoch;
};

/// Minimizes L_coord + L_scale with Adam; lr halves every `lr_halving_period`
/// epochs. Continues from the model's stored epoch and optimizer state.
/// Returns per-epoch mean losses for the epochs run here.
std::vector<double> train(Mlp& model, const TrainingSet& data, const PredictorConfig& cfg,
                          const TrainCallbacks& callbacks = {});

/// Supplies the training set for an absolute epoch index, so examples can be
/// drawn fresh every epoch. The reference must stay valid for that epoch.
using EpochData = std::function<const TrainingSet&(int epoch)>;
std::vector<double> train(Mlp& model, const EpochData& epoch_data, const PredictorConfig& cfg,
                          const TrainCallbacks& callbacks = {});

class MlpPredictor final : public CanonicalPredictor {
 public:
  explicit MlpPredictor(Mlp model, std::string label = "mlp") : model_(std::move(model)), label_(std::move(label)) {}
  std::vector<CanonicalPrediction> predict(std::span<const TupleSample> tuples) const override;
  int bins() const override { return model_.bins(); }
  std::string name() const override { return label_; }
  const Mlp& model() const { return model_; }

 private:
  Mlp model_;
  std::string label_;
};

}  // namespace cppf
