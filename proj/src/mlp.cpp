#include "cppf/mlp.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>

namespace cppf {

static_assert(std::endian::native == std::endian::little, "checkpoint format assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'C', 'P', 'P', 'F', 'M', 'L', 'P', '\0'};
constexpr std::uint32_t kVersion = 1;

Eigen::VectorXd bin_centers(int bins) {
  Eigen::VectorXd c(bins);
  for (int b = 0; b < bins; ++b) c(b) = bin_center(b, bins);
  return c;
}

}  // namespace

void PredictorConfig::validate() const {
  if (hidden_width < 1 || hidden_layers < 1 || bins < 1 || epochs < 0 || lr_halving_period < 1 || batch_size < 1) {
    throw std::invalid_argument("PredictorConfig: counts must be positive");
  }
  if (!(learning_rate > 0.0)) throw std::invalid_argument("PredictorConfig: learning_rate must be positive");
}

void TrainingSet::append(const std::vector<TupleSample>& tuples) {
  if (tuples.empty()) return;
  const Eigen::Index dim = tuples.front().feature.size();
  if (features.cols() > 0 && features.rows() != dim) throw DimensionMismatch("TrainingSet: feature width changed");
  const Eigen::Index start = features.cols();
  const Eigen::Index n = start + static_cast<Eigen::Index>(tuples.size());
  features.conservativeResize(dim, n);
  coords.conservativeResize(6, n);
  scales.conservativeResize(3, n);
  for (std::size_t i = 0; i < tuples.size(); ++i) {
    const auto& t = tuples[i];
    if (!t.gt_canonical || !t.gt_scale) throw std::invalid_argument("TrainingSet: tuple lacks ground truth");
    const Eigen::Index c = start + static_cast<Eigen::Index>(i);
    features.col(c) = t.feature;
    coords.col(c).head<3>() = (*t.gt_canonical)[0];
    coords.col(c).tail<3>() = (*t.gt_canonical)[1];
    scales.col(c) = *t.gt_scale;
  }
}

struct Mlp::Cache {
  Eigen::MatrixXd input;                 // standardized
  std::vector<Eigen::MatrixXd> pre;      // pre-activations per trunk layer
  std::vector<Eigen::MatrixXd> hidden;   // outputs per trunk layer
  Eigen::MatrixXd probs;                 // 6*bins x n, softmax per group
  Eigen::MatrixXd expect;                // 6 x n
  Eigen::MatrixXd scale;                 // 3 x n
};

Mlp::Mlp(int input_dim, const PredictorConfig& cfg)
    : input_dim_(input_dim), width_(cfg.hidden_width), depth_(cfg.hidden_layers), bins_(cfg.bins) {
  cfg.validate();
  if (input_dim < 1) throw std::invalid_argument("Mlp: input_dim must be positive");
  mean_ = Eigen::VectorXd::Zero(input_dim);
  inv_std_ = Eigen::VectorXd::Ones(input_dim);
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> g(0.0, 1.0);
  const auto make = [&](int out, int in, double gain) {
    Layer l;
    l.w = Eigen::MatrixXd::NullaryExpr(out, in, [&]() { return g(rng); }) * (gain * std::sqrt(2.0 / in));
    l.b = Eigen::VectorXd::Zero(out);
    return l;
  };
  layers_.push_back(make(width_, input_dim, 1.0));
  for (int l = 1; l < depth_; ++l) layers_.push_back(make(width_, width_, 0.5));
  layers_.push_back(make(6 * bins_, width_, 0.1));
  layers_.push_back(make(3, width_, 0.01));
  layers_.back().b.setConstant(0.05);
  for (const auto& l : layers_) {
    adam_m.push_back({Eigen::MatrixXd::Zero(l.w.rows(), l.w.cols()), Eigen::VectorXd::Zero(l.b.size())});
  }
  adam_v = adam_m;
}

void Mlp::fit_normalization(const Eigen::MatrixXd& features) {
  if (features.rows() != input_dim_) throw DimensionMismatch("Mlp: feature dimension mismatch");
  const double n = static_cast<double>(features.cols());
  if (n < 1) return;
  mean_ = features.rowwise().mean();
  const Eigen::VectorXd var = (features.colwise() - mean_).array().square().rowwise().sum() / n;
  // Constant features pass through unchanged.
  for (Eigen::Index i = 0; i < var.size(); ++i) {
    if (var(i) > 1e-12) {
      inv_std_(i) = 1.0 / std::sqrt(var(i));
    } else {
      mean_(i) = 0.0;
      inv_std_(i) = 1.0;
    }
  }
}

void Mlp::run(const Eigen::MatrixXd& features, Cache& c) const {
  if (features.rows() != input_dim_) {
    throw DimensionMismatch("Mlp: expected feature dimension " + std::to_string(input_dim_) + ", got " +
                            std::to_string(features.rows()));
  }
  c.input = (features.colwise() - mean_).array().colwise() * inv_std_.array();
  c.pre.assign(depth_, {});
  c.hidden.assign(depth_, {});
  c.pre[0] = (layers_[0].w * c.input).colwise() + layers_[0].b;
  c.hidden[0] = c.pre[0].cwiseMax(0.0);
  for (int l = 1; l < depth_; ++l) {
    c.pre[l] = (layers_[l].w * c.hidden[l - 1]).colwise() + layers_[l].b;
    c.hidden[l] = c.hidden[l - 1] + c.pre[l].cwiseMax(0.0);
  }
  const Eigen::MatrixXd& top = c.hidden[depth_ - 1];
  const Layer& head = layers_[depth_];
  const Layer& shead = layers_[depth_ + 1];
  c.probs = (head.w * top).colwise() + head.b;
  const Eigen::Index n = features.cols();
  const Eigen::VectorXd centers = bin_centers(bins_);
  c.expect.resize(6, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (int r = 0; r < 6; ++r) {
      auto seg = c.probs.col(j).segment(r * bins_, bins_);
      const double mx = seg.maxCoeff();
      seg = (seg.array() - mx).exp().matrix();
      seg /= seg.sum();
      c.expect(r, j) = seg.dot(centers);
    }
  }
  c.scale = (shead.w * top).colwise() + shead.b;
}

std::vector<CanonicalPrediction> Mlp::forward(const Eigen::MatrixXd& features) const {
  Cache c;
  run(features, c);
  std::vector<CanonicalPrediction> out(static_cast<std::size_t>(features.cols()));
  for (Eigen::Index j = 0; j < features.cols(); ++j) {
    auto& p = out[j];
    p.dist.resize(6, bins_);
    for (int r = 0; r < 6; ++r) p.dist.row(r) = c.probs.col(j).segment(r * bins_, bins_).transpose();
    p.scale = c.scale.col(j).cwiseMax(1e-6);
  }
  return out;
}

LossParts Mlp::loss(const Eigen::MatrixXd& features, const Eigen::MatrixXd& coords, const Eigen::MatrixXd& scales,
                    CoordLoss kind, std::vector<Layer>* grads) const {
  Cache c;
  run(features, c);
  const double n = static_cast<double>(features.cols());
  LossParts parts;
  const Eigen::MatrixXd scale_err = c.scale - scales;
  parts.scale = scale_err.squaredNorm() / (3.0 * n);

  Eigen::MatrixXd dlogits(6 * bins_, features.cols());
  const Eigen::VectorXd centers = bin_centers(bins_);
  if (kind == CoordLoss::kMse) {
    const Eigen::MatrixXd err = c.expect - coords;
    parts.coord = err.squaredNorm() / (6.0 * n);
    for (Eigen::Index j = 0; j < features.cols(); ++j) {
      for (int r = 0; r < 6; ++r) {
        const auto p = c.probs.col(j).segment(r * bins_, bins_);
        const double de = 2.0 * err(r, j) / (6.0 * n);
        dlogits.col(j).segment(r * bins_, bins_) = de * p.cwiseProduct((centers.array() - c.expect(r, j)).matrix());
      }
    }
  } else {
    double nll = 0.0;
    for (Eigen::Index j = 0; j < features.cols(); ++j) {
      for (int r = 0; r < 6; ++r) {
        const auto p = c.probs.col(j).segment(r * bins_, bins_);
        const int target = bin_index(coords(r, j), bins_);
        nll -= std::log(std::max(p(target), 1e-300));
        auto d = dlogits.col(j).segment(r * bins_, bins_);
        d = p / (6.0 * n);
        d(target) -= 1.0 / (6.0 * n);
      }
    }
    parts.coord = nll / (6.0 * n);
  }
  if (grads == nullptr) return parts;

  grads->assign(layers_.size(), {});
  const Eigen::MatrixXd& top = c.hidden[depth_ - 1];
  const Eigen::MatrixXd dscale = 2.0 * scale_err / (3.0 * n);
  (*grads)[depth_] = {dlogits * top.transpose(), dlogits.rowwise().sum()};
  (*grads)[depth_ + 1] = {dscale * top.transpose(), dscale.rowwise().sum()};
  Eigen::MatrixXd dh = layers_[depth_].w.transpose() * dlogits + layers_[depth_ + 1].w.transpose() * dscale;
  for (int l = depth_ - 1; l >= 1; --l) {
    const Eigen::MatrixXd dz = dh.cwiseProduct((c.pre[l].array() > 0.0).cast<double>().matrix());
    (*grads)[l] = {dz * c.hidden[l - 1].transpose(), dz.rowwise().sum()};
    dh += layers_[l].w.transpose() * dz;
  }
  const Eigen::MatrixXd dz0 = dh.cwiseProduct((c.pre[0].array() > 0.0).cast<double>().matrix());
  (*grads)[0] = {dz0 * c.input.transpose(), dz0.rowwise().sum()};
  return parts;
}

Eigen::Index Mlp::parameter_count() const {
  Eigen::Index n = 0;
  for (const auto& l : layers_) n += l.w.size() + l.b.size();
  return n;
}

Eigen::VectorXd Mlp::flatten(const std::vector<Layer>& layers) {
  Eigen::Index n = 0;
  for (const auto& l : layers) n += l.w.size() + l.b.size();
  Eigen::VectorXd flat(n);
  Eigen::Index pos = 0;
  for (const auto& l : layers) {
    flat.segment(pos, l.w.size()) = Eigen::Map<const Eigen::VectorXd>(l.w.data(), l.w.size());
    pos += l.w.size();
    flat.segment(pos, l.b.size()) = l.b;
    pos += l.b.size();
  }
  return flat;
}

Eigen::VectorXd Mlp::flat_parameters() const { return flatten(layers_); }

void Mlp::set_flat_parameters(const Eigen::VectorXd& flat) {
  if (flat.size() != parameter_count()) throw DimensionMismatch("Mlp: parameter vector size mismatch");
  Eigen::Index pos = 0;
  for (auto& l : layers_) {
    Eigen::Map<Eigen::VectorXd>(l.w.data(), l.w.size()) = flat.segment(pos, l.w.size());
    pos += l.w.size();
    l.b = flat.segment(pos, l.b.size());
    pos += l.b.size();
  }
}

namespace {

template <typename T>
void put(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& in, const std::string& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error(path + ": truncated checkpoint");
  return v;
}

void put_doubles(std::ofstream& out, const double* p, Eigen::Index n) {
  out.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
}

void get_doubles(std::ifstream& in, double* p, Eigen::Index n, const std::string& path) {
  in.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw std::runtime_error(path + ": truncated checkpoint");
}

}  // namespace

void Mlp::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path);
  out.write(kMagic, sizeof(kMagic));
  put(out, kVersion);
  put(out, static_cast<std::uint32_t>(input_dim_));
  put(out, static_cast<std::uint32_t>(width_));
  put(out, static_cast<std::uint32_t>(depth_));
  put(out, static_cast<std::uint32_t>(bins_));
  put(out, static_cast<std::uint32_t>(epochs_done));
  put(out, static_cast<std::uint64_t>(adam_step));
  put(out, static_cast<std::uint64_t>(loss_history.size()));
  put_doubles(out, mean_.data(), mean_.size());
  put_doubles(out, inv_std_.data(), inv_std_.size());
  for (const auto* set : {&layers_, &adam_m, &adam_v}) {
    for (const auto& l : *set) {
      put_doubles(out, l.w.data(), l.w.size());
      put_doubles(out, l.b.data(), l.b.size());
    }
  }
  put_doubles(out, loss_history.data(), static_cast<Eigen::Index>(loss_history.size()));
  if (!out) throw std::runtime_error("failed writing checkpoint " + path);
}

Mlp Mlp::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(magic)) != 0) throw std::runtime_error(path + ": not a checkpoint");
  if (get<std::uint32_t>(in, path) != kVersion) throw std::runtime_error(path + ": unsupported checkpoint version");
  PredictorConfig cfg;
  const int input_dim = static_cast<int>(get<std::uint32_t>(in, path));
  cfg.hidden_width = static_cast<int>(get<std::uint32_t>(in, path));
  cfg.hidden_layers = static_cast<int>(get<std::uint32_t>(in, path));
  cfg.bins = static_cast<int>(get<std::uint32_t>(in, path));
  Mlp m(input_dim, cfg);
  m.epochs_done = static_cast<int>(get<std::uint32_t>(in, path));
  m.adam_step = get<std::uint64_t>(in, path);
  const auto history = get<std::uint64_t>(in, path);
  get_doubles(in, m.mean_.data(), m.mean_.size(), path);
  get_doubles(in, m.inv_std_.data(), m.inv_std_.size(), path);
  for (auto* set : {&m.layers_, &m.adam_m, &m.adam_v}) {
    for (auto& l : *set) {
      get_doubles(in, l.w.data(), l.w.size(), path);
      get_doubles(in, l.b.data(), l.b.size(), path);
    }
  }
  m.loss_history.resize(history);
  get_doubles(in, m.loss_history.data(), static_cast<Eigen::Index>(history), path);
  return m;
}

namespace {

void check_training_set(const Mlp& model, const TrainingSet& data) {
  if (data.size() == 0) throw std::invalid_argument("train: empty dataset");
  if (data.features.rows() != model.input_dim()) {
    throw DimensionMismatch("train: dataset feature dimension " + std::to_string(data.features.rows()) +
                            " does not match model input " + std::to_string(model.input_dim()));
  }
}

}  // namespace

std::vector<double> train(Mlp& model, const TrainingSet& data, const PredictorConfig& cfg,
                          const TrainCallbacks& callbacks) {
  return train(model, [&data](int) -> const TrainingSet& { return data; }, cfg, callbacks);
}

std::vector<double> train(Mlp& model, const EpochData& epoch_data, const PredictorConfig& cfg,
                          const TrainCallbacks& callbacks) {
  cfg.validate();
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  std::vector<Eigen::Index> order;
  std::vector<double> history;
  std::vector<Mlp::Layer> grads;

  for (int e = 0; e < cfg.epochs; ++e) {
    const int epoch = model.epochs_done;
    const TrainingSet& data = epoch_data(epoch);
    check_training_set(model, data);
    if (model.adam_step == 0 && model.epochs_done == 0) {
      model.fit_normalization(data.features);
      model.layers().back().b = data.scales.rowwise().mean();
    }
    const Eigen::Index dim = data.features.rows();
    order.resize(static_cast<std::size_t>(data.size()));
    const double lr = cfg.learning_rate * std::pow(0.5, epoch / cfg.lr_halving_period);
    // Seeded per epoch so a resumed run shuffles exactly like an uninterrupted one.
    std::mt19937_64 rng(cfg.seed ^ (0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(epoch + 1)));
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    double sum = 0.0;
    Eigen::Index seen = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const auto b = static_cast<Eigen::Index>(end - start);
      Eigen::MatrixXd x(dim, b), y(6, b), s(3, b);
      for (Eigen::Index j = 0; j < b; ++j) {
        const Eigen::Index src = order[start + static_cast<std::size_t>(j)];
        x.col(j) = data.features.col(src);
        y.col(j) = data.coords.col(src);
        s.col(j) = data.scales.col(src);
      }
      const LossParts parts = model.loss(x, y, s, cfg.loss, &grads);
      if (!std::isfinite(parts.total())) {
        throw TrainingDiverged("non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                               std::to_string(model.adam_step));
      }
      sum += parts.total() * static_cast<double>(b);
      seen += b;
      ++model.adam_step;
      const double c1 = 1.0 - std::pow(beta1, static_cast<double>(model.adam_step));
      const double c2 = 1.0 - std::pow(beta2, static_cast<double>(model.adam_step));
      auto& layers = model.layers();
      for (std::size_t l = 0; l < layers.size(); ++l) {
        auto& m = model.adam_m[l];
        auto& v = model.adam_v[l];
        m.w = beta1 * m.w + (1.0 - beta1) * grads[l].w;
        v.w = beta2 * v.w + (1.0 - beta2) * grads[l].w.cwiseAbs2();
        m.b = beta1 * m.b + (1.0 - beta1) * grads[l].b;
        v.b = beta2 * v.b + (1.0 - beta2) * grads[l].b.cwiseAbs2();
        layers[l].w.array() -= lr * (m.w.array() / c1) / ((v.w.array() / c2).sqrt() + eps);
        layers[l].b.array() -= lr * (m.b.array() / c1) / ((v.b.array() / c2).sqrt() + eps);
      }
    }
    const double mean = sum / static_cast<double>(seen);
    history.push_back(mean);
    model.loss_history.push_back(mean);
    ++model.epochs_done;
    if (callbacks.on_epoch) callbacks.on_epoch(epoch, mean, lr);
  }
  return history;
}

std::vector<CanonicalPrediction> MlpPredictor::predict(std::span<const TupleSample> tuples) const {
  if (tuples.empty()) return {};
  Eigen::MatrixXd x(model_.input_dim(), static_cast<Eigen::Index>(tuples.size()));
  for (std::size_t i = 0; i < tuples.size(); ++i) {
    if (tuples[i].feature.size() != model_.input_dim()) {
      throw DimensionMismatch("predict: expected feature dimension " + std::to_string(model_.input_dim()) + ", got " +
                              std::to_string(tuples[i].feature.size()));
    }
    x.col(static_cast<Eigen::Index>(i)) = tuples[i].feature;
  }
  return model_.forward(x);
}

}  // namespace cppf
