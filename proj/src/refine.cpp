#include "cppf/refine.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace cppf {

void RefineConfig::validate() const {
  if (!(learning_rate > 0.0) || iterations < 1) throw std::invalid_argument("RefineConfig: lr and iterations must be positive");
}

double alignment_loss(std::span<const Correspondence> pairs, const Rotation& r, const Vec3& t) {
  if (pairs.empty()) return 0.0;
  const Mat3 rt = r.matrix().transpose();
  double sum = 0.0;
  for (const auto& c : pairs) sum += (rt * (c.camera - t) - c.canonical).squaredNorm();
  return sum / static_cast<double>(pairs.size());
}

Eigen::Matrix<double, 6, 1> alignment_gradient(std::span<const Correspondence> pairs, const Rotation& r,
                                               const Vec3& t) {
  Eigen::Matrix<double, 6, 1> g = Eigen::Matrix<double, 6, 1>::Zero();
  if (pairs.empty()) return g;
  const Mat3& m = r.matrix();
  Vec3 g_rot = Vec3::Zero(), g_trans = Vec3::Zero();
  for (const auto& c : pairs) {
    const Vec3 v = c.camera - t;
    const Vec3 res = m.transpose() * v - c.canonical;
    const Vec3 back = m * res;
    g_rot -= v.cross(back);
    g_trans -= back;
  }
  const double k = 2.0 / static_cast<double>(pairs.size());
  g.head<3>() = k * g_rot;
  g.tail<3>() = k * g_trans;
  return g;
}

bool correspondences_well_posed(std::span<const Correspondence> pairs) {
  if (pairs.size() < 3) return false;
  Vec3 mean = Vec3::Zero();
  for (const auto& c : pairs) mean += c.camera;
  mean /= static_cast<double>(pairs.size());
  Mat3 cov = Mat3::Zero();
  for (const auto& c : pairs) cov += (c.camera - mean) * (c.camera - mean).transpose();
  Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
  const Vec3 ev = eig.eigenvalues();
  return ev(2) > 0.0 && ev(1) > 1e-12 * ev(2);
}

RefineResult refine(std::span<const Correspondence> pairs, const Pose9D& initial, const RefineConfig& cfg) {
  cfg.validate();
  initial.validate();
  RefineResult res;
  res.pose = initial;
  res.initial_loss = alignment_loss(pairs, initial.rotation, initial.translation);
  res.final_loss = res.initial_loss;
  res.loss_trace.push_back(res.initial_loss);
  if (!correspondences_well_posed(pairs)) {
    res.rank_deficient = true;
    return res;
  }

  Rotation r = initial.rotation;
  Vec3 t = initial.translation;
  using Vec6 = Eigen::Matrix<double, 6, 1>;
  Vec6 m = Vec6::Zero(), v = Vec6::Zero();
  for (int it = 1; it <= cfg.iterations; ++it) {
    const Vec6 g = alignment_gradient(pairs, r, t);
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseAbs2();
    const double c1 = 1.0 - std::pow(cfg.beta1, it);
    const double c2 = 1.0 - std::pow(cfg.beta2, it);
    const Vec6 step = -cfg.learning_rate * (m / c1).array() / ((v / c2).array().sqrt() + cfg.epsilon);
    r = so3_exp(step.head<3>()) * r;
    t += step.tail<3>();
    const double loss = alignment_loss(pairs, r, t);
    res.loss_trace.push_back(loss);
    if (loss < res.final_loss) {
      res.final_loss = loss;
      res.pose = Pose9D(r, t, initial.scale);
    }
  }
  return res;
}

Pose9D closed_form_align(std::span<const Correspondence> pairs, std::span<const double> weights, const Vec3& scale) {
  if (pairs.size() < 3) throw GeometryError("closed_form_align: need at least three correspondences");
  if (!weights.empty() && weights.size() != pairs.size()) throw GeometryError("closed_form_align: weight count mismatch");
  if (!correspondences_well_posed(pairs)) throw GeometryError("closed_form_align: degenerate configuration");
  double total = 0.0;
  Vec3 mp = Vec3::Zero(), mq = Vec3::Zero();
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const double w = weights.empty() ? 1.0 : weights[i];
    mp += w * pairs[i].camera;
    mq += w * pairs[i].canonical;
    total += w;
  }
  if (!(total > 0.0)) throw GeometryError("closed_form_align: weights sum to zero");
  mp /= total;
  mq /= total;
  Mat3 h = Mat3::Zero();
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const double w = weights.empty() ? 1.0 : weights[i];
    h += w * (pairs[i].canonical - mq) * (pairs[i].camera - mp).transpose();
  }
  Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  if ((svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0) d(2, 2) = -1.0;
  const Mat3 rot = svd.matrixV() * d * svd.matrixU().transpose();
  const Rotation r = Rotation::nearest(rot);
  return Pose9D(r, mp - r * mq, scale);
}

void write_loss_trace_csv(const std::string& path, const std::vector<double>& trace) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "iteration,loss\n";
  for (std::size_t i = 0; i < trace.size(); ++i) out << i << ',' << trace[i] << '\n';
}

}  // namespace cppf
