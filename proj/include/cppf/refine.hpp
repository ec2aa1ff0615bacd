#pragma once

#include "cppf/geometry.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cppf {

/// Observed camera-frame point and its metric canonical target.
struct Correspondence {
  Vec3 camera;
  Vec3 canonical;
};

struct RefineConfig {
  double learning_rate = 1e-2;
  int iterations = 100;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  void validate() const;
};

struct RefineResult {
  Pose9D pose;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  std::vector<double> loss_trace;
  /// Set when the correspondences were collinear and refinement was skipped.
  bool rank_deficient = false;
};

/// Mean squared alignment residual |R^T (p - t) - q|^2 over correspondences.
double alignment_loss(std::span<const Correspondence> pairs, const Rotation& r, const Vec3& t);

/// Gradient of alignment_loss on the tangent (omega for left perturbation
/// R <- exp(omega) R, then t), as a 6-vector.
Eigen::Matrix<double, 6, 1> alignment_gradient(std::span<const Correspondence> pairs, const Rotation& r, const Vec3& t);

/// Adam on the se(3) tangent with exponential-map retraction; scale is held
/// at `initial.scale`. Returns the best iterate seen.
RefineResult refine(std::span<const Correspondence> pairs, const Pose9D& initial, const RefineConfig& cfg = {});

/// Least-squares rigid alignment mapping canonical targets onto camera points
/// (SVD Procrustes with determinant correction). Optional per-pair weights.
/// Throws GeometryError for fewer than three or collinear points.
Pose9D closed_form_align(std::span<const Correspondence> pairs, std::span<const double> weights = {},
                         const Vec3& scale = Vec3::Ones());

/// True when the camera points span at least a plane.
bool correspondences_well_posed(std::span<const Correspondence> pairs);

void write_loss_trace_csv(const std::string& path, const std::vector<double>& trace);

}  // namespace cppf
