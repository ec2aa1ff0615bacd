#pragma once

#include "cppf/geometry.hpp"

#include <optional>
#include <string>
#include <vector>

namespace cppf {

struct PoseError {
  double rot_deg = 0.0;
  double trans_cm = 0.0;
  bool symmetry_applied = false;
};

/// Geodesic rotation error (degrees) and translation error (cm). With a
/// canonical symmetry axis, the error is the minimum over rotations about it,
/// which is the angle between the axis images.
PoseError pose_error(const Pose9D& pred, const Pose9D& gt, const std::optional<Vec3>& symmetry_axis = std::nullopt);

/// IoU estimated on a fixed lattice of about `samples` points over the union's
/// bounding box. Deterministic.
double box_iou(const OrientedBox& a, const OrientedBox& b, int samples = 100000);

/// ADD (or ADD-S when `symmetric`) for canonical model points, in meters.
double add_metric(const Pose9D& pred, const Pose9D& gt, const std::vector<Vec3>& model_points, bool symmetric);

/// Area under the accuracy-vs-threshold curve on [0, max_threshold], normalized to [0, 1].
double auc(const std::vector<double>& values, double max_threshold = 0.10);

/// One evaluated sample; `missing` marks an absent or failed prediction.
struct SampleScore {
  std::string id;
  bool missing = false;
  PoseError error;
  double iou = 0.0;
  double add = 0.0;
  double adds = 0.0;
};

/// Scores a sample. A missing prediction is a miss at every threshold.
SampleScore score_sample(const std::string& id, const std::optional<Pose9D>& pred, const Pose9D& gt,
                         const std::vector<Vec3>& model_points, const std::optional<Vec3>& symmetry_axis,
                         int iou_samples = 100000);

struct ApEntry {
  double rot_deg;
  double trans_cm;
  double value;
};

struct EvalReport {
  std::vector<ApEntry> pose_ap;
  double iou25 = 0.0;
  double iou50 = 0.0;
  double add_auc = 0.0;
  double adds_auc = 0.0;
  std::size_t count = 0;
  std::size_t missing = 0;
};

/// Thresholds reported for n-degree m-cm AP.
const std::vector<double>& ap_rotation_thresholds();
const std::vector<double>& ap_translation_thresholds();

/// Aggregates scores; ordering of the input does not matter.
EvalReport aggregate(const std::vector<SampleScore>& scores);

std::string report_csv(const EvalReport& r);
std::string report_table(const EvalReport& r);
/// Accuracy of ADD and ADD-S at 1 mm steps up to 10 cm.
std::string curve_csv(const std::vector<SampleScore>& scores, double max_threshold = 0.10);

}  // namespace cppf
