#include "cppf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <sstream>

namespace cppf {

namespace {

double rad2deg(double r) { return r * 180.0 / std::numbers::pi; }

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

}  // namespace

PoseError pose_error(const Pose9D& pred, const Pose9D& gt, const std::optional<Vec3>& symmetry_axis) {
  PoseError e;
  if (symmetry_axis) {
    const Vec3 a = symmetry_axis->normalized();
    const Vec3 ap = pred.rotation * a;
    const Vec3 ag = gt.rotation * a;
    e.rot_deg = rad2deg(std::atan2(ap.cross(ag).norm(), ap.dot(ag)));
    e.symmetry_applied = true;
  } else {
    e.rot_deg = rad2deg(rotation_angle(pred.rotation, gt.rotation));
  }
  e.rot_deg = std::clamp(e.rot_deg, 0.0, 180.0);
  e.trans_cm = (pred.translation - gt.translation).norm() * 100.0;
  return e;
}

double box_iou(const OrientedBox& a, const OrientedBox& b, int samples) {
  const auto ca = a.corners();
  const auto cb = b.corners();
  Vec3 lo = ca[0], hi = ca[0];
  for (const auto* set : {&ca, &cb}) {
    for (const auto& c : *set) {
      lo = lo.cwiseMin(c);
      hi = hi.cwiseMax(c);
    }
  }
  const int side = std::max(2, static_cast<int>(std::ceil(std::cbrt(static_cast<double>(samples)))));
  const Vec3 step = (hi - lo) / side;
  long in_a = 0, in_b = 0, both = 0;
  for (int i = 0; i < side; ++i) {
    for (int j = 0; j < side; ++j) {
      for (int k = 0; k < side; ++k) {
        const Vec3 p = lo + step.cwiseProduct(Vec3(i + 0.5, j + 0.5, k + 0.5));
        const bool ia = a.contains(p);
        const bool ib = b.contains(p);
        in_a += ia;
        in_b += ib;
        both += ia && ib;
      }
    }
  }
  const long uni = in_a + in_b - both;
  return uni > 0 ? static_cast<double>(both) / static_cast<double>(uni) : 0.0;
}

double add_metric(const Pose9D& pred, const Pose9D& gt, const std::vector<Vec3>& model_points, bool symmetric) {
  if (model_points.empty()) throw std::invalid_argument("add_metric: no model points");
  std::vector<Vec3> tp, tg;
  tp.reserve(model_points.size());
  tg.reserve(model_points.size());
  for (const auto& x : model_points) {
    tp.push_back(pred.apply(x));
    tg.push_back(gt.apply(x));
  }
  double sum = 0.0;
  if (!symmetric) {
    for (std::size_t i = 0; i < tp.size(); ++i) sum += (tp[i] - tg[i]).norm();
  } else {
    for (const auto& p : tp) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& g : tg) best = std::min(best, (p - g).squaredNorm());
      sum += std::sqrt(best);
    }
  }
  return sum / static_cast<double>(model_points.size());
}

double auc(const std::vector<double>& values, double max_threshold) {
  if (values.empty()) throw std::invalid_argument("auc: no values");
  // Integral of the empirical step CDF: each value contributes the part of
  // [0, max] above it.
  double sum = 0.0;
  for (double v : values) {
    const double clipped = std::isnan(v) ? max_threshold : std::clamp(v, 0.0, max_threshold);
    sum += (max_threshold - clipped) / max_threshold;
  }
  return sum / static_cast<double>(values.size());
}

SampleScore score_sample(const std::string& id, const std::optional<Pose9D>& pred, const Pose9D& gt,
                         const std::vector<Vec3>& model_points, const std::optional<Vec3>& symmetry_axis,
                         int iou_samples) {
  SampleScore s;
  s.id = id;
  if (!pred) {
    s.missing = true;
    s.error = {180.0, std::numeric_limits<double>::infinity(), symmetry_axis.has_value()};
    s.iou = 0.0;
    s.add = s.adds = std::numeric_limits<double>::infinity();
    return s;
  }
  s.error = pose_error(*pred, gt, symmetry_axis);
  s.iou = box_iou(OrientedBox{*pred}, OrientedBox{gt}, iou_samples);
  s.add = add_metric(*pred, gt, model_points, false);
  s.adds = add_metric(*pred, gt, model_points, true);
  return s;
}

const std::vector<double>& ap_rotation_thresholds() {
  static const std::vector<double> v{5.0, 10.0, 15.0};
  return v;
}

const std::vector<double>& ap_translation_thresholds() {
  static const std::vector<double> v{2.0, 5.0, 10.0};
  return v;
}

EvalReport aggregate(const std::vector<SampleScore>& scores) {
  EvalReport r;
  r.count = scores.size();
  if (scores.empty()) return r;
  const double n = static_cast<double>(scores.size());
  for (double deg : ap_rotation_thresholds()) {
    for (double cm : ap_translation_thresholds()) {
      long hits = 0;
      for (const auto& s : scores) hits += (!s.missing && s.error.rot_deg < deg && s.error.trans_cm < cm) ? 1 : 0;
      r.pose_ap.push_back({deg, cm, static_cast<double>(hits) / n});
    }
  }
  long i25 = 0, i50 = 0;
  std::vector<double> add, adds;
  for (const auto& s : scores) {
    i25 += s.iou >= 0.25;
    i50 += s.iou >= 0.5;
    add.push_back(s.add);
    adds.push_back(s.adds);
    r.missing += s.missing;
  }
  r.iou25 = static_cast<double>(i25) / n;
  r.iou50 = static_cast<double>(i50) / n;
  r.add_auc = auc(add);
  r.adds_auc = auc(adds);
  return r;
}

std::string report_csv(const EvalReport& r) {
  std::ostringstream out;
  out << "metric,value\n";
  for (const auto& e : r.pose_ap) {
    out << "AP_" << fixed(e.rot_deg, 0) << "deg_" << fixed(e.trans_cm, 0) << "cm," << fixed(e.value) << '\n';
  }
  out << "IoU25," << fixed(r.iou25) << '\n';
  out << "IoU50," << fixed(r.iou50) << '\n';
  out << "ADD_AUC," << fixed(r.add_auc) << '\n';
  out << "ADDS_AUC," << fixed(r.adds_auc) << '\n';
  out << "count," << r.count << '\n';
  out << "missing," << r.missing << '\n';
  return out.str();
}

std::string report_table(const EvalReport& r) {
  std::ostringstream out;
  out << "samples: " << r.count << " (missing " << r.missing << ")\n";
  out << "pose AP      ";
  for (double cm : ap_translation_thresholds()) out << "  " << fixed(cm, 0) << " cm  ";
  out << '\n';
  for (double deg : ap_rotation_thresholds()) {
    out << "  " << fixed(deg, 0) << (deg < 10 ? " " : "") << " deg    ";
    for (const auto& e : r.pose_ap) {
      if (e.rot_deg == deg) out << "  " << fixed(e.value, 3) << " ";
    }
    out << '\n';
  }
  out << "3D IoU25     " << fixed(r.iou25, 3) << '\n';
  out << "3D IoU50     " << fixed(r.iou50, 3) << '\n';
  out << "ADD AUC      " << fixed(r.add_auc, 3) << '\n';
  out << "ADD-S AUC    " << fixed(r.adds_auc, 3) << '\n';
  return out.str();
}

std::string curve_csv(const std::vector<SampleScore>& scores, double max_threshold) {
  std::ostringstream out;
  out << "threshold_m,add_accuracy,adds_accuracy\n";
  const int steps = static_cast<int>(std::lround(max_threshold / 0.001));
  const double n = std::max<double>(1.0, static_cast<double>(scores.size()));
  for (int i = 0; i <= steps; ++i) {
    const double th = 0.001 * i;
    long a = 0, b = 0;
    for (const auto& s : scores) {
      a += s.add <= th;
      b += s.adds <= th;
    }
    out << fixed(th, 3) << ',' << fixed(a / n) << ',' << fixed(b / n) << '\n';
  }
  return out.str();
}

}  // namespace cppf
