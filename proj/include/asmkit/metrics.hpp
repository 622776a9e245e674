#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "asmkit/error.hpp"
#include "asmkit/layout.hpp"
#include "asmkit/losses.hpp"
#include "asmkit/shape.hpp"
#include "asmkit/text_io.hpp"

namespace asmkit {

struct EvalConfig {
  std::size_t left_eye_index = 36;
  std::size_t right_eye_index = 45;
  double failure_threshold = 0.1;
  double auc_upper = 0.1;

  /// Outer-eye-corner defaults for an n-point layout.
  static EvalConfig for_points(std::size_t n_points) {
    const auto layout = eye_layout(n_points);
    EvalConfig c;
    c.left_eye_index = layout.left_outer;
    c.right_eye_index = layout.right_outer;
    return c;
  }

  void validate(std::size_t n_points) const {
    if (left_eye_index == right_eye_index) throw InvalidConfig("eye indices must differ");
    if (left_eye_index >= n_points || right_eye_index >= n_points) {
      throw InvalidConfig("eye index out of range for " + std::to_string(n_points) + " points");
    }
    if (!(failure_threshold > 0.0) || !(auc_upper > 0.0)) throw InvalidConfig("thresholds must be positive");
  }
};

/// Mean point error divided by the ground-truth inter-ocular distance (a fraction, not percent).
inline double nme(const Shape& gt, const Shape& pred, const EvalConfig& config) {
  require_same_size(gt, pred);
  config.validate(gt.n_points());
  const auto l = gt.point(config.left_eye_index);
  const auto r = gt.point(config.right_eye_index);
  const double iod = std::hypot(l.x - r.x, l.y - r.y);
  if (!(iod > 0.0)) throw DegenerateNormalizer("outer eye corners coincide");
  double err = 0.0;
  for (std::size_t i = 0; i < gt.n_points(); ++i) {
    const auto g = gt.point(i);
    const auto p = pred.point(i);
    err += std::hypot(g.x - p.x, g.y - p.y);
  }
  return err / static_cast<double>(gt.n_points()) / iod;
}

/// Percentage of samples whose error strictly exceeds `threshold`.
inline double failure_rate(std::span<const double> nmes, double threshold) {
  if (nmes.empty()) throw EmptyInput("failure_rate of an empty list");
  const auto failed = std::count_if(nmes.begin(), nmes.end(), [&](double e) { return e > threshold; });
  return 100.0 * static_cast<double>(failed) / static_cast<double>(nmes.size());
}

struct CedPoint {
  double error = 0.0;
  double fraction = 0.0;
};

/// Empirical CDF at each distinct error value, ascending.
inline std::vector<CedPoint> ced(std::span<const double> nmes) {
  if (nmes.empty()) throw EmptyInput("ced of an empty list");
  std::vector<double> sorted(nmes.begin(), nmes.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<CedPoint> curve;
  const auto total = static_cast<double>(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (i + 1 < sorted.size() && sorted[i + 1] == sorted[i]) continue;
    curve.push_back({sorted[i], static_cast<double>(i + 1) / total});
  }
  return curve;
}

/// Area under the CED step function on [0, upper], divided by upper.
inline double auc(std::span<const double> nmes, double upper) {
  if (!(upper > 0.0)) throw InvalidConfig("auc upper limit must be positive");
  const auto curve = ced(nmes);
  double area = 0.0;
  for (std::size_t k = 0; k < curve.size(); ++k) {
    const double start = std::max(curve[k].error, 0.0);
    if (start >= upper) break;
    const double end = k + 1 < curve.size() ? std::min(curve[k + 1].error, upper) : upper;
    area += curve[k].fraction * (end - start);
  }
  return area / upper;
}

struct PoseMae {
  double yaw = 0.0;
  double pitch = 0.0;
  double roll = 0.0;
};

inline PoseMae pose_mae(std::span<const PoseTriple> gt, std::span<const PoseTriple> pred) {
  if (gt.size() != pred.size()) {
    throw BatchMismatch("pose batch sizes differ: " + std::to_string(gt.size()) + " vs " + std::to_string(pred.size()));
  }
  if (gt.empty()) throw EmptyInput("pose_mae of an empty batch");
  PoseMae m;
  for (std::size_t j = 0; j < gt.size(); ++j) {
    m.yaw += std::abs(pred[j].yaw - gt[j].yaw);
    m.pitch += std::abs(pred[j].pitch - gt[j].pitch);
    m.roll += std::abs(pred[j].roll - gt[j].roll);
  }
  const auto n = static_cast<double>(gt.size());
  m.yaw /= n;
  m.pitch /= n;
  m.roll /= n;
  return m;
}

struct EvalReport {
  std::vector<double> nmes;  // fractions, degenerate samples excluded
  std::size_t degenerate = 0;
  double mean_nme_percent = 0.0;
  double failure_rate_percent = 0.0;
  double auc = 0.0;
  std::vector<CedPoint> ced;
  PoseMae pose;
};

/// Full evaluation. Samples with coincident eye corners are counted in `degenerate`
/// and left out of every landmark statistic.
inline EvalReport evaluate(std::span<const Shape> gt, std::span<const Shape> pred, std::span<const PoseTriple> gt_pose,
                           std::span<const PoseTriple> pred_pose, const EvalConfig& config) {
  if (gt.size() != pred.size()) throw BatchMismatch("ground truth and prediction counts differ");
  if (gt.empty()) throw EmptyInput("nothing to evaluate");
  EvalReport report;
  for (std::size_t j = 0; j < gt.size(); ++j) {
    try {
      report.nmes.push_back(nme(gt[j], pred[j], config));
    } catch (const DegenerateNormalizer&) {
      ++report.degenerate;
    }
  }
  if (report.nmes.empty()) throw EmptyInput("every sample has a degenerate inter-ocular distance");
  double sum = 0.0;
  for (double e : report.nmes) sum += e;
  report.mean_nme_percent = 100.0 * sum / static_cast<double>(report.nmes.size());
  report.failure_rate_percent = failure_rate(report.nmes, config.failure_threshold);
  report.auc = auc(report.nmes, config.auc_upper);
  report.ced = ced(report.nmes);
  report.pose = pose_mae(gt_pose, pred_pose);
  return report;
}

inline std::string ced_csv(std::span<const CedPoint> curve, std::string_view comments = {}) {
  std::string out = text::comment_block(comments);
  out += "error,fraction\n";
  for (const auto& p : curve) out += text::format_double(p.error) + "," + text::format_double(p.fraction) + "\n";
  return out;
}

inline std::string report_csv(const EvalReport& r, std::string_view comments = {}) {
  std::string out = text::comment_block(comments);
  out += "n_samples,n_degenerate,mean_nme_percent,failure_rate_percent,auc,mae_yaw,mae_pitch,mae_roll\n";
  out += std::to_string(r.nmes.size()) + "," + std::to_string(r.degenerate);
  for (double v : {r.mean_nme_percent, r.failure_rate_percent, r.auc, r.pose.yaw, r.pose.pitch, r.pose.roll}) {
    out += "," + text::format_double(v);
  }
  out += "\n";
  return out;
}

}  // namespace asmkit
