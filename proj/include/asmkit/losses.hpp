#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "asmkit/error.hpp"

namespace asmkit {

enum class BatchRole { ground_truth, predicted, asm_smoothed };

/// N flattened shapes stored column-wise: coords is 2n x N.
struct LandmarkBatch {
  BatchRole role = BatchRole::ground_truth;
  Eigen::MatrixXd coords;

  std::size_t size() const noexcept { return static_cast<std::size_t>(coords.cols()); }
  std::size_t n_points() const noexcept { return static_cast<std::size_t>(coords.rows() / 2); }
};

/// Head pose in degrees.
struct PoseTriple {
  double yaw = 0.0;
  double pitch = 0.0;
  double roll = 0.0;

  friend bool operator==(const PoseTriple&, const PoseTriple&) = default;
};

struct LossWeights {
  double w_facial = 1.0;
  double w_pose = 0.5;

  void validate() const {
    if (!(w_facial >= 0.0) || !(w_pose >= 0.0)) throw InvalidConfig("loss weights must be non-negative");
    if (w_facial == 0.0 && w_pose == 0.0) throw InvalidConfig("loss weights cannot both be zero");
  }
};

struct LossReport {
  double l_mse = 0.0;
  double l_asm = 0.0;
  double l_facial = 0.0;
  double l_pose = 0.0;
  double l_total = 0.0;
  double alpha_used = 0.0;
};

namespace detail {

inline void check_pair(const LandmarkBatch& target, BatchRole target_role, const LandmarkBatch& pred) {
  if (target.role != target_role) throw BatchMismatch("target batch has the wrong role");
  if (pred.role != BatchRole::predicted) throw BatchMismatch("prediction batch must be tagged as predicted");
  if (target.coords.rows() != pred.coords.rows() || target.coords.cols() != pred.coords.cols()) {
    throw BatchMismatch("batch shapes differ: " + std::to_string(target.coords.rows()) + "x" +
                        std::to_string(target.coords.cols()) + " vs " + std::to_string(pred.coords.rows()) + "x" +
                        std::to_string(pred.coords.cols()));
  }
  if (target.coords.cols() == 0) throw BatchMismatch("empty batch");
  if (target.coords.rows() == 0 || target.coords.rows() % 2 != 0) throw BatchMismatch("invalid landmark dimension");
}

// Mean per-point Euclidean distance, summed sample by sample in index order.
inline double mean_point_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const auto n = a.rows() / 2;
  const auto big_n = a.cols();
  double total = 0.0;
  for (Eigen::Index j = 0; j < big_n; ++j) {
    double sample = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double dx = a(2 * i, j) - b(2 * i, j);
      const double dy = a(2 * i + 1, j) - b(2 * i + 1, j);
      sample += std::sqrt(dx * dx + dy * dy);
    }
    total += sample;
  }
  return total / (static_cast<double>(big_n) * static_cast<double>(n));
}

}  // namespace detail

/// Landmark loss: (1/N)(1/n) sum_j sum_i ||G_ij - P_ij||_2 (unsquared distance).
inline double loss_mse(const LandmarkBatch& gt, const LandmarkBatch& pred) {
  detail::check_pair(gt, BatchRole::ground_truth, pred);
  return detail::mean_point_distance(gt.coords, pred.coords);
}

/// Same form as loss_mse against the ASM-smoothed targets.
inline double loss_asm(const LandmarkBatch& smoothed, const LandmarkBatch& pred) {
  detail::check_pair(smoothed, BatchRole::asm_smoothed, pred);
  return detail::mean_point_distance(smoothed.coords, pred.coords);
}

/// Curriculum weight of the ASM term: 2, then 1, then 0.5 over thirds of training.
/// Intervals are lower-bound inclusive and compared exactly in integers.
inline double alpha_schedule(std::int64_t epoch, std::int64_t total_epochs) {
  if (total_epochs < 1) throw EpochOutOfRange("total_epochs must be positive");
  if (epoch < 0 || epoch >= total_epochs) {
    throw EpochOutOfRange("epoch " + std::to_string(epoch) + " outside [0, " + std::to_string(total_epochs) + ")");
  }
  if (3 * epoch < total_epochs) return 2.0;
  if (3 * epoch < 2 * total_epochs) return 1.0;
  return 0.5;
}

struct FacialLoss {
  double value = 0.0;
  double l_mse = 0.0;
  double l_asm = 0.0;
};

inline FacialLoss loss_facial(const LandmarkBatch& gt, const LandmarkBatch& smoothed, const LandmarkBatch& pred,
                              double alpha) {
  if (!(alpha >= 0.0)) throw InvalidConfig("alpha must be non-negative");
  FacialLoss f;
  f.l_mse = loss_mse(gt, pred);
  f.l_asm = loss_asm(smoothed, pred);
  f.value = f.l_mse + alpha * f.l_asm;
  return f;
}

inline double loss_pose(std::span<const PoseTriple> gt, std::span<const PoseTriple> pred) {
  if (gt.size() != pred.size()) {
    throw BatchMismatch("pose batch sizes differ: " + std::to_string(gt.size()) + " vs " + std::to_string(pred.size()));
  }
  if (gt.empty()) throw BatchMismatch("empty pose batch");
  double total = 0.0;
  for (std::size_t j = 0; j < gt.size(); ++j) {
    const double dy = pred[j].yaw - gt[j].yaw;
    const double dp = pred[j].pitch - gt[j].pitch;
    const double dr = pred[j].roll - gt[j].roll;
    total += (dy * dy + dp * dp + dr * dr) / 3.0;
  }
  return total / static_cast<double>(gt.size());
}

inline double loss_total(double l_facial, double l_pose, const LossWeights& weights) {
  return weights.w_facial * l_facial + weights.w_pose * l_pose;
}

/// Evaluates the whole stack and packs it into a report.
inline LossReport evaluate_losses(const LandmarkBatch& gt, const LandmarkBatch& smoothed, const LandmarkBatch& pred,
                                  std::span<const PoseTriple> gt_pose, std::span<const PoseTriple> pred_pose,
                                  double alpha, const LossWeights& weights) {
  const auto facial = loss_facial(gt, smoothed, pred, alpha);
  LossReport r;
  r.l_mse = facial.l_mse;
  r.l_asm = facial.l_asm;
  r.l_facial = facial.value;
  r.l_pose = loss_pose(gt_pose, pred_pose);
  r.l_total = loss_total(r.l_facial, r.l_pose, weights);
  r.alpha_used = alpha;
  return r;
}

struct LossGradients {
  Eigen::MatrixXd landmarks;  // 2n x N
  Eigen::Matrix3Xd pose;      // rows: yaw, pitch, roll
};

/// Analytic gradient of loss_total with respect to the predicted landmarks and poses.
/// A point that coincides with its target contributes a zero subgradient.
inline LossGradients loss_gradients(const LandmarkBatch& gt, const LandmarkBatch& smoothed, const LandmarkBatch& pred,
                                    std::span<const PoseTriple> gt_pose, std::span<const PoseTriple> pred_pose,
                                    double alpha, const LossWeights& weights) {
  detail::check_pair(gt, BatchRole::ground_truth, pred);
  detail::check_pair(smoothed, BatchRole::asm_smoothed, pred);
  if (gt_pose.size() != pred_pose.size() || gt_pose.size() != pred.size()) {
    throw BatchMismatch("pose batch size does not match landmark batch size");
  }

  const auto n = pred.coords.rows() / 2;
  const auto big_n = pred.coords.cols();
  const double scale = weights.w_facial / (static_cast<double>(big_n) * static_cast<double>(n));

  LossGradients g;
  g.landmarks.setZero(pred.coords.rows(), big_n);
  for (Eigen::Index j = 0; j < big_n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double px = pred.coords(2 * i, j), py = pred.coords(2 * i + 1, j);
      double gx = 0.0, gy = 0.0;
      const double dgx = px - gt.coords(2 * i, j), dgy = py - gt.coords(2 * i + 1, j);
      const double dg = std::sqrt(dgx * dgx + dgy * dgy);
      if (dg > 0.0) {
        gx += dgx / dg;
        gy += dgy / dg;
      }
      const double dax = px - smoothed.coords(2 * i, j), day = py - smoothed.coords(2 * i + 1, j);
      const double da = std::sqrt(dax * dax + day * day);
      if (da > 0.0 && alpha != 0.0) {
        gx += alpha * dax / da;
        gy += alpha * day / da;
      }
      g.landmarks(2 * i, j) = scale * gx;
      g.landmarks(2 * i + 1, j) = scale * gy;
    }
  }

  g.pose.resize(3, big_n);
  const double pose_scale = weights.w_pose * 2.0 / (3.0 * static_cast<double>(big_n));
  for (Eigen::Index j = 0; j < big_n; ++j) {
    const auto& p = pred_pose[static_cast<std::size_t>(j)];
    const auto& t = gt_pose[static_cast<std::size_t>(j)];
    g.pose(0, j) = pose_scale * (p.yaw - t.yaw);
    g.pose(1, j) = pose_scale * (p.pitch - t.pitch);
    g.pose(2, j) = pose_scale * (p.roll - t.roll);
  }
  return g;
}

}  // namespace asmkit
