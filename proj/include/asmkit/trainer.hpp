#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "asmkit/adam.hpp"
#include "asmkit/error.hpp"
#include "asmkit/losses.hpp"
#include "asmkit/metrics.hpp"
#include "asmkit/regressor.hpp"
#include "asmkit/shape_model.hpp"
#include "asmkit/synthetic.hpp"
#include "asmkit/text_io.hpp"

namespace asmkit {

enum class LossKind {
  asm_assisted,  // L_mse + alpha(epoch) * L_asm
  mse_only,      // alpha fixed at 0
};

inline std::string_view to_string(LossKind k) { return k == LossKind::asm_assisted ? "asm" : "mse"; }

inline LossKind parse_loss_kind(std::string_view s) {
  if (s == "asm") return LossKind::asm_assisted;
  if (s == "mse") return LossKind::mse_only;
  throw InvalidConfig("unknown loss '" + std::string(s) + "' (expected asm or mse)");
}

struct TrainOptions {
  LossKind loss = LossKind::asm_assisted;
  double validation_fraction = 0.1;
  std::optional<EvalConfig> eval;  // defaults to EvalConfig::for_points(n)
};

struct EpochRecord {
  std::size_t epoch = 0;
  double alpha = 0.0;
  LossReport train;
  double val_nme = std::numeric_limits<double>::quiet_NaN();  // percent
  double seconds = 0.0;
};

struct TrainingHistory {
  LossReport initial;  // training-set losses before the first update
  std::vector<EpochRecord> epochs;
  std::size_t train_samples = 0;
  std::size_t validation_samples = 0;
  std::size_t smoothed_shapes = 0;  // asm_transform evaluations in this run
};

/// Column-major views of a record subset, ready for batching.
struct TrainingMatrices {
  Eigen::MatrixXd observations;  // 2n x N
  Eigen::MatrixXd ground_truth;  // 2n x N
  Eigen::MatrixXd smoothed;      // 2n x N
  std::vector<PoseTriple> poses;
};

namespace detail {

inline void copy_column(Eigen::MatrixXd& dst, Eigen::Index col, std::span<const double> src) {
  dst.col(col) = Eigen::Map<const Eigen::VectorXd>(src.data(), static_cast<Eigen::Index>(src.size()));
}

inline LandmarkBatch gather(const Eigen::MatrixXd& src, std::span<const std::size_t> idx, BatchRole role) {
  LandmarkBatch b;
  b.role = role;
  b.coords.resize(src.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) b.coords.col(static_cast<Eigen::Index>(k)) = src.col(static_cast<Eigen::Index>(idx[k]));
  return b;
}

inline std::vector<PoseTriple> to_poses(const Eigen::Matrix3Xd& m) {
  std::vector<PoseTriple> out(static_cast<std::size_t>(m.cols()));
  for (Eigen::Index j = 0; j < m.cols(); ++j) out[static_cast<std::size_t>(j)] = {m(0, j), m(1, j), m(2, j)};
  return out;
}

inline void fisher_yates(std::vector<std::size_t>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(v[i - 1], v[pick(rng)]);
  }
}

constexpr std::uint64_t kValidationSalt = 0x9E3779B97F4A7C15ULL;

}  // namespace detail

/// Runs the regressor over every column and evaluates the loss stack on the whole set.
inline LossReport evaluate_training_loss(const Regressor& reg, const TrainingMatrices& data, double alpha,
                                         const LossWeights& weights) {
  const auto cache = forward_batch(reg, data.observations);
  const LandmarkBatch gt{BatchRole::ground_truth, data.ground_truth};
  const LandmarkBatch sm{BatchRole::asm_smoothed, data.smoothed};
  const LandmarkBatch pred{BatchRole::predicted, cache.landmarks};
  const auto poses = detail::to_poses(cache.pose);
  return evaluate_losses(gt, sm, pred, data.poses, poses, alpha, weights);
}

/// Mean NME (percent) of the regressor's landmark predictions.
inline double mean_nme_percent(const Regressor& reg, std::span<const DatasetRecord* const> records,
                               const EvalConfig& config) {
  if (records.empty()) return std::numeric_limits<double>::quiet_NaN();
  Eigen::MatrixXd obs(static_cast<Eigen::Index>(reg.config().input_dim()), static_cast<Eigen::Index>(records.size()));
  for (std::size_t j = 0; j < records.size(); ++j) detail::copy_column(obs, static_cast<Eigen::Index>(j), records[j]->observation);
  const auto cache = forward_batch(reg, obs);
  double sum = 0.0;
  std::size_t used = 0;
  for (std::size_t j = 0; j < records.size(); ++j) {
    const auto col = cache.landmarks.col(static_cast<Eigen::Index>(j));
    try {
      sum += nme(records[j]->gt_shape, Shape(std::vector<double>(col.data(), col.data() + col.size())), config);
      ++used;
    } catch (const DegenerateNormalizer&) {
    }
  }
  return used > 0 ? 100.0 * sum / static_cast<double>(used) : std::numeric_limits<double>::quiet_NaN();
}

/// Curriculum training of the reference regressor.
///
/// The training split is divided once (seeded) into a fitting part and a 10%
/// validation part. ASM targets for the fitting part are computed once up front.
/// Each epoch uses alpha_schedule(epoch, epochs) (or 0 for LossKind::mse_only), a
/// Fisher-Yates permutation seeded with seed ^ epoch, and one Adam step per batch;
/// the last partial batch is kept.
inline std::pair<Regressor, TrainingHistory> train(const Dataset& dataset, const ShapeModel& shape_model,
                                                   const RegressorConfig& regressor_config,
                                                   const OptimizerConfig& optimizer_config,
                                                   const LossWeights& weights, std::uint64_t seed,
                                                   const TrainOptions& options = {}) {
  optimizer_config.validate();
  weights.validate();
  regressor_config.validate();
  if (regressor_config.n_points != dataset.n_points) {
    throw DimensionMismatch("regressor expects " + std::to_string(regressor_config.n_points) + " points, dataset has " +
                            std::to_string(dataset.n_points));
  }
  if (shape_model.n_points() != dataset.n_points) {
    throw ShapeMismatch("shape model has " + std::to_string(shape_model.n_points()) + " points, dataset has " +
                        std::to_string(dataset.n_points));
  }
  if (!(options.validation_fraction >= 0.0 && options.validation_fraction < 1.0)) {
    throw InvalidConfig("validation_fraction must lie in [0, 1)");
  }
  const EvalConfig eval = options.eval.value_or(EvalConfig::for_points(dataset.n_points));
  eval.validate(dataset.n_points);

  auto train_records = dataset.split(Split::train);
  if (train_records.empty()) throw EmptyDataset("dataset has no training records");

  // Seeded validation split, fixed before training.
  std::vector<std::size_t> order(train_records.size());
  std::iota(order.begin(), order.end(), 0);
  {
    std::mt19937_64 rng(seed ^ detail::kValidationSalt);
    detail::fisher_yates(order, rng);
  }
  const auto n_val = static_cast<std::size_t>(std::floor(options.validation_fraction * static_cast<double>(order.size())));
  if (n_val >= order.size()) throw EmptyDataset("validation split leaves no training records");
  std::vector<const DatasetRecord*> val_records, fit_records;
  for (std::size_t k = 0; k < order.size(); ++k) (k < n_val ? val_records : fit_records).push_back(train_records[order[k]]);
  // Keep the fitting set in dataset order so only the per-epoch shuffle decides batches.
  std::sort(fit_records.begin(), fit_records.end());

  const auto n = static_cast<Eigen::Index>(fit_records.size());
  const auto dim = static_cast<Eigen::Index>(2 * dataset.n_points);
  TrainingMatrices data;
  data.observations.resize(dim, n);
  data.ground_truth.resize(dim, n);
  data.smoothed.resize(dim, n);
  data.poses.resize(fit_records.size());
  TrainingHistory history;
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto& r = *fit_records[static_cast<std::size_t>(j)];
    if (r.observation.size() != static_cast<std::size_t>(dim)) throw DimensionMismatch("record observation has the wrong size");
    detail::copy_column(data.observations, j, r.observation);
    detail::copy_column(data.ground_truth, j, r.gt_shape.coords());
    detail::copy_column(data.smoothed, j, asm_transform(shape_model, r.gt_shape).coords());
    ++history.smoothed_shapes;
    data.poses[static_cast<std::size_t>(j)] = r.pose;
  }
  history.train_samples = fit_records.size();
  history.validation_samples = val_records.size();

  Regressor reg = init_regressor(regressor_config, seed);
  AdamState adam(reg.params().size());
  const auto epochs = optimizer_config.epochs;
  auto alpha_for = [&](std::size_t e) {
    return options.loss == LossKind::mse_only
               ? 0.0
               : alpha_schedule(static_cast<std::int64_t>(e), static_cast<std::int64_t>(epochs));
  };
  history.initial = evaluate_training_loss(reg, data, alpha_for(0), weights);

  std::vector<std::size_t> perm(fit_records.size());
  for (std::size_t e = 0; e < epochs; ++e) {
    const auto started = std::chrono::steady_clock::now();
    const double alpha = alpha_for(e);
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 rng(seed ^ static_cast<std::uint64_t>(e));
    detail::fisher_yates(perm, rng);

    double sum_mse = 0.0, sum_asm = 0.0, sum_pose = 0.0;
    for (std::size_t start = 0; start < perm.size(); start += optimizer_config.batch_size) {
      const auto stop = std::min(perm.size(), start + optimizer_config.batch_size);
      const std::span<const std::size_t> idx(perm.data() + start, stop - start);
      const auto gt = detail::gather(data.ground_truth, idx, BatchRole::ground_truth);
      const auto sm = detail::gather(data.smoothed, idx, BatchRole::asm_smoothed);
      const auto obs = detail::gather(data.observations, idx, BatchRole::ground_truth);
      std::vector<PoseTriple> gt_pose(idx.size());
      for (std::size_t k = 0; k < idx.size(); ++k) gt_pose[k] = data.poses[idx[k]];

      const auto cache = forward_batch(reg, obs.coords);
      const LandmarkBatch pred{BatchRole::predicted, cache.landmarks};
      const auto pred_pose = detail::to_poses(cache.pose);
      const auto report = evaluate_losses(gt, sm, pred, gt_pose, pred_pose, alpha, weights);
      const auto bsz = static_cast<double>(idx.size());
      sum_mse += report.l_mse * bsz;
      sum_asm += report.l_asm * bsz;
      sum_pose += report.l_pose * bsz;

      const auto grads = loss_gradients(gt, sm, pred, gt_pose, pred_pose, alpha, weights);
      const auto param_grads = backward_batch(reg, cache, grads.landmarks, grads.pose);
      adam_step(adam, reg.params(), param_grads, optimizer_config);
    }

    EpochRecord rec;
    rec.epoch = e;
    rec.alpha = alpha;
    const auto total = static_cast<double>(perm.size());
    rec.train.l_mse = sum_mse / total;
    rec.train.l_asm = sum_asm / total;
    rec.train.l_pose = sum_pose / total;
    rec.train.l_facial = rec.train.l_mse + alpha * rec.train.l_asm;
    rec.train.l_total = loss_total(rec.train.l_facial, rec.train.l_pose, weights);
    rec.train.alpha_used = alpha;
    rec.val_nme = mean_nme_percent(reg, val_records, eval);
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    history.epochs.push_back(rec);
  }
  return {std::move(reg), std::move(history)};
}

/// History as CSV. With `include_time` false the seconds column is written as 0
/// so that repeated runs produce identical files.
inline std::string history_csv(const TrainingHistory& history, bool include_time, std::string_view comments = {}) {
  std::string out = text::comment_block(comments);
  out += "epoch,alpha,l_mse,l_asm,l_facial,l_pose,l_total,val_nme,seconds\n";
  for (const auto& e : history.epochs) {
    out += std::to_string(e.epoch);
    for (double v : {e.alpha, e.train.l_mse, e.train.l_asm, e.train.l_facial, e.train.l_pose, e.train.l_total, e.val_nme,
                     include_time ? e.seconds : 0.0}) {
      out += ',';
      out += text::format_double(v);
    }
    out += '\n';
  }
  return out;
}

/// Metrics suite over `records` using the regressor's predictions.
inline EvalReport evaluate_regressor(const Regressor& reg, std::span<const DatasetRecord* const> records,
                                     const EvalConfig& config) {
  if (records.empty()) throw EmptyInput("no records to evaluate");
  Eigen::MatrixXd obs(static_cast<Eigen::Index>(reg.config().input_dim()), static_cast<Eigen::Index>(records.size()));
  for (std::size_t j = 0; j < records.size(); ++j) detail::copy_column(obs, static_cast<Eigen::Index>(j), records[j]->observation);
  const auto cache = forward_batch(reg, obs);
  std::vector<Shape> gt, pred;
  std::vector<PoseTriple> gt_pose;
  for (std::size_t j = 0; j < records.size(); ++j) {
    const auto col = cache.landmarks.col(static_cast<Eigen::Index>(j));
    gt.push_back(records[j]->gt_shape);
    pred.emplace_back(std::vector<double>(col.data(), col.data() + col.size()));
    gt_pose.push_back(records[j]->pose);
  }
  const auto pred_pose = detail::to_poses(cache.pose);
  return evaluate(gt, pred, gt_pose, pred_pose, config);
}

struct GradientCheckOptions {
  std::vector<std::size_t> hidden_widths{8};
  std::size_t n_points = 5;
  std::size_t batch = 4;
  double alpha = 2.0;
  LossWeights weights{};
  double step = 1e-5;
};

struct GradientCheckReport {
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  std::size_t parameters = 0;
  double max_pose_head_gradient = 0.0;  // largest |analytic| over pose-head parameters
};

/// Compares the analytic parameter gradient of loss_total against central finite
/// differences over every parameter of a small random problem. Relative error is
/// |a - f| / max(|a|, |f|, 1e-8).
inline GradientCheckReport gradient_check(const GradientCheckOptions& opts, std::uint64_t seed) {
  if (opts.n_points > 8 || std::any_of(opts.hidden_widths.begin(), opts.hidden_widths.end(), [](auto w) { return w > 16; })) {
    throw InvalidConfig("gradient_check is limited to n <= 8 and hidden widths <= 16");
  }
  RegressorConfig rc{opts.n_points, opts.hidden_widths};
  Regressor reg = init_regressor(rc, seed);
  const auto dim = static_cast<Eigen::Index>(rc.input_dim());
  const auto batch = static_cast<Eigen::Index>(opts.batch);

  std::mt19937_64 rng(seed + 1);
  std::normal_distribution<double> normal(0.0, 1.0);
  // Non-zero biases so the check also exercises them.
  for (const auto& l : reg.layers()) {
    auto b = reg.bias(l);
    for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = 0.1 * normal(rng);
  }
  Eigen::MatrixXd obs(dim, batch), gt(dim, batch), sm(dim, batch);
  std::vector<PoseTriple> gt_pose(opts.batch);
  for (Eigen::Index j = 0; j < batch; ++j) {
    for (Eigen::Index i = 0; i < dim; ++i) {
      gt(i, j) = normal(rng);
      sm(i, j) = gt(i, j) + 0.3 * normal(rng);
      obs(i, j) = gt(i, j) + 0.1 * normal(rng);
    }
    gt_pose[static_cast<std::size_t>(j)] = {5.0 * normal(rng), 5.0 * normal(rng), 5.0 * normal(rng)};
  }
  const LandmarkBatch gt_b{BatchRole::ground_truth, gt};
  const LandmarkBatch sm_b{BatchRole::asm_smoothed, sm};

  auto total_loss = [&](const Regressor& r) {
    const auto cache = forward_batch(r, obs);
    const LandmarkBatch pred{BatchRole::predicted, cache.landmarks};
    const auto pp = detail::to_poses(cache.pose);
    return evaluate_losses(gt_b, sm_b, pred, gt_pose, pp, opts.alpha, opts.weights).l_total;
  };

  const auto cache = forward_batch(reg, obs);
  const LandmarkBatch pred{BatchRole::predicted, cache.landmarks};
  const auto pp = detail::to_poses(cache.pose);
  const auto lg = loss_gradients(gt_b, sm_b, pred, gt_pose, pp, opts.alpha, opts.weights);
  const auto analytic = backward_batch(reg, cache, lg.landmarks, lg.pose);

  GradientCheckReport report;
  report.parameters = analytic.size();
  const auto& ph = reg.pose_head();
  for (std::size_t i = ph.offset; i < ph.end(); ++i) {
    report.max_pose_head_gradient = std::max(report.max_pose_head_gradient, std::abs(analytic[i]));
  }
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double saved = reg.params()[i];
    reg.params()[i] = saved + opts.step;
    const double up = total_loss(reg);
    reg.params()[i] = saved - opts.step;
    const double down = total_loss(reg);
    reg.params()[i] = saved;
    const double numeric = (up - down) / (2.0 * opts.step);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
    const double rel = std::abs(analytic[i] - numeric) / denom;
    if (rel > report.max_relative_error) {
      report.max_relative_error = rel;
      report.worst_index = i;
    }
  }
  return report;
}

}  // namespace asmkit
