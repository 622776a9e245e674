#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "asmkit/error.hpp"
#include "asmkit/shape.hpp"
#include "asmkit/text_io.hpp"

namespace asmkit {

enum class FrameMode { raw, aligned };

inline std::string_view to_string(FrameMode m) { return m == FrameMode::raw ? "raw" : "aligned"; }

inline FrameMode parse_frame_mode(std::string_view s) {
  if (s == "raw") return FrameMode::raw;
  if (s == "aligned") return FrameMode::aligned;
  throw InvalidConfig("unknown frame mode '" + std::string(s) + "' (expected raw or aligned)");
}

/// Point distribution model: mean shape plus t orthonormal modes with their variances.
struct ShapeModel {
  Eigen::VectorXd mean;         // 2n
  Eigen::MatrixXd components;   // t x 2n, orthonormal rows
  Eigen::VectorXd eigenvalues;  // t, positive, non-increasing
  FrameMode mode = FrameMode::raw;
  double total_variance = 0.0;  // sum of all positive eigenvalues; not serialized

  std::size_t n_points() const noexcept { return static_cast<std::size_t>(mean.size() / 2); }
  std::size_t t() const noexcept { return static_cast<std::size_t>(components.rows()); }

  Shape mean_shape() const { return Shape(std::vector<double>(mean.data(), mean.data() + mean.size())); }

  /// Fraction of total variance carried by the retained modes (1 when unknown).
  double retained_fraction() const {
    return total_variance > 0.0 ? eigenvalues.sum() / total_variance : 1.0;
  }
};

struct ShapeParams {
  Eigen::VectorXd b;
};

/// Either a cumulative variance fraction in (0, 1] or an explicit component count.
struct Retention {
  static Retention fraction(double f) { return Retention{f, 0}; }
  static Retention components(std::size_t t) { return Retention{0.0, t}; }

  double variance_fraction = 0.95;
  std::size_t count = 0;  // nonzero => explicit t
};

namespace detail {

inline Eigen::Map<const Eigen::VectorXd> as_vector(const Shape& s) {
  return {s.flat().data(), static_cast<Eigen::Index>(s.dim())};
}

inline Shape to_shape(const Eigen::VectorXd& v) {
  return Shape(std::vector<double>(v.data(), v.data() + v.size()));
}

inline void require_model_size(const ShapeModel& model, const Shape& shape) {
  if (shape.n_points() != model.n_points()) {
    throw ShapeMismatch("shape has " + std::to_string(shape.n_points()) + " points, model expects " +
                        std::to_string(model.n_points()));
  }
}

inline void require_param_size(const ShapeModel& model, const ShapeParams& params) {
  if (static_cast<std::size_t>(params.b.size()) != model.t()) {
    throw ParamMismatch("parameter vector has length " + std::to_string(params.b.size()) + ", model has t = " +
                        std::to_string(model.t()));
  }
}

}  // namespace detail

/// Builds the PCA shape model. In aligned mode the shapes are Procrustes-aligned first.
inline ShapeModel build_shape_model(std::span<const Shape> shapes, Retention retention,
                                    FrameMode mode = FrameMode::raw) {
  if (shapes.size() < 2) throw InsufficientData("need at least 2 shapes to build a model, got " + std::to_string(shapes.size()));
  for (const auto& s : shapes) require_same_size(shapes.front(), s);
  if (retention.count == 0 && !(retention.variance_fraction > 0.0 && retention.variance_fraction <= 1.0)) {
    throw InvalidConfig("variance fraction must lie in (0, 1]");
  }

  std::vector<Shape> aligned_storage;
  std::span<const Shape> input = shapes;
  if (mode == FrameMode::aligned) {
    aligned_storage = align_shapes(shapes).aligned;
    input = aligned_storage;
  }

  const auto k = static_cast<Eigen::Index>(input.size());
  const auto dim = static_cast<Eigen::Index>(input.front().dim());
  Eigen::MatrixXd data(k, dim);
  for (Eigen::Index r = 0; r < k; ++r) data.row(r) = detail::as_vector(input[static_cast<std::size_t>(r)]).transpose();

  ShapeModel model;
  model.mode = mode;
  model.mean = data.colwise().mean().transpose();
  const Eigen::MatrixXd centered = data.rowwise() - model.mean.transpose();
  const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(k - 1);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw Error("eigendecomposition of the shape covariance failed");

  // Eigen returns ascending order; walk from the top.
  const Eigen::VectorXd& evals = solver.eigenvalues();
  const double largest = evals(dim - 1);
  std::vector<Eigen::Index> positive;
  double total = 0.0;
  for (Eigen::Index i = dim - 1; i >= 0; --i) {
    const double lambda = evals(i);
    if (!(largest > 0.0) || lambda <= 1e-12 * largest) break;
    positive.push_back(i);
    total += lambda;
  }

  std::size_t t = 0;
  if (retention.count > 0) {
    if (retention.count > positive.size()) {
      throw RetentionUnsatisfiable("requested t = " + std::to_string(retention.count) + " but only " +
                                   std::to_string(positive.size()) + " components have positive variance");
    }
    t = retention.count;
  } else {
    if (positive.empty()) throw RetentionUnsatisfiable("shape collection has zero variance");
    double cum = 0.0;
    for (std::size_t i = 0; i < positive.size(); ++i) {
      cum += evals(positive[i]);
      t = i + 1;
      if (cum >= retention.variance_fraction * total) break;
    }
  }

  model.components.resize(static_cast<Eigen::Index>(t), dim);
  model.eigenvalues.resize(static_cast<Eigen::Index>(t));
  for (std::size_t i = 0; i < t; ++i) {
    Eigen::VectorXd v = solver.eigenvectors().col(positive[i]);
    // Deterministic sign: first entry that is not numerically zero is positive.
    const double cutoff = 1e-12 * v.cwiseAbs().maxCoeff();
    for (Eigen::Index j = 0; j < v.size(); ++j) {
      if (std::abs(v(j)) > cutoff) {
        if (v(j) < 0.0) v = -v;
        break;
      }
    }
    model.components.row(static_cast<Eigen::Index>(i)) = v.transpose();
    model.eigenvalues(static_cast<Eigen::Index>(i)) = evals(positive[i]);
  }
  model.total_variance = total;
  return model;
}

/// b = P (S - mean), no clamping.
inline ShapeParams project(const ShapeModel& model, const Shape& shape) {
  detail::require_model_size(model, shape);
  return {model.components * (detail::as_vector(shape) - model.mean)};
}

/// Limits every b_i to +-3 sqrt(lambda_i). Entries already inside are untouched.
inline ShapeParams clamp_params(const ShapeModel& model, const ShapeParams& params) {
  detail::require_param_size(model, params);
  ShapeParams out = params;
  for (Eigen::Index i = 0; i < out.b.size(); ++i) {
    const double limit = 3.0 * std::sqrt(model.eigenvalues(i));
    if (out.b(i) > limit) {
      out.b(i) = limit;
    } else if (out.b(i) < -limit) {
      out.b(i) = -limit;
    }
  }
  return out;
}

/// mean + P^T b, in the model frame.
inline Shape reconstruct(const ShapeModel& model, const ShapeParams& params) {
  detail::require_param_size(model, params);
  if (params.b.size() == 0) return model.mean_shape();
  return detail::to_shape(model.mean + model.components.transpose() * params.b);
}

/// The ASM operator: project, clamp, reconstruct. Output is in the input's frame.
inline Shape asm_transform(const ShapeModel& model, const Shape& shape) {
  detail::require_model_size(model, shape);
  if (model.mode == FrameMode::raw) {
    return reconstruct(model, clamp_params(model, project(model, shape)));
  }
  const auto to_model = similarity_fit(shape, model.mean_shape());
  const Shape in_frame = to_model.apply(shape);
  const Shape smoothed = reconstruct(model, clamp_params(model, project(model, in_frame)));
  return to_model.inverse().apply(smoothed);
}

// ---------------------------------------------------------------------------
// ASMMODEL v1 text format

/// Canonical text form. `comments` are emitted as `#` lines after the version line.
inline std::string serialize_model(const ShapeModel& model, std::string_view comments = {}) {
  const auto dim = static_cast<std::size_t>(model.mean.size());
  std::string out = "ASMMODEL v1\n";
  out += text::comment_block(comments);
  out += "mode ";
  out += to_string(model.mode);
  out += "\nn_points " + std::to_string(model.n_points());
  out += "\nn_components " + std::to_string(model.t());
  out += "\nmean";
  text::append_numbers(out, {model.mean.data(), dim});
  out += "\neigenvalues";
  text::append_numbers(out, {model.eigenvalues.data(), model.t()});
  out += '\n';
  for (std::size_t i = 0; i < model.t(); ++i) {
    out += "ev " + std::to_string(i + 1);
    const Eigen::VectorXd row = model.components.row(static_cast<Eigen::Index>(i)).transpose();
    text::append_numbers(out, {row.data(), dim});
    out += '\n';
  }
  return out;
}

inline ShapeModel deserialize_model(std::string_view text_in) {
  const auto all = text::split_lines(text_in);
  if (all.empty() || text::trim(all.front().text) != "ASMMODEL v1") {
    throw FormatError(1, "expected header 'ASMMODEL v1'");
  }
  std::vector<text::Line> lines;
  for (std::size_t i = 1; i < all.size(); ++i) {
    const auto t = text::trim(all[i].text);
    if (t.empty() || t.front() == '#') continue;
    lines.push_back({all[i].number, t});
  }
  const std::size_t last_line = all.back().number;
  std::size_t cursor = 0;

  auto next = [&](std::string_view keyword) -> std::pair<std::size_t, std::vector<std::string_view>> {
    if (cursor >= lines.size()) {
      throw FormatError(last_line + 1, "unexpected end of file, expected '" + std::string(keyword) + "' line");
    }
    const auto& l = lines[cursor++];
    auto tokens = text::split_ws(l.text);
    if (tokens.empty() || tokens.front() != keyword) {
      throw FormatError(l.number, "expected '" + std::string(keyword) + "' line");
    }
    tokens.erase(tokens.begin());
    return {l.number, std::move(tokens)};
  };

  auto single_int = [&](std::string_view keyword) {
    auto [num, tok] = next(keyword);
    if (tok.size() != 1) throw FormatError(num, std::string(keyword) + " takes exactly one value");
    auto v = text::parse_int(tok.front());
    if (!v || *v < 1) throw FormatError(num, std::string(keyword) + " must be a positive integer");
    return std::pair{num, static_cast<std::size_t>(*v)};
  };

  ShapeModel model;
  {
    auto [num, tok] = next("mode");
    if (tok.size() != 1 || (tok.front() != "raw" && tok.front() != "aligned")) {
      throw FormatError(num, "mode must be 'raw' or 'aligned'");
    }
    model.mode = tok.front() == "raw" ? FrameMode::raw : FrameMode::aligned;
  }
  auto [n_line, n] = single_int("n_points");
  if (n < 3) throw FormatError(n_line, "n_points must be at least 3");
  auto [t_line, t] = single_int("n_components");
  if (t > 2 * n) throw FormatError(t_line, "n_components exceeds 2 * n_points");
  const std::size_t dim = 2 * n;

  {
    auto [num, tok] = next("mean");
    if (tok.size() != dim) {
      throw FormatError(num, "mean has " + std::to_string(tok.size()) + " values, expected " + std::to_string(dim));
    }
    auto v = text::parse_numbers(tok, num, "mean");
    model.mean = Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(dim));
  }
  {
    auto [num, tok] = next("eigenvalues");
    if (tok.size() != t) {
      throw FormatError(num, "eigenvalues has " + std::to_string(tok.size()) + " values, expected " + std::to_string(t));
    }
    auto v = text::parse_numbers(tok, num, "eigenvalues");
    for (std::size_t i = 0; i < t; ++i) {
      if (!(v[i] > 0.0)) throw FormatError(num, "eigenvalues must be positive");
      if (i > 0 && v[i] > v[i - 1]) throw FormatError(num, "eigenvalues must be non-increasing");
    }
    model.eigenvalues = Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(t));
  }
  model.components.resize(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < t; ++i) {
    const std::string expected = "ev " + std::to_string(i + 1);
    if (cursor >= lines.size()) {
      throw FormatError(last_line + 1, "missing eigenvector line '" + expected + "' (" + std::to_string(i) + " of " +
                                           std::to_string(t) + " present)");
    }
    auto [num, tok] = next("ev");
    if (tok.empty() || tok.front() != std::to_string(i + 1)) {
      throw FormatError(num, "expected eigenvector line '" + expected + "'");
    }
    if (tok.size() != dim + 1) {
      throw FormatError(num, expected + " has " + std::to_string(tok.size() - 1) + " values, expected " +
                                 std::to_string(dim));
    }
    auto v = text::parse_numbers(std::span(tok).subspan(1), num, expected);
    model.components.row(static_cast<Eigen::Index>(i)) =
        Eigen::Map<Eigen::RowVectorXd>(v.data(), static_cast<Eigen::Index>(dim));
  }
  if (cursor != lines.size()) throw FormatError(lines[cursor].number, "unexpected content after last eigenvector");

  const Eigen::MatrixXd gram = model.components * model.components.transpose();
  if (!gram.isApprox(Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(t)), 1e-6)) {
    throw FormatError(0, "eigenvector rows are not orthonormal");
  }
  model.total_variance = model.eigenvalues.sum();
  return model;
}

}  // namespace asmkit
