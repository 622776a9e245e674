#pragma once

// Reference two-head regressor: rectifier hidden layers over the flattened
// observation, then a linear landmark head (2n outputs) and a linear pose head
// (yaw, pitch, roll in degrees), both reading the last hidden layer.
//
// All parameters live in one flat vector so the optimizer can treat them as a
// single block. Per layer the weight matrix (out x in, column-major) comes first,
// followed by the bias.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <string_view>
#include <vector>

#include "asmkit/error.hpp"
#include "asmkit/losses.hpp"
#include "asmkit/text_io.hpp"

namespace asmkit {

struct RegressorConfig {
  std::size_t n_points = 68;
  std::vector<std::size_t> hidden_widths{128};

  std::size_t input_dim() const noexcept { return 2 * n_points; }

  void validate() const {
    if (n_points < 3) throw InvalidConfig("regressor needs at least 3 landmarks");
    for (auto w : hidden_widths) {
      if (w == 0) throw InvalidConfig("hidden widths must be positive");
    }
  }
};

struct LayerSpec {
  std::size_t in = 0;
  std::size_t out = 0;
  std::size_t offset = 0;  // start of W in the flat vector; b follows at offset + in * out

  std::size_t weight_count() const noexcept { return in * out; }
  std::size_t bias_offset() const noexcept { return offset + in * out; }
  std::size_t end() const noexcept { return bias_offset() + out; }
};

class Regressor {
 public:
  Regressor() = default;

  explicit Regressor(RegressorConfig config) : config_(std::move(config)) {
    config_.validate();
    std::size_t in = config_.input_dim();
    std::size_t offset = 0;
    auto add = [&](std::size_t i, std::size_t o) {
      layers_.push_back({i, o, offset});
      offset = layers_.back().end();
    };
    for (auto w : config_.hidden_widths) {
      add(in, w);
      in = w;
    }
    add(in, config_.input_dim());  // landmark head
    add(in, 3);                    // pose head
    params_.assign(offset, 0.0);
  }

  const RegressorConfig& config() const noexcept { return config_; }
  std::size_t hidden_count() const noexcept { return config_.hidden_widths.size(); }
  std::span<const LayerSpec> layers() const noexcept { return layers_; }
  const LayerSpec& landmark_head() const { return layers_[hidden_count()]; }
  const LayerSpec& pose_head() const { return layers_[hidden_count() + 1]; }

  std::span<double> params() noexcept { return params_; }
  std::span<const double> params() const noexcept { return params_; }

  Eigen::Map<Eigen::MatrixXd> weights(const LayerSpec& l) {
    return {params_.data() + l.offset, static_cast<Eigen::Index>(l.out), static_cast<Eigen::Index>(l.in)};
  }
  Eigen::Map<const Eigen::MatrixXd> weights(const LayerSpec& l) const {
    return {params_.data() + l.offset, static_cast<Eigen::Index>(l.out), static_cast<Eigen::Index>(l.in)};
  }
  Eigen::Map<Eigen::VectorXd> bias(const LayerSpec& l) {
    return {params_.data() + l.bias_offset(), static_cast<Eigen::Index>(l.out)};
  }
  Eigen::Map<const Eigen::VectorXd> bias(const LayerSpec& l) const {
    return {params_.data() + l.bias_offset(), static_cast<Eigen::Index>(l.out)};
  }

  friend bool operator==(const Regressor& a, const Regressor& b) {
    return a.config_.n_points == b.config_.n_points && a.config_.hidden_widths == b.config_.hidden_widths &&
           a.params_ == b.params_;
  }

 private:
  RegressorConfig config_;
  std::vector<LayerSpec> layers_;
  std::vector<double> params_;
};

/// Uniform +-sqrt(6 / (fan_in + fan_out)) weights, zero biases, drawn from one seeded stream.
inline Regressor init_regressor(const RegressorConfig& config, std::uint64_t seed) {
  Regressor reg(config);
  std::mt19937_64 rng(seed);
  for (const auto& layer : reg.layers()) {
    const double bound = std::sqrt(6.0 / static_cast<double>(layer.in + layer.out));
    std::uniform_real_distribution<double> dist(-bound, bound);
    auto w = reg.weights(layer);
    for (Eigen::Index c = 0; c < w.cols(); ++c) {
      for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = dist(rng);
    }
  }
  return reg;
}

/// Activations kept from a batched forward pass for the backward pass.
struct ForwardCache {
  Eigen::MatrixXd input;                   // in x B
  std::vector<Eigen::MatrixXd> pre;        // hidden pre-activations
  std::vector<Eigen::MatrixXd> hidden;     // hidden activations
  Eigen::MatrixXd landmarks;               // 2n x B
  Eigen::Matrix3Xd pose;                   // 3 x B
};

/// Batched forward pass; each column of `input` is one observation.
inline ForwardCache forward_batch(const Regressor& reg, const Eigen::MatrixXd& input) {
  if (static_cast<std::size_t>(input.rows()) != reg.config().input_dim()) {
    throw DimensionMismatch("observation has " + std::to_string(input.rows()) + " values, regressor expects " +
                            std::to_string(reg.config().input_dim()));
  }
  ForwardCache cache;
  cache.input = input;
  const Eigen::MatrixXd* h = &cache.input;
  for (std::size_t k = 0; k < reg.hidden_count(); ++k) {
    const auto& layer = reg.layers()[k];
    Eigen::MatrixXd z = reg.weights(layer) * (*h);
    z.colwise() += reg.bias(layer);
    cache.hidden.push_back(z.cwiseMax(0.0));
    cache.pre.push_back(std::move(z));
    h = &cache.hidden.back();
  }
  cache.landmarks = reg.weights(reg.landmark_head()) * (*h);
  cache.landmarks.colwise() += reg.bias(reg.landmark_head());
  cache.pose = reg.weights(reg.pose_head()) * (*h);
  cache.pose.colwise() += reg.bias(reg.pose_head());
  return cache;
}

/// Reverse-mode gradient of <d_landmarks, landmarks> + <d_pose, pose> with respect to
/// all parameters, in the regressor's flat layout. Rectifier slope at 0 is 0.
inline std::vector<double> backward_batch(const Regressor& reg, const ForwardCache& cache,
                                          const Eigen::MatrixXd& d_landmarks, const Eigen::Matrix3Xd& d_pose) {
  const auto batch = cache.input.cols();
  if (d_landmarks.rows() != cache.landmarks.rows() || d_landmarks.cols() != batch || d_pose.cols() != batch) {
    throw DimensionMismatch("upstream gradient does not match the forward pass");
  }
  std::vector<double> grads(reg.params().size(), 0.0);
  auto gw = [&](const LayerSpec& l) {
    return Eigen::Map<Eigen::MatrixXd>(grads.data() + l.offset, static_cast<Eigen::Index>(l.out),
                                       static_cast<Eigen::Index>(l.in));
  };
  auto gb = [&](const LayerSpec& l) {
    return Eigen::Map<Eigen::VectorXd>(grads.data() + l.bias_offset(), static_cast<Eigen::Index>(l.out));
  };

  const Eigen::MatrixXd& top = reg.hidden_count() > 0 ? cache.hidden.back() : cache.input;
  gw(reg.landmark_head()).noalias() = d_landmarks * top.transpose();
  gb(reg.landmark_head()) = d_landmarks.rowwise().sum();
  gw(reg.pose_head()).noalias() = d_pose * top.transpose();
  gb(reg.pose_head()) = d_pose.rowwise().sum();

  if (reg.hidden_count() == 0) return grads;

  Eigen::MatrixXd d_h = reg.weights(reg.landmark_head()).transpose() * d_landmarks;
  d_h.noalias() += reg.weights(reg.pose_head()).transpose() * d_pose;
  for (std::size_t k = reg.hidden_count(); k-- > 0;) {
    const auto& layer = reg.layers()[k];
    const Eigen::MatrixXd d_z = (cache.pre[k].array() > 0.0).select(d_h, 0.0);
    const Eigen::MatrixXd& below = k > 0 ? cache.hidden[k - 1] : cache.input;
    gw(layer).noalias() = d_z * below.transpose();
    gb(layer) = d_z.rowwise().sum();
    if (k > 0) d_h = reg.weights(layer).transpose() * d_z;
  }
  return grads;
}

struct Prediction {
  std::vector<double> landmarks;  // 2n
  PoseTriple pose;
};

inline Prediction forward(const Regressor& reg, std::span<const double> observation) {
  if (observation.size() != reg.config().input_dim()) {
    throw DimensionMismatch("observation has " + std::to_string(observation.size()) + " values, regressor expects " +
                            std::to_string(reg.config().input_dim()));
  }
  const Eigen::MatrixXd x = Eigen::Map<const Eigen::VectorXd>(observation.data(), static_cast<Eigen::Index>(observation.size()));
  const auto cache = forward_batch(reg, x);
  Prediction p;
  p.landmarks.assign(cache.landmarks.data(), cache.landmarks.data() + cache.landmarks.size());
  p.pose = {cache.pose(0, 0), cache.pose(1, 0), cache.pose(2, 0)};
  return p;
}

inline std::vector<double> backward(const Regressor& reg, std::span<const double> observation,
                                    std::span<const double> d_landmarks, const PoseTriple& d_pose) {
  if (d_landmarks.size() != reg.config().input_dim()) throw DimensionMismatch("landmark gradient has the wrong size");
  const Eigen::MatrixXd x = Eigen::Map<const Eigen::VectorXd>(observation.data(), static_cast<Eigen::Index>(observation.size()));
  const auto cache = forward_batch(reg, x);
  const Eigen::MatrixXd dl = Eigen::Map<const Eigen::VectorXd>(d_landmarks.data(), static_cast<Eigen::Index>(d_landmarks.size()));
  Eigen::Matrix3Xd dp(3, 1);
  dp << d_pose.yaw, d_pose.pitch, d_pose.roll;
  return backward_batch(reg, cache, dl, dp);
}

// ---------------------------------------------------------------------------
// ASMREG v1 weights file
//
//   ASMREG v1
//   n_points <n>
//   hidden <w1> <w2> ...        ("hidden" alone for no hidden layer)
//   weights <layer> <rows> <cols> <row-major values>
//   bias <layer> <len> <values>
//
// Layers are named hidden1.., landmark, pose, in that order.

inline std::string layer_name(const Regressor& reg, std::size_t index) {
  if (index < reg.hidden_count()) return "hidden" + std::to_string(index + 1);
  return index == reg.hidden_count() ? "landmark" : "pose";
}

inline std::string serialize_regressor(const Regressor& reg, std::string_view comments = {}) {
  std::string out = "ASMREG v1\n";
  out += text::comment_block(comments);
  out += "n_points " + std::to_string(reg.config().n_points) + "\nhidden";
  for (auto w : reg.config().hidden_widths) out += " " + std::to_string(w);
  out += '\n';
  for (std::size_t i = 0; i < reg.layers().size(); ++i) {
    const auto& l = reg.layers()[i];
    const auto name = layer_name(reg, i);
    const auto w = reg.weights(l);
    out += "weights " + name + " " + std::to_string(l.out) + " " + std::to_string(l.in);
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) {
        out += ' ';
        out += text::format_double(w(r, c));
      }
    }
    out += "\nbias " + name + " " + std::to_string(l.out);
    const auto b = reg.bias(l);
    text::append_numbers(out, {b.data(), l.out});
    out += '\n';
  }
  return out;
}

inline Regressor deserialize_regressor(std::string_view input) {
  const auto all = text::split_lines(input);
  if (all.empty() || text::trim(all.front().text) != "ASMREG v1") throw FormatError(1, "expected header 'ASMREG v1'");
  std::vector<text::Line> lines;
  for (std::size_t i = 1; i < all.size(); ++i) {
    const auto t = text::trim(all[i].text);
    if (t.empty() || t.front() == '#') continue;
    lines.push_back({all[i].number, t});
  }
  const std::size_t eof_line = all.back().number + 1;
  std::size_t cursor = 0;
  auto next = [&](std::string_view keyword) {
    if (cursor >= lines.size()) throw FormatError(eof_line, "unexpected end of file, expected '" + std::string(keyword) + "'");
    const auto& l = lines[cursor++];
    auto tok = text::split_ws(l.text);
    if (tok.empty() || tok.front() != keyword) throw FormatError(l.number, "expected '" + std::string(keyword) + "' line");
    return std::pair{l.number, std::vector<std::string_view>(tok.begin() + 1, tok.end())};
  };
  auto positive = [](std::string_view tok, std::size_t line) {
    const auto v = text::parse_int(tok);
    if (!v || *v < 1 || *v > 100000000) throw FormatError(line, "expected a positive integer, got '" + std::string(tok) + "'");
    return static_cast<std::size_t>(*v);
  };

  RegressorConfig config;
  {
    auto [num, tok] = next("n_points");
    if (tok.size() != 1) throw FormatError(num, "n_points takes one value");
    config.n_points = positive(tok[0], num);
    if (config.n_points < 3) throw FormatError(num, "n_points must be at least 3");
  }
  {
    auto [num, tok] = next("hidden");
    config.hidden_widths.clear();
    for (auto t : tok) config.hidden_widths.push_back(positive(t, num));
    // Every parameter needs at least two bytes of text; reject absurd headers before allocating.
    std::size_t count = 0, width = 2 * config.n_points;
    for (std::size_t h : config.hidden_widths) {
      count += (width + 1) * h;
      width = h;
      if (count > input.size()) break;
    }
    count += (width + 1) * (2 * config.n_points + 3);
    if (count > input.size()) throw FormatError(num, "layer sizes exceed the file contents");
  }
  Regressor reg(config);
  for (std::size_t i = 0; i < reg.layers().size(); ++i) {
    const auto& l = reg.layers()[i];
    const auto name = layer_name(reg, i);
    {
      auto [num, tok] = next("weights");
      if (tok.size() < 3 || tok[0] != name) throw FormatError(num, "expected weights for layer '" + name + "'");
      if (positive(tok[1], num) != l.out || positive(tok[2], num) != l.in) {
        throw FormatError(num, "layer '" + name + "' dimensions disagree with the header");
      }
      if (tok.size() != 3 + l.weight_count()) throw FormatError(num, "layer '" + name + "' has the wrong number of weights");
      const auto v = text::parse_numbers(std::span(tok).subspan(3), num, "weights");
      auto w = reg.weights(l);
      for (Eigen::Index r = 0; r < w.rows(); ++r) {
        for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = v[static_cast<std::size_t>(r * w.cols() + c)];
      }
    }
    {
      auto [num, tok] = next("bias");
      if (tok.size() < 2 || tok[0] != name) throw FormatError(num, "expected bias for layer '" + name + "'");
      if (positive(tok[1], num) != l.out || tok.size() != 2 + l.out) {
        throw FormatError(num, "layer '" + name + "' bias has the wrong length");
      }
      const auto v = text::parse_numbers(std::span(tok).subspan(2), num, "bias");
      auto b = reg.bias(l);
      for (std::size_t k = 0; k < l.out; ++k) b(static_cast<Eigen::Index>(k)) = v[k];
    }
  }
  if (cursor != lines.size()) throw FormatError(lines[cursor].number, "unexpected content after the pose layer");
  return reg;
}

}  // namespace asmkit
