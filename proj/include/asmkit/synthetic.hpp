#pragma once

// Seeded synthetic face-like shape data with exact pose labels.
//
// Template: the eye clusters from eye_layout() sit on two small ellipses and
// every other index lies on an outer ellipse, in index order. The template is
// centered and scaled to RMS radius 1, so noise levels are fractions of the
// shape scale.
//
// Sampling per record:
//   S = template + sum_k c_k phi_k,  c_k ~ Normal(0, sigma_k^2)
//   rotate S by roll about its centroid,
//   scale x by cos(yaw) and y by cos(pitch) about the centroid,
//   observation = corrupt_observation(S).
// The modes phi_k are low-order polynomial displacement fields made orthonormal
// and orthogonal to translation, scaling and rotation. Because only cos(yaw) and
// cos(pitch) act on the points, the sign of yaw and pitch is not recoverable
// from a shape; roll is.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "asmkit/error.hpp"
#include "asmkit/layout.hpp"
#include "asmkit/losses.hpp"
#include "asmkit/shape.hpp"

namespace asmkit {

struct SyntheticConfig {
  std::size_t n_points = 68;
  std::size_t n_modes = 6;
  std::vector<double> mode_sigmas;  // empty => 0.6 * 0.75^k
  double roll_range = 30.0;         // degrees, labels uniform in [-range, range]
  double yaw_range = 45.0;
  double pitch_range = 30.0;
  double obs_sigma = 0.02;
  double occlusion_prob = 0.3;
  std::size_t occlusion_block = 10;  // points
  std::size_t train_count = 2000;
  std::size_t test_count = 500;
  std::uint64_t seed = 0;

  std::vector<double> sigmas() const {
    if (!mode_sigmas.empty()) return mode_sigmas;
    std::vector<double> s(n_modes);
    for (std::size_t k = 0; k < n_modes; ++k) s[k] = 0.6 * std::pow(0.75, static_cast<double>(k));
    return s;
  }

  void validate() const {
    if (n_points < 3) throw InvalidConfig("n_points must be at least 3");
    if (n_modes + 4 > 2 * n_points) throw InvalidConfig("n_modes must not exceed 2 * n_points - 4");
    if (!mode_sigmas.empty() && mode_sigmas.size() != n_modes) {
      throw InvalidConfig("mode_sigmas has " + std::to_string(mode_sigmas.size()) + " entries, n_modes is " +
                          std::to_string(n_modes));
    }
    for (double s : sigmas()) {
      if (!(s >= 0.0) || !std::isfinite(s)) throw InvalidConfig("mode sigmas must be finite and non-negative");
    }
    for (double r : {roll_range, yaw_range, pitch_range, obs_sigma}) {
      if (!(r >= 0.0) || !std::isfinite(r)) throw InvalidConfig("ranges and sigmas must be finite and non-negative");
    }
    if (yaw_range >= 90.0 || pitch_range >= 90.0) throw InvalidConfig("yaw and pitch ranges must stay below 90 degrees");
    if (!(occlusion_prob >= 0.0 && occlusion_prob <= 1.0)) throw InvalidConfig("occlusion_prob must lie in [0, 1]");
    if (occlusion_block > n_points) throw InvalidConfig("occlusion_block exceeds n_points");
    if (train_count + test_count < 1) throw InvalidConfig("dataset needs at least one record");
  }
};

enum class Split { train, test };

inline std::string_view to_string(Split s) { return s == Split::train ? "train" : "test"; }

struct DatasetRecord {
  std::vector<double> observation;  // 2n
  Shape gt_shape;
  PoseTriple pose;
  Split split = Split::train;

  friend bool operator==(const DatasetRecord&, const DatasetRecord&) = default;
};

struct Dataset {
  std::size_t n_points = 0;
  std::vector<DatasetRecord> records;

  std::vector<const DatasetRecord*> split(Split s) const {
    std::vector<const DatasetRecord*> out;
    for (const auto& r : records) {
      if (r.split == s) out.push_back(&r);
    }
    return out;
  }

  std::size_t count(Split s) const {
    std::size_t c = 0;
    for (const auto& r : records) c += r.split == s ? 1 : 0;
    return c;
  }

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

inline double degrees_to_radians(double deg) { return deg * std::numbers::pi / 180.0; }
inline double radians_to_degrees(double rad) { return rad * 180.0 / std::numbers::pi; }

/// Outline ellipse plus eye clusters, centered, RMS radius 1.
inline Shape synthetic_template(std::size_t n_points) {
  const auto layout = eye_layout(n_points);
  constexpr double two_pi = 2.0 * std::numbers::pi;
  std::vector<double> c(2 * n_points);

  std::size_t outline_count = 0;
  for (std::size_t i = 0; i < n_points; ++i) outline_count += layout.is_eye(i) ? 0 : 1;

  std::size_t k = 0;
  for (std::size_t i = 0; i < n_points; ++i) {
    if (layout.is_eye(i)) continue;
    const double a = two_pi * static_cast<double>(k++) / static_cast<double>(outline_count);
    c[2 * i] = 0.8 * std::sin(a);
    c[2 * i + 1] = 1.0 * std::cos(a);
  }
  if (layout.cluster_size > 0) {
    // Angle pi at offset 0 puts the left outer corner first; the right outer
    // corner lands at offset cluster_size / 2.
    auto place = [&](std::size_t start, double cx) {
      for (std::size_t j = 0; j < layout.cluster_size; ++j) {
        const double a = std::numbers::pi + two_pi * static_cast<double>(j) / static_cast<double>(layout.cluster_size);
        c[2 * (start + j)] = cx + 0.12 * std::cos(a);
        c[2 * (start + j) + 1] = -0.2 + 0.05 * std::sin(a);
      }
    };
    place(layout.left_start, -0.3);
    place(layout.right_start, 0.3);
  }
  return normalize_shape(Shape(std::move(c)));
}

/// Orthonormal non-rigid deformation modes over the template (rows, 2n wide).
inline Eigen::MatrixXd synthetic_modes(const Shape& tmpl, std::size_t n_modes) {
  const auto n = static_cast<Eigen::Index>(tmpl.n_points());
  const auto dim = 2 * n;
  std::vector<Eigen::VectorXd> basis;

  auto add = [&](Eigen::VectorXd v) {
    // Two Gram-Schmidt passes for numerical orthogonality.
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& b : basis) v -= b.dot(v) * b;
    }
    const double norm = v.norm();
    if (norm < 1e-8) return false;
    basis.push_back(v / norm);
    return true;
  };

  Eigen::VectorXd tx(dim), ty(dim), sc(dim), rot(dim);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x = tmpl.flat()[static_cast<std::size_t>(2 * i)];
    const double y = tmpl.flat()[static_cast<std::size_t>(2 * i + 1)];
    tx(2 * i) = 1.0, tx(2 * i + 1) = 0.0;
    ty(2 * i) = 0.0, ty(2 * i + 1) = 1.0;
    sc(2 * i) = x, sc(2 * i + 1) = y;
    rot(2 * i) = -y, rot(2 * i + 1) = x;
  }
  for (auto* v : {&tx, &ty, &sc, &rot}) add(*v);
  const std::size_t rigid = basis.size();

  // Monomials x^a y^(d-a) of increasing degree, each as an x- and a y-displacement.
  for (int degree = 1; basis.size() < rigid + n_modes && degree <= 64; ++degree) {
    for (int a = degree; a >= 0 && basis.size() < rigid + n_modes; --a) {
      for (int axis = 0; axis < 2 && basis.size() < rigid + n_modes; ++axis) {
        Eigen::VectorXd v = Eigen::VectorXd::Zero(dim);
        for (Eigen::Index i = 0; i < n; ++i) {
          const double x = tmpl.flat()[static_cast<std::size_t>(2 * i)];
          const double y = tmpl.flat()[static_cast<std::size_t>(2 * i + 1)];
          v(2 * i + axis) = std::pow(x, a) * std::pow(y, degree - a);
        }
        add(std::move(v));
      }
    }
  }
  if (basis.size() < rigid + n_modes) throw InvalidConfig("cannot build the requested number of deformation modes");

  Eigen::MatrixXd modes(static_cast<Eigen::Index>(n_modes), dim);
  for (std::size_t k = 0; k < n_modes; ++k) modes.row(static_cast<Eigen::Index>(k)) = basis[rigid + k].transpose();
  return modes;
}

/// Roll rotation then cos(yaw)/cos(pitch) foreshortening, both about the centroid.
inline Shape apply_pose(const Shape& shape, const PoseTriple& pose) {
  const auto c = shape.centroid();
  const double r = degrees_to_radians(pose.roll);
  const double cr = std::cos(r), sr = std::sin(r);
  const double fx = std::cos(degrees_to_radians(pose.yaw));
  const double fy = std::cos(degrees_to_radians(pose.pitch));
  std::vector<double> out(shape.dim());
  for (std::size_t i = 0; i < shape.n_points(); ++i) {
    const auto p = shape.point(i);
    const double dx = p.x - c.x, dy = p.y - c.y;
    // p + (M - I)(p - c): exact when the pose is the identity.
    out[2 * i] = p.x + (fx * cr - 1.0) * dx - fx * sr * dy;
    out[2 * i + 1] = p.y + fy * sr * dx + (fy * cr - 1.0) * dy;
  }
  return Shape(std::move(out));
}

/// Gaussian jitter on every coordinate, then with probability occlusion_prob a
/// contiguous block of occlusion_block points is set to 0. The shape is not modified.
inline std::vector<double> corrupt_observation(const Shape& shape, const SyntheticConfig& config,
                                               std::uint64_t record_seed) {
  std::mt19937_64 rng(record_seed);
  std::vector<double> obs(shape.flat());
  if (config.obs_sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, config.obs_sigma);
    for (auto& v : obs) v += noise(rng);
  }
  std::bernoulli_distribution occluded(config.occlusion_prob);
  if (config.occlusion_block > 0 && occluded(rng)) {
    std::uniform_int_distribution<std::size_t> start_dist(0, shape.n_points() - config.occlusion_block);
    const std::size_t start = start_dist(rng);
    for (std::size_t i = start; i < start + config.occlusion_block; ++i) {
      obs[2 * i] = 0.0;
      obs[2 * i + 1] = 0.0;
    }
  }
  return obs;
}

inline Dataset generate_synthetic(const SyntheticConfig& config) {
  config.validate();
  const Shape tmpl = synthetic_template(config.n_points);
  const Eigen::MatrixXd modes = synthetic_modes(tmpl, config.n_modes);
  const auto sigmas = config.sigmas();

  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> std_normal(0.0, 1.0);
  auto uniform = [&](double range) {
    if (range == 0.0) return 0.0;
    return std::uniform_real_distribution<double>(-range, range)(rng);
  };

  Dataset data;
  data.n_points = config.n_points;
  const std::size_t total = config.train_count + config.test_count;
  data.records.reserve(total);
  for (std::size_t r = 0; r < total; ++r) {
    Eigen::VectorXd s = Eigen::Map<const Eigen::VectorXd>(tmpl.flat().data(), static_cast<Eigen::Index>(tmpl.dim()));
    for (std::size_t k = 0; k < config.n_modes; ++k) {
      const double c = sigmas[k] * std_normal(rng);
      s += c * modes.row(static_cast<Eigen::Index>(k)).transpose();
    }
    PoseTriple pose;
    pose.roll = uniform(config.roll_range);
    pose.yaw = uniform(config.yaw_range);
    pose.pitch = uniform(config.pitch_range);
    const std::uint64_t record_seed = rng();

    DatasetRecord rec;
    rec.gt_shape = apply_pose(Shape(std::vector<double>(s.data(), s.data() + s.size())), pose);
    rec.pose = pose;
    rec.observation = corrupt_observation(rec.gt_shape, config, record_seed);
    rec.split = r < config.train_count ? Split::train : Split::test;
    data.records.push_back(std::move(rec));
  }
  return data;
}

}  // namespace asmkit
