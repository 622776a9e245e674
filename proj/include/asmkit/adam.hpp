#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "asmkit/error.hpp"

namespace asmkit {

struct OptimizerConfig {
  double learning_rate = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double decay = 1e-5;  // inverse-time decay per step: lr / (1 + decay * t)
  double epsilon = 1e-7;
  std::size_t batch_size = 50;
  std::size_t epochs = 150;

  void validate() const {
    if (!(learning_rate > 0.0)) throw InvalidConfig("learning_rate must be positive");
    if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) throw InvalidConfig("betas must lie in (0, 1)");
    if (!(decay >= 0.0)) throw InvalidConfig("decay must be non-negative");
    if (!(epsilon > 0.0)) throw InvalidConfig("epsilon must be positive");
    if (batch_size < 1) throw InvalidConfig("batch_size must be at least 1");
    if (epochs < 1) throw InvalidConfig("epochs must be at least 1");
  }
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t step = 0;

  explicit AdamState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

/// One bias-corrected Adam update of `params` in place; advances state.step.
inline void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads,
                      const OptimizerConfig& config) {
  if (params.size() != grads.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ShapeMismatch("adam_step: parameter, gradient and moment sizes differ");
  }
  const auto t = ++state.step;
  const double td = static_cast<double>(t);
  const double rate = config.learning_rate / (1.0 + config.decay * td);
  const double c1 = 1.0 - std::pow(config.beta1, td);
  const double c2 = 1.0 - std::pow(config.beta2, td);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * g;
    state.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * g * g;
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    params[i] -= rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
  }
}

}  // namespace asmkit
