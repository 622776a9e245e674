#pragma once

// Experiment configuration file: `key = value` lines grouped under `[section]`
// headers, `#` comments. Keys before the first header belong to the top level.
// Unknown sections or keys are rejected with their line number. config_to_text() writes
// the complete effective configuration, which every CLI output file embeds.

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "asmkit/adam.hpp"
#include "asmkit/error.hpp"
#include "asmkit/losses.hpp"
#include "asmkit/metrics.hpp"
#include "asmkit/regressor.hpp"
#include "asmkit/shape_model.hpp"
#include "asmkit/synthetic.hpp"
#include "asmkit/text_io.hpp"
#include "asmkit/trainer.hpp"

namespace asmkit {

struct RunConfig {
  std::uint64_t seed = 0;
  SyntheticConfig synthetic;
  double variance_fraction = 0.95;
  std::size_t components = 0;  // nonzero overrides variance_fraction
  FrameMode mode = FrameMode::raw;
  std::vector<std::size_t> hidden_widths{128};
  OptimizerConfig optimizer;
  LossKind loss = LossKind::asm_assisted;
  LossWeights weights;
  std::optional<std::size_t> left_eye;  // unset => layout default
  std::optional<std::size_t> right_eye;
  double failure_threshold = 0.1;
  double auc_upper = 0.1;

  Retention retention() const {
    return components > 0 ? Retention::components(components) : Retention::fraction(variance_fraction);
  }

  SyntheticConfig synthetic_config() const {
    auto s = synthetic;
    s.seed = seed;
    return s;
  }

  EvalConfig eval_config(std::size_t n_points) const {
    auto e = EvalConfig::for_points(n_points);
    if (left_eye) e.left_eye_index = *left_eye;
    if (right_eye) e.right_eye_index = *right_eye;
    e.failure_threshold = failure_threshold;
    e.auc_upper = auc_upper;
    return e;
  }
};

namespace detail {

struct ConfigKey {
  std::string_view section;
  std::string_view name;
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

inline std::string bad_value(std::string_view key, std::string_view value, std::string_view expected) {
  return "invalid value '" + std::string(value) + "' for '" + std::string(key) + "' (expected " + std::string(expected) + ")";
}

inline double as_real(std::string_view key, std::string_view v) {
  auto d = text::parse_double(v);
  if (!d) throw InvalidConfig(bad_value(key, v, "a finite number"));
  return *d;
}

inline std::size_t as_count(std::string_view key, std::string_view v) {
  auto i = text::parse_int(v);
  if (!i || *i < 0) throw InvalidConfig(bad_value(key, v, "a non-negative integer"));
  return static_cast<std::size_t>(*i);
}

inline std::string join(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + text::format_shortest(v[i]);
  return out;
}

inline std::string join(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

inline std::vector<std::string_view> split_commas(std::string_view v) {
  std::vector<std::string_view> out;
  if (text::trim(v).empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto comma = v.find(',', start);
    out.push_back(text::trim(v.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

#define ASMKIT_REAL(sec, key, field)                                                          \
  ConfigKey {                                                                                 \
    sec, key, [](RunConfig& c, std::string_view v) { c.field = as_real(key, v); },            \
        [](const RunConfig& c) { return text::format_shortest(c.field); }                       \
  }
#define ASMKIT_COUNT(sec, key, field)                                                         \
  ConfigKey {                                                                                 \
    sec, key, [](RunConfig& c, std::string_view v) { c.field = as_count(key, v); },           \
        [](const RunConfig& c) { return std::to_string(c.field); }                            \
  }

inline const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = {
      ConfigKey{"", "seed",
                [](RunConfig& c, std::string_view v) {
                  auto i = text::parse_int(v);
                  if (!i || *i < 0) throw InvalidConfig(bad_value("seed", v, "a non-negative integer"));
                  c.seed = static_cast<std::uint64_t>(*i);
                },
                [](const RunConfig& c) { return std::to_string(c.seed); }},

      ASMKIT_COUNT("synthetic", "n_points", synthetic.n_points),
      ASMKIT_COUNT("synthetic", "n_modes", synthetic.n_modes),
      ConfigKey{"synthetic", "mode_sigmas",
                [](RunConfig& c, std::string_view v) {
                  c.synthetic.mode_sigmas.clear();
                  if (v == "auto") return;
                  for (auto tok : split_commas(v)) c.synthetic.mode_sigmas.push_back(as_real("mode_sigmas", tok));
                },
                [](const RunConfig& c) {
                  return c.synthetic.mode_sigmas.empty() ? std::string("auto") : join(c.synthetic.mode_sigmas);
                }},
      ASMKIT_REAL("synthetic", "roll_range", synthetic.roll_range),
      ASMKIT_REAL("synthetic", "yaw_range", synthetic.yaw_range),
      ASMKIT_REAL("synthetic", "pitch_range", synthetic.pitch_range),
      ASMKIT_REAL("synthetic", "obs_sigma", synthetic.obs_sigma),
      ASMKIT_REAL("synthetic", "occlusion_prob", synthetic.occlusion_prob),
      ASMKIT_COUNT("synthetic", "occlusion_block", synthetic.occlusion_block),
      ASMKIT_COUNT("synthetic", "train_count", synthetic.train_count),
      ASMKIT_COUNT("synthetic", "test_count", synthetic.test_count),

      ASMKIT_REAL("model", "variance_fraction", variance_fraction),
      ASMKIT_COUNT("model", "components", components),
      ConfigKey{"model", "mode", [](RunConfig& c, std::string_view v) { c.mode = parse_frame_mode(v); },
                [](const RunConfig& c) { return std::string(to_string(c.mode)); }},

      ConfigKey{"regressor", "hidden",
                [](RunConfig& c, std::string_view v) {
                  c.hidden_widths.clear();
                  for (auto tok : split_commas(v)) c.hidden_widths.push_back(as_count("hidden", tok));
                },
                [](const RunConfig& c) { return join(c.hidden_widths); }},

      ASMKIT_REAL("optimizer", "learning_rate", optimizer.learning_rate),
      ASMKIT_REAL("optimizer", "beta1", optimizer.beta1),
      ASMKIT_REAL("optimizer", "beta2", optimizer.beta2),
      ASMKIT_REAL("optimizer", "decay", optimizer.decay),
      ASMKIT_REAL("optimizer", "epsilon", optimizer.epsilon),
      ASMKIT_COUNT("optimizer", "batch_size", optimizer.batch_size),
      ASMKIT_COUNT("optimizer", "epochs", optimizer.epochs),

      ConfigKey{"loss", "kind", [](RunConfig& c, std::string_view v) { c.loss = parse_loss_kind(v); },
                [](const RunConfig& c) { return std::string(to_string(c.loss)); }},
      ASMKIT_REAL("loss", "w_facial", weights.w_facial),
      ASMKIT_REAL("loss", "w_pose", weights.w_pose),

      ConfigKey{"eval", "left_eye",
                [](RunConfig& c, std::string_view v) {
                  c.left_eye = v == "auto" ? std::nullopt : std::optional(as_count("left_eye", v));
                },
                [](const RunConfig& c) { return c.left_eye ? std::to_string(*c.left_eye) : std::string("auto"); }},
      ConfigKey{"eval", "right_eye",
                [](RunConfig& c, std::string_view v) {
                  c.right_eye = v == "auto" ? std::nullopt : std::optional(as_count("right_eye", v));
                },
                [](const RunConfig& c) { return c.right_eye ? std::to_string(*c.right_eye) : std::string("auto"); }},
      ASMKIT_REAL("eval", "failure_threshold", failure_threshold),
      ASMKIT_REAL("eval", "auc_upper", auc_upper),
  };
  return keys;
}

#undef ASMKIT_REAL
#undef ASMKIT_COUNT

inline const ConfigKey* find_key(std::string_view section, std::string_view name) {
  for (const auto& k : config_keys()) {
    if (k.section == section && k.name == name) return &k;
  }
  return nullptr;
}

}  // namespace detail

/// Applies one `section.key = value` assignment (top-level keys have no section).
inline void set_config_value(RunConfig& config, std::string_view section, std::string_view key, std::string_view value) {
  const auto* k = detail::find_key(section, key);
  if (!k) {
    throw InvalidConfig("unknown key '" + std::string(key) + "'" +
                        (section.empty() ? std::string() : " in section [" + std::string(section) + "]"));
  }
  k->set(config, value);
}

/// Parses config text on top of `base` (defaults when omitted).
inline RunConfig parse_config(std::string_view input, RunConfig base = {}) {
  std::string section;
  for (const auto& line : text::split_lines(input)) {
    auto t = text::trim(line.text);
    if (const auto hash = t.find('#'); hash != std::string_view::npos) t = text::trim(t.substr(0, hash));
    if (t.empty()) continue;
    auto where = [&](const std::string& msg) { return "line " + std::to_string(line.number) + ": " + msg; };
    if (t.front() == '[') {
      if (t.back() != ']') throw InvalidConfig(where("malformed section header"));
      section = std::string(text::trim(t.substr(1, t.size() - 2)));
      bool known = false;
      for (const auto& k : detail::config_keys()) known = known || k.section == section;
      if (!known || section.empty()) throw InvalidConfig(where("unknown section [" + section + "]"));
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string_view::npos) throw InvalidConfig(where("expected 'key = value'"));
    const auto key = text::trim(t.substr(0, eq));
    const auto value = text::trim(t.substr(eq + 1));
    try {
      set_config_value(base, section, key, value);
    } catch (const InvalidConfig& e) {
      throw InvalidConfig(where(e.what()));
    }
  }
  return base;
}

/// Complete effective configuration in canonical form.
inline std::string config_to_text(const RunConfig& config) {
  std::string out;
  std::string_view current = "";
  for (const auto& k : detail::config_keys()) {
    if (k.section != current) {
      out += "\n[" + std::string(k.section) + "]\n";
      current = k.section;
    }
    out += std::string(k.name) + " = " + k.get(config) + "\n";
  }
  return out;
}

}  // namespace asmkit
