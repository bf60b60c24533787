#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "strokegan/adam.hpp"
#include "strokegan/dataset.hpp"
#include "strokegan/losses.hpp"
#include "strokegan/model.hpp"

namespace strokegan {

enum class LrSchedule { Constant, Linear };

struct TrainConfig {
  // Optimization.
  double learning_rate = 2e-4;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.999;
  std::size_t batch_size = 8;
  std::size_t epochs = 200;
  std::size_t max_steps = 0;  // 0: no cap beyond epochs × batches
  LrSchedule lr_schedule = LrSchedule::Constant;
  std::size_t lr_decay_start = 100;  // epoch at which linear decay begins

  // Objective.
  LossWeights weights;
  GeneratorAdversarialForm adversarial_form = GeneratorAdversarialForm::NonSaturating;
  bool supervise_real_strokes = false;
  bool two_generators = false;

  // Data.
  FewShotStrategy fewshot = RandomStrategy{0.2};
  double copy_augment = 0.0;
  std::uint64_t seed = 0;
  std::size_t resolution = 128;
  std::string source_font = "source";
  std::string target_font = "target";
  std::string stroke_table = "strokes.tsv";

  // Model.
  ModelShape shape;

  // Output.
  std::size_t checkpoint_every = 1000;

  AdamHyper adam() const { return {adam_beta1, adam_beta2, 1e-8}; }

  void validate() const {
    auto fail = [](const std::string& what) { throw Error(ErrorKind::InvalidConfig, what); };
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
      fail("adam betas must lie in [0, 1)");
    }
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) fail("learning_rate must be finite and >= 0");
    if (batch_size < 1) fail("batch_size must be >= 1");
    if (resolution < 32 || resolution % 4 != 0) fail("resolution must be a multiple of 4 and >= 32");
    if (!(copy_augment >= 0.0 && copy_augment <= 1.0)) fail("copy_augment must lie in [0, 1]");
    if (shape.generator_base < 1 || shape.discriminator_base < 1) fail("network widths must be >= 1");
    weights.validate();
  }

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Constant, or linear decay to zero from `lr_decay_start` to `epochs`.
inline double learning_rate_at(const TrainConfig& c, std::uint64_t epoch) {
  if (c.lr_schedule == LrSchedule::Constant || epoch < c.lr_decay_start || c.epochs <= c.lr_decay_start) {
    return c.learning_rate;
  }
  const double span = static_cast<double>(c.epochs - c.lr_decay_start);
  const double frac = static_cast<double>(epoch - c.lr_decay_start) / span;
  return c.learning_rate * std::max(0.0, 1.0 - frac);
}

namespace detail {

template <typename V>
std::string format_value(const V& v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

template <typename V>
V parse_value(const std::string& key, const std::string& text) {
  std::istringstream is(text);
  V v{};
  if (!(is >> v) || !(is >> std::ws).eof()) throw Error(ErrorKind::InvalidConfig, key + ": cannot parse '" + text + "'");
  return v;
}

inline bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw Error(ErrorKind::InvalidConfig, key + ": expected true/false, got '" + text + "'");
}

struct ConfigKey {
  std::function<std::string(const TrainConfig&)> get;
  std::function<void(TrainConfig&, const std::string&)> set;
};

template <typename V>
ConfigKey numeric(V TrainConfig::*member) {
  return {[member](const TrainConfig& c) { return format_value(c.*member); },
          [member](TrainConfig& c, const std::string& s) { c.*member = parse_value<V>("", s); }};
}

inline const std::vector<std::pair<std::string, ConfigKey>>& config_keys() {
  static const std::vector<std::pair<std::string, ConfigKey>> keys = {
      {"learning_rate", numeric(&TrainConfig::learning_rate)},
      {"adam_beta1", numeric(&TrainConfig::adam_beta1)},
      {"adam_beta2", numeric(&TrainConfig::adam_beta2)},
      {"batch_size", numeric(&TrainConfig::batch_size)},
      {"epochs", numeric(&TrainConfig::epochs)},
      {"max_steps", numeric(&TrainConfig::max_steps)},
      {"lr_schedule",
       {[](const TrainConfig& c) { return std::string(c.lr_schedule == LrSchedule::Linear ? "linear" : "constant"); },
        [](TrainConfig& c, const std::string& s) {
          if (s == "constant") {
            c.lr_schedule = LrSchedule::Constant;
          } else if (s == "linear") {
            c.lr_schedule = LrSchedule::Linear;
          } else {
            throw Error(ErrorKind::InvalidConfig, "lr_schedule: expected constant|linear");
          }
        }}},
      {"lr_decay_start", numeric(&TrainConfig::lr_decay_start)},
      {"lambda_cyc",
       {[](const TrainConfig& c) { return format_value(c.weights.lambda_cyc); },
        [](TrainConfig& c, const std::string& s) { c.weights.lambda_cyc = parse_value<double>("lambda_cyc", s); }}},
      {"lambda_stroke",
       {[](const TrainConfig& c) { return format_value(c.weights.lambda_stroke); },
        [](TrainConfig& c, const std::string& s) { c.weights.lambda_stroke = parse_value<double>("lambda_stroke", s); }}},
      {"lambda_fs3",
       {[](const TrainConfig& c) { return format_value(c.weights.lambda_fs3); },
        [](TrainConfig& c, const std::string& s) { c.weights.lambda_fs3 = parse_value<double>("lambda_fs3", s); }}},
      {"adversarial_form",
       {[](const TrainConfig& c) {
          return std::string(c.adversarial_form == GeneratorAdversarialForm::Saturating ? "saturating"
                                                                                        : "non-saturating");
        },
        [](TrainConfig& c, const std::string& s) {
          if (s == "non-saturating") {
            c.adversarial_form = GeneratorAdversarialForm::NonSaturating;
          } else if (s == "saturating") {
            c.adversarial_form = GeneratorAdversarialForm::Saturating;
          } else {
            throw Error(ErrorKind::InvalidConfig, "adversarial_form: expected non-saturating|saturating");
          }
        }}},
      {"supervise_real_strokes",
       {[](const TrainConfig& c) { return std::string(c.supervise_real_strokes ? "true" : "false"); },
        [](TrainConfig& c, const std::string& s) { c.supervise_real_strokes = parse_bool("supervise_real_strokes", s); }}},
      {"two_generators",
       {[](const TrainConfig& c) { return std::string(c.two_generators ? "true" : "false"); },
        [](TrainConfig& c, const std::string& s) { c.two_generators = parse_bool("two_generators", s); }}},
      {"fewshot",
       {[](const TrainConfig& c) { return describe(c.fewshot); },
        [](TrainConfig& c, const std::string& s) { c.fewshot = parse_strategy(s); }}},
      {"copy_augment", numeric(&TrainConfig::copy_augment)},
      {"seed", numeric(&TrainConfig::seed)},
      {"resolution", numeric(&TrainConfig::resolution)},
      {"source_font",
       {[](const TrainConfig& c) { return c.source_font; }, [](TrainConfig& c, const std::string& s) { c.source_font = s; }}},
      {"target_font",
       {[](const TrainConfig& c) { return c.target_font; }, [](TrainConfig& c, const std::string& s) { c.target_font = s; }}},
      {"stroke_table",
       {[](const TrainConfig& c) { return c.stroke_table; }, [](TrainConfig& c, const std::string& s) { c.stroke_table = s; }}},
      {"generator_base",
       {[](const TrainConfig& c) { return format_value(c.shape.generator_base); },
        [](TrainConfig& c, const std::string& s) { c.shape.generator_base = parse_value<std::size_t>("generator_base", s); }}},
      {"discriminator_base",
       {[](const TrainConfig& c) { return format_value(c.shape.discriminator_base); },
        [](TrainConfig& c, const std::string& s) {
          c.shape.discriminator_base = parse_value<std::size_t>("discriminator_base", s);
        }}},
      {"checkpoint_every", numeric(&TrainConfig::checkpoint_every)},
  };
  return keys;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

inline std::vector<std::string> config_key_names() {
  std::vector<std::string> out;
  for (const auto& [k, _] : detail::config_keys()) out.push_back(k);
  return out;
}

/// Sets one key; unknown keys are rejected.
inline void set_config_value(TrainConfig& c, const std::string& key, const std::string& value) {
  for (const auto& [k, handler] : detail::config_keys()) {
    if (k == key) {
      try {
        handler.set(c, value);
      } catch (const Error& e) {
        throw Error(ErrorKind::InvalidConfig, key + ": " + e.what());
      }
      return;
    }
  }
  throw Error(ErrorKind::InvalidConfig, "unknown config key '" + key + "'");
}

inline std::string get_config_value(const TrainConfig& c, const std::string& key) {
  for (const auto& [k, handler] : detail::config_keys()) {
    if (k == key) return handler.get(c);
  }
  throw Error(ErrorKind::InvalidConfig, "unknown config key '" + key + "'");
}

/// `key = value` lines; `#` starts a comment line.
inline TrainConfig parse_config(std::istream& in, TrainConfig base = {}) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw LineError(ErrorKind::InvalidConfig, line_no, "expected key = value");
    set_config_value(base, detail::trim(t.substr(0, eq)), detail::trim(t.substr(eq + 1)));
  }
  return base;
}

inline TrainConfig load_config(const std::filesystem::path& path, TrainConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::MissingFile, path.string());
  return parse_config(in, std::move(base));
}

inline std::string format_config(const TrainConfig& c) {
  std::ostringstream os;
  for (const auto& [k, handler] : detail::config_keys()) os << k << " = " << handler.get(c) << '\n';
  return os.str();
}

}  // namespace strokegan
