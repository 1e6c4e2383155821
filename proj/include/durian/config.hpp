#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "durian/advantage.hpp"
#include "durian/error.hpp"
#include "durian/objective.hpp"
#include "durian/reward.hpp"
#include "durian/sim/task.hpp"

namespace durian {

enum class ObjectiveKind { grpo, dapo };
enum class QuantileScope { batch, global };

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::size_t steps = 200;
  std::size_t batch_size = 64;
  std::size_t rollout = 8;
  ObjectiveKind objective = ObjectiveKind::dapo;
  ObjectiveConfig clip;
  CombineWeights alpha;
  int groups_b = 12;
  double quantile_low = 0.25;
  double quantile_high = 0.75;
  QuantileScope quantile_scope = QuantileScope::batch;
  bool regroup = true;
  bool normalize_logprob = true;
  bool dynamic_sampling = true;
  bool mask_before_std = true;
  RewardWeights reward;
  OverlongShaping overlong;
  double entropy_min = 0.0;
  double entropy_max = 2.0;
  double hardness_min = 0.0;
  double hardness_max = 1.0;
  sim::TaskOptions task;
  std::size_t max_len = 12;
  double temperature = 1.0;
  // Tuned for the toy policy; large models train at around 1e-6.
  double lr = 0.2;
  std::size_t epochs = 1;
  std::size_t dataset_size = 512;
  std::size_t threads = 1;
  std::size_t diag_every = 1;
  std::filesystem::path output_dir = "out";

  void validate() const;
};

inline Error config_error(std::string_view key, const std::string& what) {
  return Error(ErrorKind::invalid_config, std::string(key) + ": " + what);
}

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline double parse_real(std::string_view key, const std::string& v) {
  char* end = nullptr;
  const double d = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size() || !std::isfinite(d)) {
    throw config_error(key, "expected a real number, got '" + v + "'");
  }
  return d;
}

inline std::uint64_t parse_unsigned(std::string_view key, const std::string& v) {
  char* end = nullptr;
  if (v.empty() || v.front() == '-') throw config_error(key, "expected a nonnegative integer, got '" + v + "'");
  const unsigned long long u = std::strtoull(v.c_str(), &end, 10);
  if (end != v.c_str() + v.size()) throw config_error(key, "expected a nonnegative integer, got '" + v + "'");
  return u;
}

inline bool parse_flag(std::string_view key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw config_error(key, "expected true/false, got '" + v + "'");
}

// Shortest of %.6g / %.17g that reads back to the same double.
inline std::string real_text(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  if (std::strtod(buf, nullptr) != v) std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string flag_text(bool b) { return b ? "true" : "false"; }

}  // namespace detail

struct ConfigField {
  std::string key;
  std::string help;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

inline const std::vector<ConfigField>& config_fields() {
  using namespace detail;
  using C = ExperimentConfig;
  auto real = [](std::string key, std::string help, auto member) {
    return ConfigField{key, std::move(help),
                       [key, member](C& c, const std::string& v) { member(c) = parse_real(key, v); },
                       [member](const C& c) { return real_text(member(c)); }};
  };
  auto count = [](std::string key, std::string help, auto member) {
    return ConfigField{key, std::move(help),
                       [key, member](C& c, const std::string& v) {
                         member(c) = static_cast<std::remove_reference_t<decltype(member(c))>>(parse_unsigned(key, v));
                       },
                       [member](const C& c) { return std::to_string(member(c)); }};
  };
  auto flag = [](std::string key, std::string help, auto member) {
    return ConfigField{key, std::move(help),
                       [key, member](C& c, const std::string& v) { member(c) = parse_flag(key, v); },
                       [member](const C& c) { return flag_text(member(c)); }};
  };

  static const std::vector<ConfigField> fields = {
      count("seed", "base RNG seed (falls back to $DURIAN_SEED)", [](auto& c) -> auto& { return c.seed; }),
      count("steps", "training steps", [](auto& c) -> auto& { return c.steps; }),
      count("batch-size", "samples per step (B)", [](auto& c) -> auto& { return c.batch_size; }),
      count("rollout", "responses per sample (G)", [](auto& c) -> auto& { return c.rollout; }),
      ConfigField{"objective", "surrogate objective: grpo | dapo",
                  [](C& c, const std::string& v) {
                    if (v == "grpo") c.objective = ObjectiveKind::grpo;
                    else if (v == "dapo") c.objective = ObjectiveKind::dapo;
                    else throw config_error("objective", "expected grpo or dapo, got '" + v + "'");
                  },
                  [](const C& c) { return std::string(c.objective == ObjectiveKind::grpo ? "grpo" : "dapo"); }},
      real("eps", "GRPO clip range", [](auto& c) -> auto& { return c.clip.eps; }),
      real("eps-low", "DAPO lower clip range", [](auto& c) -> auto& { return c.clip.eps_low; }),
      real("eps-high", "DAPO upper clip range", [](auto& c) -> auto& { return c.clip.eps_high; }),
      real("beta", "KL penalty weight (GRPO only)", [](auto& c) -> auto& { return c.clip.beta; }),
      ConfigField{"loss-style", "length weighting: auto | response-mean | token-mean",
                  [](C& c, const std::string& v) {
                    if (v == "auto") c.clip.loss_style.reset();
                    else if (v == "response-mean") c.clip.loss_style = LossStyle::response_mean;
                    else if (v == "token-mean") c.clip.loss_style = LossStyle::token_mean;
                    else throw config_error("loss-style", "expected auto, response-mean or token-mean, got '" + v + "'");
                  },
                  [](const C& c) {
                    if (!c.clip.loss_style) return std::string("auto");
                    return std::string(*c.clip.loss_style == LossStyle::response_mean ? "response-mean" : "token-mean");
                  }},
      ConfigField{"alpha", "combination weights alpha_ori,alpha_percep,alpha_reason",
                  [](C& c, const std::string& v) {
                    std::vector<double> parts;
                    std::stringstream ss(v);
                    std::string item;
                    while (std::getline(ss, item, ',')) parts.push_back(parse_real("alpha", trim(item)));
                    if (parts.size() != 3) throw config_error("alpha", "expected three comma-separated weights");
                    c.alpha = {parts[0], parts[1], parts[2]};
                  },
                  [](const C& c) {
                    return real_text(c.alpha.alpha_ori) + "," + real_text(c.alpha.alpha_percep) + "," +
                           real_text(c.alpha.alpha_reason);
                  }},
      ConfigField{"groups-b", "reasoning-difficulty groups (b)",
                  [](C& c, const std::string& v) { c.groups_b = static_cast<int>(parse_unsigned("groups-b", v)); },
                  [](const C& c) { return std::to_string(c.groups_b); }},
      real("quantile-low", "lower perceptual quantile level", [](auto& c) -> auto& { return c.quantile_low; }),
      real("quantile-high", "upper perceptual quantile level", [](auto& c) -> auto& { return c.quantile_high; }),
      ConfigField{"quantile-scope", "perceptual thresholds from: batch | global",
                  [](C& c, const std::string& v) {
                    if (v == "batch") c.quantile_scope = QuantileScope::batch;
                    else if (v == "global") c.quantile_scope = QuantileScope::global;
                    else throw config_error("quantile-scope", "expected batch or global, got '" + v + "'");
                  },
                  [](const C& c) { return std::string(c.quantile_scope == QuantileScope::batch ? "batch" : "global"); }},
      flag("regroup", "compute difficulty-grouped advantages", [](auto& c) -> auto& { return c.regroup; }),
      flag("normalize-logprob", "per-token mean for confidence", [](auto& c) -> auto& { return c.normalize_logprob; }),
      flag("dynamic-sampling", "mask zero-variance rows", [](auto& c) -> auto& { return c.dynamic_sampling; }),
      flag("mask-before-std", "exclude masked rows from shared stds", [](auto& c) -> auto& { return c.mask_before_std; }),
      real("reward-format-weight", "weight of the format reward", [](auto& c) -> auto& { return c.reward.format; }),
      real("reward-accuracy-weight", "weight of the accuracy reward", [](auto& c) -> auto& { return c.reward.accuracy; }),
      flag("overlong-shaping", "linear penalty for long responses", [](auto& c) -> auto& { return c.overlong.enabled; }),
      count("soft-cap", "overlong penalty starts after this length", [](auto& c) -> auto& { return c.overlong.soft_cap; }),
      count("hard-cap", "overlong penalty reaches -1 at this length", [](auto& c) -> auto& { return c.overlong.hard_cap; }),
      real("entropy-min", "lowest target image entropy", [](auto& c) -> auto& { return c.entropy_min; }),
      real("entropy-max", "highest target image entropy", [](auto& c) -> auto& { return c.entropy_max; }),
      real("hardness-min", "lowest task hardness", [](auto& c) -> auto& { return c.hardness_min; }),
      real("hardness-max", "highest task hardness", [](auto& c) -> auto& { return c.hardness_max; }),
      count("patches", "patches per image (P)", [](auto& c) -> auto& { return c.task.dims.patches; }),
      count("feature-dim", "feature dimension (d)", [](auto& c) -> auto& { return c.task.dims.feature_dim; }),
      count("context-dim", "question context dimension (m)", [](auto& c) -> auto& { return c.task.dims.context_dim; }),
      count("answers", "answer classes (K)", [](auto& c) -> auto& { return c.task.dims.answers; }),
      real("separability", "context signal strength at hardness 0", [](auto& c) -> auto& { return c.task.separability; }),
      count("max-len", "maximum response length", [](auto& c) -> auto& { return c.max_len; }),
      real("temperature", "sampling temperature", [](auto& c) -> auto& { return c.temperature; }),
      real("lr", "gradient-ascent step size", [](auto& c) -> auto& { return c.lr; }),
      count("epochs", "optimization passes per rollout batch", [](auto& c) -> auto& { return c.epochs; }),
      count("dataset-size", "tasks in the training pool", [](auto& c) -> auto& { return c.dataset_size; }),
      count("threads", "rollout worker threads", [](auto& c) -> auto& { return c.threads; }),
      count("diag-every", "write per-sample diagnostics every N steps (0 = never)",
            [](auto& c) -> auto& { return c.diag_every; }),
      ConfigField{"output-dir", "directory for reports",
                  [](C& c, const std::string& v) {
                    if (v.empty()) throw config_error("output-dir", "must not be empty");
                    c.output_dir = v;
                  },
                  [](const C& c) { return c.output_dir.string(); }},
  };
  return fields;
}

inline const ConfigField* find_config_field(std::string_view key) {
  for (const auto& f : config_fields())
    if (f.key == key) return &f;
  return nullptr;
}

inline void set_config_value(ExperimentConfig& cfg, std::string_view key, const std::string& value) {
  const auto* f = find_config_field(key);
  if (!f) throw config_error(key, "unknown key");
  f->set(cfg, value);
}

inline void ExperimentConfig::validate() const {
  auto require = [](bool ok, std::string_view key, const std::string& what) {
    if (!ok) throw config_error(key, what);
  };
  require(steps >= 1, "steps", "must be >= 1");
  require(batch_size >= 4, "batch-size", "must be >= 4");
  require(rollout >= 2, "rollout", "must be >= 2");
  require(groups_b >= 1, "groups-b", "must be >= 1");
  require(static_cast<std::size_t>(groups_b) <= batch_size, "groups-b",
          "must not exceed batch-size (" + std::to_string(batch_size) + ")");
  require(0.0 <= quantile_low && quantile_low <= quantile_high && quantile_high <= 1.0, "quantile-low",
          "quantile levels must satisfy 0 <= quantile-low <= quantile-high <= 1");
  require(clip.eps > 0.0 && clip.eps < 1.0, "eps", "must lie in (0, 1)");
  require(clip.eps_low > 0.0 && clip.eps_low < 1.0, "eps-low", "must lie in (0, 1)");
  require(clip.eps_high >= clip.eps_low, "eps-high", "must be >= eps-low");
  require(clip.beta >= 0.0, "beta", "must be >= 0");
  try {
    alpha.validate();
  } catch (const Error& e) {
    throw config_error("alpha", e.what());
  }
  try {
    reward.validate();
  } catch (const Error& e) {
    throw config_error("reward-format-weight", e.what());
  }
  require(!overlong.enabled || overlong.soft_cap < overlong.hard_cap, "soft-cap", "must be below hard-cap");
  const auto& d = task.dims;
  require(d.patches >= 2, "patches", "must be >= 2");
  require(d.feature_dim >= 1, "feature-dim", "must be >= 1");
  require(d.context_dim >= 1, "context-dim", "must be >= 1");
  require(d.answers >= 2, "answers", "must be >= 2");
  const double max_h = std::log(static_cast<double>(d.effective_rank()));
  require(entropy_min >= 0.0, "entropy-min", "must be >= 0");
  require(entropy_max >= entropy_min, "entropy-max", "must be >= entropy-min");
  require(entropy_max <= max_h + 1e-12, "entropy-max",
          "must not exceed log(min(patches - 1, feature-dim)) = " + detail::real_text(max_h));
  require(hardness_min >= 0.0 && hardness_min <= 1.0, "hardness-min", "must lie in [0, 1]");
  require(hardness_max >= hardness_min && hardness_max <= 1.0, "hardness-max", "must lie in [hardness-min, 1]");
  require(task.separability >= 0.0, "separability", "must be >= 0");
  require(max_len >= 3, "max-len", "must be >= 3");
  require(temperature > 0.0, "temperature", "must be > 0");
  require(lr >= 0.0, "lr", "must be >= 0");
  require(epochs >= 1, "epochs", "must be >= 1");
  require(dataset_size >= 1, "dataset-size", "must be >= 1");
  require(threads >= 1, "threads", "must be >= 1");
}

// Flat "key = value" lines, '#' starts a comment.
inline std::vector<std::pair<std::string, std::string>> parse_config_text(std::string_view text,
                                                                          const std::string& source) {
  std::vector<std::pair<std::string, std::string>> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const std::string trimmed = detail::trim(line);
    if (trimmed.empty()) continue;
    const auto eq = trimmed.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::invalid_config, source + ":" + std::to_string(line_no) + ": expected 'key = value'");
    }
    out.emplace_back(detail::trim(std::string_view(trimmed).substr(0, eq)),
                     detail::trim(std::string_view(trimmed).substr(eq + 1)));
  }
  return out;
}

// Applies file values, then overrides, then the DURIAN_SEED fallback when no
// seed was given explicitly, and validates the result.
inline ExperimentConfig resolve_config(const std::optional<std::filesystem::path>& file,
                                       const std::vector<std::pair<std::string, std::string>>& overrides) {
  ExperimentConfig cfg;
  bool seed_given = false;
  if (file) {
    std::ifstream in(*file);
    if (!in) throw Error(ErrorKind::io, "cannot read config file " + file->string());
    std::stringstream buf;
    buf << in.rdbuf();
    for (const auto& [k, v] : parse_config_text(buf.str(), file->string())) {
      set_config_value(cfg, k, v);
      seed_given |= k == "seed";
    }
  }
  for (const auto& [k, v] : overrides) {
    set_config_value(cfg, k, v);
    seed_given |= k == "seed";
  }
  if (!seed_given) {
    if (const char* env = std::getenv("DURIAN_SEED"); env && *env) {
      set_config_value(cfg, "seed", env);
    }
  }
  cfg.validate();
  return cfg;
}

inline std::string echo_config(const ExperimentConfig& cfg) {
  std::string out = "# resolved experiment configuration\n";
  for (const auto& f : config_fields()) out += f.key + " = " + f.get(cfg) + "\n";
  return out;
}

}  // namespace durian
