#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "durian/advantage.hpp"
#include "durian/error.hpp"

namespace durian {

// Evaluation of one sampled response under the current policy.
//
// new_log_dists[t] holds the current policy's log-probabilities over the whole
// vocabulary at step t; the sampled token's entry is the "new" log-prob. The
// surrogate and KL terms are differentiated with respect to these entries,
// treated as free variables (the caller chains through its own softmax).
// ref_dists[t] holds reference-policy probabilities and may be left empty when
// no KL term is needed.
struct ResponseEval {
  std::vector<int> tokens;
  std::vector<double> old_logprobs;
  std::vector<std::vector<double>> new_log_dists;
  std::vector<std::vector<double>> ref_dists;

  std::size_t length() const noexcept { return tokens.size(); }
  double new_logprob(std::size_t t) const { return new_log_dists[t][static_cast<std::size_t>(tokens[t])]; }
};

// B x G responses in row-major (sample, rollout) order.
struct PolicyEval {
  std::size_t batch = 0;
  std::size_t group = 0;
  std::vector<ResponseEval> responses;
};

enum class LossStyle {
  response_mean,  // 1/G sum_i 1/|o_i| sum_t
  token_mean,     // 1/sum_i |o_i| sum_i sum_t
};

struct ObjectiveConfig {
  double eps = 0.2;
  double eps_low = 0.2;
  double eps_high = 0.28;
  double beta = 0.01;
  // Overrides the objective's native length weighting when set.
  std::optional<LossStyle> loss_style;

  void validate() const {
    if (!(eps > 0.0 && eps < 1.0)) throw Error(ErrorKind::invalid_config, "eps must lie in (0, 1)");
    if (!(eps_low > 0.0 && eps_low < 1.0)) throw Error(ErrorKind::invalid_config, "eps-low must lie in (0, 1)");
    if (!(eps_high > 0.0)) throw Error(ErrorKind::invalid_config, "eps-high must be positive");
    if (eps_low > eps_high) throw Error(ErrorKind::invalid_config, "eps-low must not exceed eps-high");
    if (!(beta >= 0.0) || !std::isfinite(beta)) throw Error(ErrorKind::invalid_config, "beta must be >= 0");
  }
};

struct ObjectiveResult {
  double loss = 0.0;
  // d loss / d new_log_dists, flattened per response as [t * vocab + k].
  std::vector<std::vector<double>> grads;
  double kl = 0.0;
  double clip_frac = 0.0;
  double mean_abs_ratio_dev = 0.0;
  double max_abs_ratio_dev = 0.0;
  std::size_t active_rows = 0;
  std::size_t active_tokens = 0;
};

namespace detail {

inline void check_eval(const PolicyEval& eval) {
  if (eval.responses.size() != eval.batch * eval.group) {
    throw Error(ErrorKind::invalid_input, "policy evaluation does not hold batch x group responses");
  }
  for (std::size_t k = 0; k < eval.responses.size(); ++k) {
    const auto& r = eval.responses[k];
    if (r.old_logprobs.size() != r.tokens.size() || r.new_log_dists.size() != r.tokens.size()) {
      throw Error(ErrorKind::invalid_input, "response " + std::to_string(k) + ": old/new sequences misaligned");
    }
    if (!r.ref_dists.empty() && r.ref_dists.size() != r.tokens.size()) {
      throw Error(ErrorKind::invalid_input, "response " + std::to_string(k) + ": reference sequence misaligned");
    }
    for (std::size_t t = 0; t < r.tokens.size(); ++t) {
      const auto tok = r.tokens[t];
      if (tok < 0 || static_cast<std::size_t>(tok) >= r.new_log_dists[t].size()) {
        throw Error(ErrorKind::invalid_input, "response " + std::to_string(k) + ": token outside vocabulary");
      }
      if (!r.ref_dists.empty() && r.ref_dists[t].size() != r.new_log_dists[t].size()) {
        throw Error(ErrorKind::invalid_input, "response " + std::to_string(k) + ": reference vocabulary differs");
      }
    }
  }
}

inline void check_reference(const std::vector<double>& q) {
  double sum = 0.0;
  for (double v : q) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw Error(ErrorKind::invalid_input, "reference distribution must be strictly positive");
    }
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-6) {
    throw Error(ErrorKind::invalid_input, "reference distribution sums to " + std::to_string(sum));
  }
}

// KL(new || ref) at one step, accumulating its gradient (scaled by `scale`)
// into grad when non-null.
inline double token_kl(const std::vector<double>& log_p, const std::vector<double>& q, double scale, double* grad) {
  check_reference(q);
  double kl = 0.0;
  for (std::size_t k = 0; k < log_p.size(); ++k) {
    const double p = std::exp(log_p[k]);
    const double diff = log_p[k] - std::log(q[k]);
    kl += p * diff;
    if (grad) grad[k] += scale * p * (diff + 1.0);
  }
  return kl;
}

// Per-response weights realizing the chosen length normalization, averaged
// over active rows. A response is active when it has token advantages.
inline std::vector<double> response_weights(const PolicyEval& eval, const TokenAdvantages& adv, LossStyle style,
                                            std::size_t& active_rows) {
  std::vector<std::size_t> n_active(eval.batch, 0);
  std::vector<std::size_t> tokens(eval.batch, 0);
  for (std::size_t k = 0; k < eval.responses.size(); ++k) {
    if (adv[k].empty()) continue;
    ++n_active[k / eval.group];
    tokens[k / eval.group] += eval.responses[k].length();
  }
  active_rows = static_cast<std::size_t>(std::count_if(n_active.begin(), n_active.end(), [](auto n) { return n > 0; }));

  std::vector<double> w(eval.responses.size(), 0.0);
  for (std::size_t k = 0; k < eval.responses.size(); ++k) {
    if (adv[k].empty()) continue;
    const std::size_t s = k / eval.group;
    const double rows = static_cast<double>(active_rows);
    w[k] = style == LossStyle::response_mean
               ? 1.0 / (rows * static_cast<double>(n_active[s]) * static_cast<double>(eval.responses[k].length()))
               : 1.0 / (rows * static_cast<double>(tokens[s]));
  }
  return w;
}

inline ObjectiveResult clipped_surrogate(const PolicyEval& eval, const TokenAdvantages& adv, double clip_low,
                                         double clip_high, double beta, LossStyle style) {
  check_eval(eval);
  if (adv.size() != eval.responses.size()) {
    throw Error(ErrorKind::invalid_input, "token advantages do not match the batch");
  }
  for (std::size_t k = 0; k < adv.size(); ++k) {
    if (!adv[k].empty() && adv[k].size() != eval.responses[k].length()) {
      throw Error(ErrorKind::invalid_input, "response " + std::to_string(k) + ": advantage length mismatch");
    }
    if (!adv[k].empty() && beta > 0.0 && eval.responses[k].ref_dists.empty()) {
      throw Error(ErrorKind::invalid_input, "KL term requested without reference distributions");
    }
  }

  ObjectiveResult out;
  out.grads.resize(eval.responses.size());
  const auto weights = response_weights(eval, adv, style, out.active_rows);

  double objective = 0.0;
  double kl_total = 0.0;
  std::size_t clipped = 0;
  double dev_sum = 0.0;
  for (std::size_t k = 0; k < eval.responses.size(); ++k) {
    const auto& r = eval.responses[k];
    const std::size_t vocab = r.tokens.empty() ? 0 : r.new_log_dists.front().size();
    out.grads[k].assign(r.length() * vocab, 0.0);
    if (adv[k].empty()) continue;
    const double w = weights[k];
    for (std::size_t t = 0; t < r.length(); ++t) {
      const double ratio = std::exp(r.new_logprob(t) - r.old_logprobs[t]);
      const double a = adv[k][t];
      const double unclipped = ratio * a;
      const double clipped_ratio = std::clamp(ratio, 1.0 - clip_low, 1.0 + clip_high);
      const double clipped_term = clipped_ratio * a;
      double* g = out.grads[k].data() + t * vocab;
      if (unclipped <= clipped_term) {
        objective += w * unclipped;
        g[static_cast<std::size_t>(r.tokens[t])] -= w * unclipped;
      } else {
        objective += w * clipped_term;
        ++clipped;
      }
      if (beta > 0.0) {
        const double kl = token_kl(r.new_log_dists[t], r.ref_dists[t], beta * w, g);
        objective -= beta * w * kl;
        kl_total += w * kl;
      }
      const double dev = std::abs(ratio - 1.0);
      dev_sum += dev;
      out.max_abs_ratio_dev = std::max(out.max_abs_ratio_dev, dev);
      ++out.active_tokens;
    }
  }
  out.loss = -objective;
  out.kl = kl_total;
  if (out.active_tokens > 0) {
    out.clip_frac = static_cast<double>(clipped) / static_cast<double>(out.active_tokens);
    out.mean_abs_ratio_dev = dev_sum / static_cast<double>(out.active_tokens);
  }
  return out;
}

}  // namespace detail

// exp(new - old) per token, one vector per response.
inline std::vector<std::vector<double>> importance_ratios(const PolicyEval& eval) {
  detail::check_eval(eval);
  std::vector<std::vector<double>> out(eval.responses.size());
  for (std::size_t k = 0; k < eval.responses.size(); ++k) {
    const auto& r = eval.responses[k];
    out[k].reserve(r.length());
    for (std::size_t t = 0; t < r.length(); ++t) out[k].push_back(std::exp(r.new_logprob(t) - r.old_logprobs[t]));
  }
  return out;
}

// Clipped surrogate with symmetric clip range, per-response length
// normalization and a KL penalty against the reference policy. Returns the
// negated objective as the loss.
inline ObjectiveResult grpo_surrogate(const PolicyEval& eval, const TokenAdvantages& adv, const ObjectiveConfig& cfg) {
  cfg.validate();
  return detail::clipped_surrogate(eval, adv, cfg.eps, cfg.eps, cfg.beta,
                                   cfg.loss_style.value_or(LossStyle::response_mean));
}

// Decoupled clip range, token-level normalization over the whole group and no
// KL term.
inline ObjectiveResult dapo_surrogate(const PolicyEval& eval, const TokenAdvantages& adv, const ObjectiveConfig& cfg) {
  cfg.validate();
  return detail::clipped_surrogate(eval, adv, cfg.eps_low, cfg.eps_high, 0.0,
                                   cfg.loss_style.value_or(LossStyle::token_mean));
}

// Exact categorical KL(new || ref), averaged over every response with the
// given length weighting.
inline double kl_penalty(const PolicyEval& eval, LossStyle style = LossStyle::response_mean) {
  detail::check_eval(eval);
  TokenAdvantages all(eval.responses.size());
  for (std::size_t k = 0; k < all.size(); ++k) {
    if (eval.responses[k].ref_dists.empty() && eval.responses[k].length() > 0) {
      throw Error(ErrorKind::invalid_input, "response " + std::to_string(k) + " has no reference distributions");
    }
    all[k].assign(eval.responses[k].length(), 0.0);
  }
  std::size_t rows = 0;
  const auto w = detail::response_weights(eval, all, style, rows);
  double total = 0.0;
  for (std::size_t k = 0; k < eval.responses.size(); ++k) {
    const auto& r = eval.responses[k];
    for (std::size_t t = 0; t < r.length(); ++t)
      total += w[k] * detail::token_kl(r.new_log_dists[t], r.ref_dists[t], 0.0, nullptr);
  }
  return total;
}

struct SamplingFilter {
  std::vector<bool> row_kept;
  std::vector<bool> valid;  // B x G, false for every response of a dropped row
  std::size_t kept_rows = 0;
  std::size_t masked_rows = 0;

  double masked_fraction() const {
    const auto total = kept_rows + masked_rows;
    return total ? static_cast<double>(masked_rows) / static_cast<double>(total) : 0.0;
  }
};

// Drops rows whose rewards are all identical: they carry no learning signal.
inline SamplingFilter dynamic_sampling_filter(const RewardMatrix& r) {
  SamplingFilter f;
  f.row_kept.assign(r.batch(), false);
  f.valid.assign(r.batch() * r.group(), false);
  for (std::size_t s = 0; s < r.batch(); ++s) {
    const auto row = r.row(s);
    const bool constant = std::all_of(row.begin(), row.end(), [&](double v) { return v == row.front(); });
    if (constant) {
      ++f.masked_rows;
      continue;
    }
    f.row_kept[s] = true;
    ++f.kept_rows;
    for (std::size_t i = 0; i < r.group(); ++i) f.valid[s * r.group() + i] = r.valid(s, i);
  }
  return f;
}

// Overlong reward shaping: a linear penalty from 0 at soft_cap down to -1 at
// hard_cap, applied to the reward and clamped back into [0, 1].
struct OverlongShaping {
  bool enabled = false;
  std::size_t soft_cap = 8;
  std::size_t hard_cap = 12;

  void validate() const {
    if (enabled && soft_cap >= hard_cap) {
      throw Error(ErrorKind::invalid_config, "overlong soft-cap must be below hard-cap");
    }
  }
};

inline double overlong_penalty(std::size_t length, const OverlongShaping& shaping) {
  if (!shaping.enabled || length <= shaping.soft_cap) return 0.0;
  if (length >= shaping.hard_cap) return -1.0;
  return -static_cast<double>(length - shaping.soft_cap) / static_cast<double>(shaping.hard_cap - shaping.soft_cap);
}

inline double shape_reward(double reward, std::size_t length, const OverlongShaping& shaping) {
  return std::clamp(reward + overlong_penalty(length, shaping), 0.0, 1.0);
}

}  // namespace durian
