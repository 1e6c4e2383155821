#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "durian/difficulty.hpp"
#include "durian/error.hpp"

namespace durian {

// B x G rewards in [0, 1]. `valid` marks responses that take part in the
// update; dynamic sampling clears whole rows.
class RewardMatrix {
 public:
  RewardMatrix() = default;
  RewardMatrix(std::size_t batch, std::size_t group, std::vector<double> values)
      : RewardMatrix(batch, group, std::move(values), std::vector<bool>(batch * group, true)) {}
  RewardMatrix(std::size_t batch, std::size_t group, std::vector<double> values, std::vector<bool> valid)
      : batch_(batch), group_(group), values_(std::move(values)), valid_(std::move(valid)) {
    if (values_.size() != batch_ * group_ || valid_.size() != batch_ * group_) {
      throw Error(ErrorKind::invalid_input, "reward matrix shape mismatch");
    }
    for (double v : values_) {
      if (!(v >= 0.0 && v <= 1.0)) {
        throw Error(ErrorKind::invalid_input, "reward outside [0, 1]");
      }
    }
  }

  std::size_t batch() const noexcept { return batch_; }
  std::size_t group() const noexcept { return group_; }

  double operator()(std::size_t s, std::size_t i) const { return values_[s * group_ + i]; }
  bool valid(std::size_t s, std::size_t i) const { return valid_[s * group_ + i]; }
  std::span<const double> row(std::size_t s) const { return {values_.data() + s * group_, group_}; }
  const std::vector<bool>& valid_flags() const noexcept { return valid_; }
  std::span<const double> values() const noexcept { return values_; }

  bool row_active(std::size_t s) const {
    for (std::size_t i = 0; i < group_; ++i)
      if (valid(s, i)) return true;
    return false;
  }

  void set_valid_flags(std::vector<bool> valid) {
    if (valid.size() != batch_ * group_) {
      throw Error(ErrorKind::invalid_input, "mask shape mismatch");
    }
    valid_ = std::move(valid);
  }

 private:
  std::size_t batch_ = 0;
  std::size_t group_ = 0;
  std::vector<double> values_;
  std::vector<bool> valid_;
};

enum class AdvantageKind { grpo, perceptual, reasoning, combined };

inline const char* to_string(AdvantageKind k) {
  switch (k) {
    case AdvantageKind::grpo: return "grpo";
    case AdvantageKind::perceptual: return "perceptual";
    case AdvantageKind::reasoning: return "reasoning";
    case AdvantageKind::combined: return "combined";
  }
  return "?";
}

struct AdvantageMatrix {
  std::size_t batch = 0;
  std::size_t group = 0;
  std::vector<double> values;
  std::vector<bool> valid;
  AdvantageKind kind = AdvantageKind::grpo;
  // grpo: rows whose own std fell below the floor (advantages zeroed).
  std::vector<bool> degenerate_rows;
  // perceptual / reasoning: shared std per difficulty group (0 if degenerate).
  std::vector<double> group_std;

  double operator()(std::size_t s, std::size_t i) const { return values[s * group + i]; }
  std::span<const double> row(std::size_t s) const { return {values.data() + s * group, group}; }
};

struct CombineWeights {
  double alpha_ori = 0.6;
  double alpha_percep = 0.2;
  double alpha_reason = 0.2;

  void validate() const {
    if (alpha_ori < 0.0 || alpha_percep < 0.0 || alpha_reason < 0.0 || !std::isfinite(alpha_ori) ||
        !std::isfinite(alpha_percep) || !std::isfinite(alpha_reason)) {
      throw Error(ErrorKind::invalid_config, "alpha weights must be finite and nonnegative");
    }
    if (alpha_ori + alpha_percep + alpha_reason <= 0.0) {
      throw Error(ErrorKind::invalid_config, "at least one alpha weight must be positive");
    }
  }
};

inline constexpr double default_std_floor = 1e-6;

namespace detail {

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // Bessel-corrected; 0 for fewer than two values
  std::size_t count = 0;
  bool constant = true;
};

inline MeanStd mean_std(std::span<const double> values) {
  MeanStd out;
  out.count = values.size();
  if (values.empty()) return out;
  double sum = 0.0;
  for (double v : values) {
    sum += v;
    if (v != values.front()) out.constant = false;
  }
  out.mean = sum / static_cast<double>(values.size());
  if (values.size() < 2 || out.constant) return out;
  double ss = 0.0;
  for (double v : values) ss += (v - out.mean) * (v - out.mean);
  out.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  return out;
}

inline std::vector<double> valid_row(const RewardMatrix& r, std::size_t s) {
  std::vector<double> out;
  out.reserve(r.group());
  for (std::size_t i = 0; i < r.group(); ++i)
    if (r.valid(s, i)) out.push_back(r(s, i));
  return out;
}

inline AdvantageMatrix blank_like(const RewardMatrix& r, AdvantageKind kind) {
  AdvantageMatrix a;
  a.batch = r.batch();
  a.group = r.group();
  a.values.assign(r.batch() * r.group(), 0.0);
  a.valid = r.valid_flags();
  a.kind = kind;
  return a;
}

// (r - own row mean) / denom on the valid entries of row s; constant rows get
// exact zeros.
inline void fill_row(const RewardMatrix& r, std::size_t s, const MeanStd& own, double denom, AdvantageMatrix& out) {
  if (own.constant) return;
  for (std::size_t i = 0; i < r.group(); ++i)
    if (r.valid(s, i)) out.values[s * r.group() + i] = (r(s, i) - own.mean) / denom;
}

inline void check_assignment(const RewardMatrix& r, const GroupAssignment& g) {
  if (g.labels.size() != r.batch()) {
    throw Error(ErrorKind::inconsistent_assignment, "assignment has " + std::to_string(g.labels.size()) +
                                                        " labels for a batch of " + std::to_string(r.batch()));
  }
  for (int l : g.labels) {
    if (l < 0 || l >= g.num_groups) {
      throw Error(ErrorKind::inconsistent_assignment, "label " + std::to_string(l) + " outside [0, " +
                                                          std::to_string(g.num_groups) + ")");
    }
  }
}

inline std::vector<MeanStd> pooled_stats(const RewardMatrix& r, const GroupAssignment& g, bool mask_before) {
  check_assignment(r, g);
  std::vector<std::vector<double>> pools(static_cast<std::size_t>(g.num_groups));
  for (std::size_t s = 0; s < r.batch(); ++s) {
    auto& pool = pools[static_cast<std::size_t>(g.labels[s])];
    for (std::size_t i = 0; i < r.group(); ++i)
      if (!mask_before || r.valid(s, i)) pool.push_back(r(s, i));
  }
  std::vector<MeanStd> out;
  out.reserve(pools.size());
  for (const auto& pool : pools) out.push_back(mean_std(pool));
  return out;
}

}  // namespace detail

// Per-sample normalization: each row is centered on its own mean and scaled
// by its own (Bessel-corrected) std.
inline AdvantageMatrix grpo_advantage(const RewardMatrix& r, double std_floor = default_std_floor) {
  if (r.group() < 2) {
    throw Error(ErrorKind::invalid_config, "per-sample normalization needs a rollout size >= 2");
  }
  AdvantageMatrix out = detail::blank_like(r, AdvantageKind::grpo);
  out.degenerate_rows.assign(r.batch(), false);
  for (std::size_t s = 0; s < r.batch(); ++s) {
    const auto own = detail::mean_std(detail::valid_row(r, s));
    if (own.std < std_floor) {
      out.degenerate_rows[s] = true;
      continue;
    }
    detail::fill_row(r, s, own, own.std, out);
  }
  return out;
}

// Bessel-corrected std of the rewards pooled over every member of each group.
// With mask_before set, masked responses are left out of the pools.
inline std::vector<double> shared_group_std(const RewardMatrix& r, const GroupAssignment& g, bool mask_before = true) {
  const auto stats = detail::pooled_stats(r, g, mask_before);
  std::vector<double> out;
  out.reserve(stats.size());
  for (std::size_t a = 0; a < stats.size(); ++a) {
    if (stats[a].count < 2) {
      throw Error(ErrorKind::degenerate_group, "group " + std::to_string(a) + " pools " +
                                                   std::to_string(stats[a].count) + " rewards, need >= 2");
    }
    out.push_back(stats[a].std);
  }
  return out;
}

// Numerator centered on the sample's own mean, denominator shared by its
// difficulty group. Groups whose pooled std is below the floor divide by the
// floor instead.
inline AdvantageMatrix group_normalized_advantage(const RewardMatrix& r, const GroupAssignment& g,
                                                  AdvantageKind kind, double std_floor = default_std_floor,
                                                  bool mask_before = true) {
  const auto stats = detail::pooled_stats(r, g, mask_before);
  AdvantageMatrix out = detail::blank_like(r, kind);
  out.group_std.reserve(stats.size());
  for (const auto& st : stats) out.group_std.push_back(st.count >= 2 ? st.std : 0.0);

  for (std::size_t s = 0; s < r.batch(); ++s) {
    const double pooled = out.group_std[static_cast<std::size_t>(g.labels[s])];
    const double denom = pooled < std_floor ? std_floor : pooled;
    detail::fill_row(r, s, detail::mean_std(detail::valid_row(r, s)), denom, out);
  }
  return out;
}

inline AdvantageMatrix combine_advantages(const AdvantageMatrix& grpo, const AdvantageMatrix& percep,
                                          const AdvantageMatrix& reason, const CombineWeights& w) {
  w.validate();
  for (const AdvantageMatrix* m : {&percep, &reason}) {
    if (m->batch != grpo.batch || m->group != grpo.group || m->values.size() != grpo.values.size()) {
      throw Error(ErrorKind::invalid_input, "advantage shapes differ");
    }
    if (m->valid != grpo.valid) {
      throw Error(ErrorKind::invalid_input, "advantage masks differ");
    }
  }
  AdvantageMatrix out;
  out.batch = grpo.batch;
  out.group = grpo.group;
  out.valid = grpo.valid;
  out.kind = AdvantageKind::combined;
  out.values.assign(grpo.values.size(), 0.0);
  // Zero-weight terms are skipped so that a single unit weight reproduces its
  // input exactly.
  const std::pair<double, const AdvantageMatrix*> terms[] = {
      {w.alpha_ori, &grpo}, {w.alpha_percep, &percep}, {w.alpha_reason, &reason}};
  for (const auto& [alpha, m] : terms) {
    if (alpha == 0.0) continue;
    for (std::size_t k = 0; k < out.values.size(); ++k) out.values[k] += alpha * m->values[k];
  }
  return out;
}

// Per-token advantages, one vector per response in row-major (s, i) order.
// Masked responses get an empty vector.
using TokenAdvantages = std::vector<std::vector<double>>;

inline TokenAdvantages token_broadcast(const AdvantageMatrix& a, std::span<const std::size_t> lengths) {
  if (lengths.size() != a.values.size()) {
    throw Error(ErrorKind::invalid_input, "length table does not match advantage shape");
  }
  TokenAdvantages out(a.values.size());
  for (std::size_t k = 0; k < a.values.size(); ++k) {
    if (!a.valid[k]) continue;
    if (lengths[k] == 0) {
      throw Error(ErrorKind::degenerate_response, "unmasked response " + std::to_string(k) + " has no tokens");
    }
    out[k].assign(lengths[k], a.values[k]);
  }
  return out;
}

}  // namespace durian
