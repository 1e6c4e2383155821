#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <thread>
#include <utility>
#include <vector>

#include "durian/advantage.hpp"
#include "durian/config.hpp"
#include "durian/difficulty.hpp"
#include "durian/objective.hpp"
#include "durian/reward.hpp"
#include "durian/sim/extreme_stats.hpp"
#include "durian/sim/policy.hpp"
#include "durian/sim/random.hpp"
#include "durian/sim/task.hpp"

namespace durian::sim {

struct StepMetrics {
  std::size_t step = 0;
  double mean_reward = 0.0;
  double mean_accuracy = 0.0;
  double mean_format = 0.0;
  double mean_length = 0.0;
  double loss = 0.0;
  double kl = 0.0;
  double clip_frac = 0.0;
  double mean_abs_ratio_dev = 0.0;
  double max_abs_ratio_dev = 0.0;
  ExtremeStats extreme;
  std::size_t masked_rows = 0;
  double masked_frac = 0.0;
  bool starved = false;
  double max_abs_adv_grpo = 0.0;
  double max_abs_adv_combined = 0.0;
  std::vector<double> percep_std;
  std::vector<double> reason_std;
  int reason_groups = 0;
};

struct SampleDiag {
  std::size_t task_id = 0;
  double entropy = 0.0;
  double confidence = 0.0;
  int percep_label = -1;
  int reason_label = -1;
  bool masked = false;
  std::vector<double> rewards;
  std::vector<int> accuracy;
  std::vector<double> adv_grpo;
  std::vector<double> adv_perceptual;
  std::vector<double> adv_reasoning;
  std::vector<double> adv_combined;
};

struct StepResult {
  StepMetrics metrics;
  std::vector<SampleDiag> samples;
};

struct TrainerState {
  TrainerState(ToyPolicy initial, std::uint64_t seed_) : policy(initial), seed(seed_), reference_(std::move(initial)) {}

  ToyPolicy policy;
  const ToyPolicy& reference() const noexcept { return reference_; }

  std::size_t step = 0;
  std::uint64_t seed = 0;
  // Perceptual thresholds precomputed over the whole task pool
  // (quantile-scope = global).
  std::optional<std::pair<double, double>> global_thresholds;
  std::vector<StepMetrics> history;

 private:
  ToyPolicy reference_;
};

// Runs fn(i) for i in [0, n) on `threads` workers with a static partition.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w * n / threads; i < (w + 1) * n / threads; ++i) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

namespace detail {

inline AdvantageMatrix zero_advantages(const RewardMatrix& r, AdvantageKind kind) {
  AdvantageMatrix a;
  a.batch = r.batch();
  a.group = r.group();
  a.values.assign(r.batch() * r.group(), 0.0);
  a.valid = r.valid_flags();
  a.kind = kind;
  return a;
}

inline double max_abs(const AdvantageMatrix& a) {
  double m = 0.0;
  for (double v : a.values) m = std::max(m, std::abs(v));
  return m;
}

inline std::vector<double> row_of(const AdvantageMatrix& a, std::size_t s) {
  const auto r = a.row(s);
  return {r.begin(), r.end()};
}

}  // namespace detail

// One training step: rollouts, rewards, dynamic-sampling mask, both
// difficulty groupings, the three advantage views and their combination,
// then the chosen surrogate and a plain gradient-ascent update.
inline StepResult train_step(TrainerState& state, std::span<const SyntheticTask* const> batch,
                             const ExperimentConfig& cfg) {
  const std::size_t b = batch.size();
  const std::size_t g = cfg.rollout;
  if (b < 4 || b < static_cast<std::size_t>(cfg.groups_b)) {
    throw config_error("batch-size", "a step needs at least 4 samples and at least groups-b samples");
  }
  const std::size_t step = ++state.step;

  std::vector<std::vector<ResponseRecord>> rolls(b);
  parallel_for(b, cfg.threads, [&](std::size_t s) {
    Rng rng = Rng::stream({state.seed, step, s});
    rolls[s] = rollout(state.policy, *batch[s], g, cfg.max_len, rng);
  });

  StepResult result;
  StepMetrics& m = result.metrics;
  m.step = step;

  std::vector<double> rewards(b * g);
  std::vector<std::vector<int>> accuracy(b, std::vector<int>(g));
  std::vector<std::size_t> lengths(b * g);
  double fmt_sum = 0.0;
  for (std::size_t s = 0; s < b; ++s) {
    const std::string truth = std::to_string(batch[s]->truth);
    for (std::size_t i = 0; i < g; ++i) {
      const auto& r = rolls[s][i];
      const auto parsed = parse_tokens(r.tokens);
      const int f = format_reward(parsed);
      const int a = accuracy_reward(parsed, truth);
      accuracy[s][i] = a;
      rewards[s * g + i] = shape_reward(overall_reward(f, a, cfg.reward), r.length(), cfg.overlong);
      lengths[s * g + i] = r.length();
      fmt_sum += f;
      m.mean_accuracy += a;
      m.mean_length += static_cast<double>(r.length());
    }
  }
  const double n_resp = static_cast<double>(b * g);
  m.mean_accuracy /= n_resp;
  m.mean_format = fmt_sum / n_resp;
  m.mean_length /= n_resp;
  m.mean_reward = std::accumulate(rewards.begin(), rewards.end(), 0.0) / n_resp;
  m.extreme = extreme_stats(accuracy);

  RewardMatrix reward_matrix(b, g, rewards);
  if (cfg.dynamic_sampling) {
    const auto filter = dynamic_sampling_filter(reward_matrix);
    reward_matrix.set_valid_flags(filter.valid);
    m.masked_rows = filter.masked_rows;
    m.masked_frac = filter.masked_fraction();
  }

  std::vector<double> entropies(b);
  std::vector<double> confidences(b);
  for (std::size_t s = 0; s < b; ++s) {
    entropies[s] = batch[s]->entropy;
    confidences[s] = sample_confidence(s, rolls[s], cfg.normalize_logprob).mean_logprob;
  }

  const AdvantageMatrix adv_grpo = grpo_advantage(reward_matrix);
  AdvantageMatrix adv_percep = detail::zero_advantages(reward_matrix, AdvantageKind::perceptual);
  AdvantageMatrix adv_reason = detail::zero_advantages(reward_matrix, AdvantageKind::reasoning);
  std::optional<GroupAssignment> percep_groups;
  std::optional<GroupAssignment> reason_groups;
  if (cfg.regroup) {
    percep_groups = cfg.quantile_scope == QuantileScope::global && state.global_thresholds
                        ? regroup_perceptual_at(entropies, state.global_thresholds->first,
                                                state.global_thresholds->second)
                        : regroup_perceptual(entropies, cfg.quantile_low, cfg.quantile_high);
    reason_groups = regroup_reasoning(confidences, cfg.groups_b);
    adv_percep = group_normalized_advantage(reward_matrix, *percep_groups, AdvantageKind::perceptual,
                                            default_std_floor, cfg.mask_before_std);
    adv_reason = group_normalized_advantage(reward_matrix, *reason_groups, AdvantageKind::reasoning,
                                            default_std_floor, cfg.mask_before_std);
    m.percep_std = adv_percep.group_std;
    m.reason_std = adv_reason.group_std;
    m.reason_groups = reason_groups->num_groups;
  }
  const AdvantageMatrix adv = combine_advantages(adv_grpo, adv_percep, adv_reason, cfg.alpha);
  m.max_abs_adv_grpo = detail::max_abs(adv_grpo);
  m.max_abs_adv_combined = detail::max_abs(adv);

  const bool write_diag = cfg.diag_every > 0 && (step - 1) % cfg.diag_every == 0;
  if (write_diag) {
    result.samples.resize(b);
    for (std::size_t s = 0; s < b; ++s) {
      auto& d = result.samples[s];
      d.task_id = batch[s]->id;
      d.entropy = entropies[s];
      d.confidence = confidences[s];
      d.percep_label = percep_groups ? percep_groups->labels[s] : -1;
      d.reason_label = reason_groups ? reason_groups->labels[s] : -1;
      d.masked = !reward_matrix.row_active(s);
      d.rewards.assign(rewards.begin() + static_cast<std::ptrdiff_t>(s * g),
                       rewards.begin() + static_cast<std::ptrdiff_t>((s + 1) * g));
      d.accuracy = accuracy[s];
      d.adv_grpo = detail::row_of(adv_grpo, s);
      d.adv_perceptual = detail::row_of(adv_percep, s);
      d.adv_reasoning = detail::row_of(adv_reason, s);
      d.adv_combined = detail::row_of(adv, s);
    }
  }

  bool any_active = false;
  for (std::size_t s = 0; s < b; ++s) any_active |= reward_matrix.row_active(s);
  if (!any_active) {
    m.starved = true;
    state.history.push_back(m);
    return result;
  }

  const TokenAdvantages token_adv = token_broadcast(adv, lengths);
  const bool use_kl = cfg.objective == ObjectiveKind::grpo && cfg.clip.beta > 0.0;
  const ToyPolicy& ref = state.reference();

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    PolicyEval eval;
    eval.batch = b;
    eval.group = g;
    eval.responses.resize(b * g);
    std::vector<std::vector<std::vector<double>>> phis(b * g);
    for (std::size_t s = 0; s < b; ++s) {
      for (std::size_t i = 0; i < g; ++i) {
        const std::size_t k = s * g + i;
        const auto& rec = rolls[s][i];
        auto& ev = eval.responses[k];
        ev.tokens = rec.tokens;
        ev.old_logprobs = rec.logprobs;
        if (token_adv[k].empty()) {
          // Masked: only the shapes matter.
          ev.new_log_dists.assign(rec.length(), std::vector<double>(state.policy.vocab(), 0.0));
          for (std::size_t t = 0; t < rec.length(); ++t)
            ev.new_log_dists[t][static_cast<std::size_t>(rec.tokens[t])] = rec.logprobs[t];
          continue;
        }
        int prev = -1;
        for (std::size_t t = 0; t < rec.length(); ++t) {
          phis[k].push_back(state.policy.features(*batch[s], prev));
          ev.new_log_dists.push_back(state.policy.log_distribution(phis[k].back()));
          if (use_kl) {
            auto q = ref.log_distribution(phis[k].back());
            for (auto& x : q) x = std::exp(x);
            ev.ref_dists.push_back(std::move(q));
          }
          prev = rec.tokens[t];
        }
      }
    }

    const ObjectiveResult obj = cfg.objective == ObjectiveKind::grpo ? grpo_surrogate(eval, token_adv, cfg.clip)
                                                                     : dapo_surrogate(eval, token_adv, cfg.clip);
    if (epoch == 0) {
      m.loss = obj.loss;
      m.kl = obj.kl;
      m.clip_frac = obj.clip_frac;
      m.mean_abs_ratio_dev = obj.mean_abs_ratio_dev;
      m.max_abs_ratio_dev = obj.max_abs_ratio_dev;
    }

    Matrix grad(state.policy.weights().rows(), state.policy.weights().cols());
    const std::size_t vocab = state.policy.vocab();
    for (std::size_t k = 0; k < eval.responses.size(); ++k) {
      if (token_adv[k].empty()) continue;
      for (std::size_t t = 0; t < eval.responses[k].length(); ++t) {
        state.policy.accumulate_gradient(phis[k][t], eval.responses[k].new_log_dists[t],
                                         std::span<const double>(obj.grads[k]).subspan(t * vocab, vocab), grad);
      }
    }
    auto w = state.policy.weights().data();
    const auto gd = grad.data();
    for (std::size_t j = 0; j < w.size(); ++j) w[j] -= cfg.lr * gd[j];
  }

  state.history.push_back(m);
  return result;
}

// Owns the task pool and the trainer state for one experiment.
class Trainer {
 public:
  explicit Trainer(const ExperimentConfig& cfg)
      : cfg_(cfg), state_(ToyPolicy(cfg.task.dims, cfg.temperature), cfg.seed) {
    cfg_.validate();
    Rng rng = Rng::stream({0xDA7A5E7ULL, cfg_.seed});
    dataset_.reserve(cfg_.dataset_size);
    for (std::size_t i = 0; i < cfg_.dataset_size; ++i) {
      const double h = rng.uniform(cfg_.entropy_min, cfg_.entropy_max);
      const double hard = rng.uniform(cfg_.hardness_min, cfg_.hardness_max);
      dataset_.push_back(generate_task(i, h, hard, cfg_.task, rng));
    }
    if (cfg_.quantile_scope == QuantileScope::global) {
      std::vector<double> all;
      all.reserve(dataset_.size());
      for (const auto& t : dataset_) all.push_back(t.entropy);
      state_.global_thresholds = {quantile(all, cfg_.quantile_low), quantile(all, cfg_.quantile_high)};
    }
  }

  const ExperimentConfig& config() const noexcept { return cfg_; }
  const std::vector<SyntheticTask>& dataset() const noexcept { return dataset_; }
  TrainerState& state() noexcept { return state_; }
  const TrainerState& state() const noexcept { return state_; }

  // Tasks for the next step: distinct pool members when the pool is large
  // enough, otherwise drawn with replacement.
  std::vector<const SyntheticTask*> next_batch() const {
    Rng rng = Rng::stream({0xBA7C4ULL, cfg_.seed, state_.step + 1});
    const std::size_t n = dataset_.size();
    std::vector<const SyntheticTask*> out;
    out.reserve(cfg_.batch_size);
    if (cfg_.batch_size <= n) {
      std::vector<std::size_t> idx(n);
      std::iota(idx.begin(), idx.end(), 0);
      for (std::size_t i = 0; i < cfg_.batch_size; ++i) {
        std::swap(idx[i], idx[i + rng.index(n - i)]);
        out.push_back(&dataset_[idx[i]]);
      }
    } else {
      for (std::size_t i = 0; i < cfg_.batch_size; ++i) out.push_back(&dataset_[rng.index(n)]);
    }
    return out;
  }

  StepResult step() {
    const auto batch = next_batch();
    return train_step(state_, batch, cfg_);
  }

 private:
  ExperimentConfig cfg_;
  TrainerState state_;
  std::vector<SyntheticTask> dataset_;
};

}  // namespace durian::sim
