#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "durian/error.hpp"
#include "durian/linalg.hpp"
#include "durian/response.hpp"
#include "durian/reward.hpp"
#include "durian/sim/random.hpp"
#include "durian/sim/task.hpp"

namespace durian::sim {

// Linear-softmax policy over the token alphabet. The logits at each step are
// W * phi / temperature where phi concatenates
//   one-hot(previous token, with a begin-of-sequence slot)
//   context vector
//   pooled image features
//   context vector gated on "previous token was the answer marker"
//   bias
class ToyPolicy {
 public:
  ToyPolicy() = default;
  ToyPolicy(const TaskDims& dims, double temperature)
      : dims_(dims),
        vocab_(static_cast<std::size_t>(tokens::vocab_size(static_cast<int>(dims.answers)))),
        temperature_(temperature),
        weights_(vocab_, feature_size()) {
    if (!(temperature > 0.0)) throw Error(ErrorKind::invalid_config, "temperature must be positive");
  }

  std::size_t vocab() const noexcept { return vocab_; }
  std::size_t feature_size() const noexcept {
    return (vocab_ + 1) + dims_.context_dim + dims_.feature_dim + dims_.context_dim + 1;
  }
  double temperature() const noexcept { return temperature_; }
  const TaskDims& dims() const noexcept { return dims_; }

  Matrix& weights() noexcept { return weights_; }
  const Matrix& weights() const noexcept { return weights_; }

  // prev < 0 means "start of sequence".
  std::vector<double> features(const SyntheticTask& task, int prev) const {
    std::vector<double> phi(feature_size(), 0.0);
    std::size_t at = 0;
    phi[prev < 0 ? vocab_ : static_cast<std::size_t>(prev)] = 1.0;
    at += vocab_ + 1;
    for (double c : task.context) phi[at++] = c;
    for (double p : task.pooled) phi[at++] = p;
    for (double c : task.context) phi[at++] = prev == tokens::mark ? c : 0.0;
    phi[at] = 1.0;
    return phi;
  }

  std::vector<double> log_distribution(std::span<const double> phi) const {
    std::vector<double> z(vocab_, 0.0);
    for (std::size_t v = 0; v < vocab_; ++v) {
      const auto w = weights_.row(v);
      double s = 0.0;
      for (std::size_t f = 0; f < phi.size(); ++f) s += w[f] * phi[f];
      z[v] = s / temperature_;
    }
    const double zmax = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double x : z) sum += std::exp(x - zmax);
    const double lse = zmax + std::log(sum);
    for (auto& x : z) x -= lse;
    return z;
  }

  // Accumulates dL/dW given dL/d(log-distribution) at one step.
  void accumulate_gradient(std::span<const double> phi, std::span<const double> log_dist,
                           std::span<const double> dlogp, Matrix& grad) const {
    double total = 0.0;
    for (double g : dlogp) total += g;
    for (std::size_t v = 0; v < vocab_; ++v) {
      const double dz = (dlogp[v] - std::exp(log_dist[v]) * total) / temperature_;
      if (dz == 0.0) continue;
      auto row = grad.row(v);
      for (std::size_t f = 0; f < phi.size(); ++f) row[f] += dz * phi[f];
    }
  }

 private:
  TaskDims dims_;
  std::size_t vocab_ = 0;
  double temperature_ = 1.0;
  Matrix weights_;
};

inline int sample_token(std::span<const double> log_dist, Rng& rng) {
  const double u = rng.uniform();
  double cum = 0.0;
  int last_positive = 0;
  for (std::size_t v = 0; v < log_dist.size(); ++v) {
    const double p = std::exp(log_dist[v]);
    if (p > 0.0) last_positive = static_cast<int>(v);
    cum += p;
    if (u < cum) return static_cast<int>(v);
  }
  return last_positive;
}

// Samples G responses autoregressively until END or max_len tokens, storing
// the behaviour-policy log-probability of every emitted token.
inline std::vector<ResponseRecord> rollout(const ToyPolicy& policy, const SyntheticTask& task, std::size_t group,
                                           std::size_t max_len, Rng& rng) {
  if (group < 1) throw Error(ErrorKind::invalid_config, "rollout size must be >= 1");
  if (max_len < 3) throw Error(ErrorKind::invalid_config, "max-len must be >= 3");
  std::vector<ResponseRecord> out(group);
  for (auto& r : out) {
    int prev = -1;
    for (std::size_t t = 0; t < max_len; ++t) {
      const auto log_dist = policy.log_distribution(policy.features(task, prev));
      const int tok = sample_token(log_dist, rng);
      r.tokens.push_back(tok);
      r.logprobs.push_back(log_dist[static_cast<std::size_t>(tok)]);
      prev = tok;
      if (tok == tokens::end) break;
    }
    const auto parsed = parse_tokens(r.tokens);
    r.answer = parsed.boxed_answer;
    r.format_valid = format_reward(parsed) == 1;
  }
  return out;
}

}  // namespace durian::sim
