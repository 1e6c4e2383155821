#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "durian/error.hpp"
#include "durian/format.hpp"
#include "durian/linalg.hpp"
#include "durian/response.hpp"

namespace durian {

struct PerceptualScore {
  std::size_t sample_id = 0;
  double entropy = 0.0;  // nats
};

struct ConfidenceScore {
  std::size_t sample_id = 0;
  double mean_logprob = 0.0;  // <= 0
};

// Partition of a batch into ordered difficulty tiers. Label 0 is the lowest
// score tier. `thresholds` holds the num_groups - 1 score boundaries.
struct GroupAssignment {
  std::vector<int> labels;
  int num_groups = 0;
  std::vector<double> thresholds;
  // Set when ties forced a collapse (all scores equal, or empty tiers merged).
  bool degenerate = false;

  std::vector<std::size_t> group_sizes() const {
    std::vector<std::size_t> sizes(static_cast<std::size_t>(num_groups), 0);
    for (int l : labels) ++sizes[static_cast<std::size_t>(l)];
    return sizes;
  }
};

// Perceptual difficulty: spectral entropy of the centered second-moment matrix
// of the patch features. With no mode given, the smaller of the two Gram forms
// is decomposed; both give the same entropy. A constant image scores 0.
inline double feature_entropy(const Matrix& features, std::optional<SecondMoment> mode = std::nullopt) {
  const SecondMoment form =
      mode.value_or(features.rows() <= features.cols() ? SecondMoment::patch : SecondMoment::feature);
  const Spectrum spectrum = eigvals_symmetric(centered_second_moment(features, form));
  try {
    return spectral_entropy(spectrum);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::degenerate_spectrum) return 0.0;
    throw;
  }
}

inline PerceptualScore perceptual_difficulty(std::size_t sample_id, const Matrix& features,
                                             std::optional<SecondMoment> mode = std::nullopt) {
  return {sample_id, feature_entropy(features, mode)};
}

// Sequence log-probability of one response, as a per-token mean when
// `normalize` is set and as a raw sum otherwise.
inline double sequence_logprob(const ResponseRecord& response, bool normalize = true) {
  if (response.logprobs.empty()) {
    throw Error(ErrorKind::degenerate_response, "response has no tokens");
  }
  double sum = 0.0;
  for (double lp : response.logprobs) {
    if (!std::isfinite(lp) || lp > 0.0) {
      throw Error(ErrorKind::invalid_input, "token log-probability must be finite and <= 0");
    }
    sum += lp;
  }
  return normalize ? sum / static_cast<double>(response.logprobs.size()) : sum;
}

inline ConfidenceScore sample_confidence(std::size_t sample_id, std::span<const ResponseRecord> responses,
                                         bool normalize = true) {
  if (responses.empty()) {
    throw Error(ErrorKind::empty_group, "sample " + std::to_string(sample_id) + " has no responses");
  }
  double sum = 0.0;
  for (const auto& r : responses) sum += sequence_logprob(r, normalize);
  return {sample_id, sum / static_cast<double>(responses.size())};
}

// Quantile by linear interpolation between the closest order statistics.
inline double quantile_sorted(std::span<const double> sorted, double level) {
  if (sorted.empty()) {
    throw Error(ErrorKind::empty_input, "quantile of an empty list");
  }
  if (!(level >= 0.0 && level <= 1.0)) {
    throw Error(ErrorKind::invalid_input, "quantile level must lie in [0, 1]");
  }
  const double h = level * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = static_cast<std::size_t>(std::ceil(h));
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline double quantile(std::span<const double> values, double level) {
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  return quantile_sorted(sorted, level);
}

// Three tiers around fixed score thresholds: score <= low -> 0,
// score >= high -> 2, otherwise 1.
inline GroupAssignment regroup_perceptual_at(std::span<const double> scores, double low, double high) {
  if (low > high) {
    throw Error(ErrorKind::invalid_config, "perceptual thresholds out of order");
  }
  GroupAssignment g;
  g.num_groups = 3;
  g.thresholds = {low, high};
  g.labels.reserve(scores.size());
  for (double s : scores) g.labels.push_back(s <= low ? 0 : (s >= high ? 2 : 1));
  return g;
}

inline GroupAssignment regroup_perceptual(std::span<const double> scores, double low_level = 0.25,
                                          double high_level = 0.75) {
  if (scores.size() < 4) {
    throw Error(ErrorKind::invalid_input,
                "perceptual regrouping needs at least 4 samples, got " + std::to_string(scores.size()));
  }
  if (!(0.0 <= low_level && low_level <= high_level && high_level <= 1.0)) {
    throw Error(ErrorKind::invalid_config, "perceptual quantile levels must satisfy 0 <= low <= high <= 1");
  }
  std::vector<double> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end());
  if (sorted.front() == sorted.back()) {
    GroupAssignment g;
    g.num_groups = 3;
    g.thresholds = {sorted.front(), sorted.front()};
    g.labels.assign(scores.size(), 1);
    g.degenerate = true;
    return g;
  }
  return regroup_perceptual_at(scores, quantile_sorted(sorted, low_level), quantile_sorted(sorted, high_level));
}

// b equal-mass tiers at the empirical u/b quantiles. A sample belongs to
// tier u when tau_u <= score < tau_{u+1}; the top tier is closed. Tiers left
// empty by ties are merged away and the assignment is flagged degenerate.
inline GroupAssignment regroup_reasoning(std::span<const double> scores, int b) {
  if (b < 1) {
    throw Error(ErrorKind::invalid_config, "groups-b must be >= 1");
  }
  if (static_cast<std::size_t>(b) > scores.size()) {
    throw Error(ErrorKind::invalid_config, "groups-b (" + std::to_string(b) + ") exceeds batch size (" +
                                               std::to_string(scores.size()) + ")");
  }
  std::vector<double> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end());

  std::vector<double> bounds;
  for (int u = 1; u < b; ++u) bounds.push_back(quantile_sorted(sorted, static_cast<double>(u) / b));

  std::vector<int> raw(scores.size());
  std::vector<std::size_t> counts(static_cast<std::size_t>(b), 0);
  for (std::size_t s = 0; s < scores.size(); ++s) {
    const auto it = std::upper_bound(bounds.begin(), bounds.end(), scores[s]);
    raw[s] = static_cast<int>(it - bounds.begin());
    ++counts[static_cast<std::size_t>(raw[s])];
  }

  GroupAssignment g;
  std::vector<int> remap(static_cast<std::size_t>(b), -1);
  for (int u = 0; u < b; ++u) {
    if (counts[static_cast<std::size_t>(u)] == 0) continue;
    if (g.num_groups > 0) g.thresholds.push_back(bounds[static_cast<std::size_t>(u - 1)]);
    remap[static_cast<std::size_t>(u)] = g.num_groups++;
  }
  g.degenerate = g.num_groups < b;
  g.labels.reserve(scores.size());
  for (int r : raw) g.labels.push_back(remap[static_cast<std::size_t>(r)]);
  return g;
}

inline void write_entropy_csv(std::ostream& out, std::span<const PerceptualScore> scores) {
  out << "sample_id,entropy\n";
  for (const auto& s : scores) out << s.sample_id << ',' << fmt6(s.entropy) << '\n';
}

inline void write_confidence_csv(std::ostream& out, std::span<const ConfidenceScore> scores) {
  out << "sample_id,confidence\n";
  for (const auto& s : scores) out << s.sample_id << ',' << fmt6(s.mean_logprob) << '\n';
}

}  // namespace durian
