#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "durian/difficulty.hpp"
#include "durian/error.hpp"
#include "durian/linalg.hpp"
#include "durian/sim/random.hpp"

namespace durian::sim {

struct TaskDims {
  std::size_t patches = 16;      // P
  std::size_t feature_dim = 8;   // d
  std::size_t context_dim = 4;   // m
  std::size_t answers = 4;       // K
  // Rank of the centered feature matrix; 0 picks the largest possible,
  // min(P - 1, d).
  std::size_t rank = 0;

  std::size_t effective_rank() const {
    const std::size_t max_rank = std::min(patches - 1, feature_dim);
    return rank == 0 ? max_rank : rank;
  }

  void validate() const {
    if (patches < 2 || feature_dim < 1) throw Error(ErrorKind::invalid_config, "patches must be >= 2 and feature-dim >= 1");
    if (context_dim < 1) throw Error(ErrorKind::invalid_config, "context-dim must be >= 1");
    if (answers < 2) throw Error(ErrorKind::invalid_config, "answers must be >= 2");
    if (rank > std::min(patches - 1, feature_dim)) {
      throw Error(ErrorKind::invalid_config, "rank exceeds min(patches - 1, feature-dim)");
    }
  }
};

// One synthetic multimodal question: an "image" given as patch features with
// a prescribed spectral entropy, a context vector that encodes the answer
// with hardness-dependent separability, and the answer itself.
struct SyntheticTask {
  std::size_t id = 0;
  Matrix features;
  double target_entropy = 0.0;
  double entropy = 0.0;  // realized, computed once at construction
  std::vector<double> context;
  std::vector<double> pooled;  // mean patch feature
  int truth = 0;
  double hardness = 0.0;
};

// Distribution over `rank` outcomes, p_k proportional to exp(-tilt * k).
inline std::vector<double> tilted_distribution(std::size_t rank, double tilt) {
  std::vector<double> p(rank);
  double sum = 0.0;
  for (std::size_t k = 0; k < rank; ++k) sum += p[k] = std::exp(-tilt * static_cast<double>(k));
  for (auto& v : p) v /= sum;
  return p;
}

inline double distribution_entropy(const std::vector<double>& p) {
  double h = 0.0;
  for (double v : p)
    if (v > 0.0) h -= v * std::log(v);
  return h;
}

// Spectrum shape with the requested entropy, found by bisection on the tilt.
inline std::vector<double> spectrum_with_entropy(std::size_t rank, double target) {
  if (rank == 0) throw Error(ErrorKind::invalid_config, "spectrum rank must be positive");
  const double max_entropy = std::log(static_cast<double>(rank));
  if (!(target >= 0.0) || target > max_entropy + 1e-12) {
    throw Error(ErrorKind::invalid_config, "target entropy " + std::to_string(target) + " unreachable with rank " +
                                               std::to_string(rank) + " (max " + std::to_string(max_entropy) + ")");
  }
  if (target == 0.0 || rank == 1) {
    std::vector<double> p(rank, 0.0);
    p[0] = 1.0;
    return p;
  }
  if (target >= max_entropy) return std::vector<double>(rank, 1.0 / static_cast<double>(rank));

  double lo = 0.0;
  double hi = 1.0;
  while (distribution_entropy(tilted_distribution(rank, hi)) > target) hi *= 2.0;
  // Bisect down to floating-point resolution of the tilt.
  for (int iter = 0; iter < 200 && hi - lo > 1e-15 * hi; ++iter) {
    const double mid = 0.5 * (lo + hi);
    (distribution_entropy(tilted_distribution(rank, mid)) > target ? lo : hi) = mid;
  }
  return tilted_distribution(rank, 0.5 * (lo + hi));
}

// F = 1 mu^T + U diag(sigma) V^T with U orthonormal and orthogonal to the
// ones vector, so the centered second moment has exactly the eigenvalues
// `spectrum` (in the d x d form) and their nonzero counterparts in P x P form.
inline Matrix features_with_spectrum(const std::vector<double>& spectrum, const std::vector<double>& mean,
                                     std::size_t patches, Rng& rng) {
  const std::size_t rank = spectrum.size();
  const std::size_t dim = mean.size();
  if (rank + 1 > patches || rank > dim) {
    throw Error(ErrorKind::invalid_config, "spectrum rank too large for the feature matrix shape");
  }
  Matrix u_raw(patches, rank + 1);
  for (std::size_t i = 0; i < patches; ++i) {
    u_raw(i, 0) = 1.0;
    for (std::size_t j = 1; j <= rank; ++j) u_raw(i, j) = rng.normal();
  }
  const Matrix u = orthonormalize_columns(std::move(u_raw));

  Matrix v_raw(dim, rank);
  for (auto& x : v_raw.data()) x = rng.normal();
  const Matrix v = orthonormalize_columns(std::move(v_raw));

  Matrix f(patches, dim);
  const double scale = static_cast<double>(patches - 1);
  for (std::size_t k = 0; k < rank; ++k) {
    const double sigma = std::sqrt(spectrum[k] * scale);
    if (sigma == 0.0) continue;
    for (std::size_t i = 0; i < patches; ++i) {
      const double ui = sigma * u(i, k + 1);
      for (std::size_t c = 0; c < dim; ++c) f(i, c) += ui * v(c, k);
    }
  }
  for (std::size_t i = 0; i < patches; ++i)
    for (std::size_t c = 0; c < dim; ++c) f(i, c) += mean[c];
  return f;
}

// Answer prototypes in context space: basis vectors while K <= m, otherwise
// fixed pseudo-random unit vectors.
inline std::vector<std::vector<double>> answer_prototypes(std::size_t answers, std::size_t context_dim) {
  std::vector<std::vector<double>> protos(answers, std::vector<double>(context_dim, 0.0));
  if (answers <= context_dim) {
    for (std::size_t k = 0; k < answers; ++k) protos[k][k] = 1.0;
    return protos;
  }
  Rng rng = Rng::stream({0x9e3779b97f4a7c15ULL, answers, context_dim});
  for (auto& p : protos) {
    double norm = 0.0;
    for (auto& x : p) {
      x = rng.normal();
      norm += x * x;
    }
    norm = std::sqrt(norm);
    for (auto& x : p) x /= norm;
  }
  return protos;
}

struct TaskOptions {
  TaskDims dims;
  // Context = separability * (1 - hardness) * prototype[truth] + N(0, I).
  double separability = 3.0;
  // Total variance of the centered features.
  double feature_variance = 1.0;
  double mean_scale = 0.5;
};

inline SyntheticTask generate_task(std::size_t id, double target_entropy, double hardness, const TaskOptions& opts,
                                   Rng& rng) {
  opts.dims.validate();
  if (!(hardness >= 0.0 && hardness <= 1.0)) {
    throw Error(ErrorKind::invalid_config, "hardness must lie in [0, 1]");
  }
  const auto& dims = opts.dims;
  const double max_entropy = std::log(static_cast<double>(std::min(dims.patches, dims.feature_dim)));
  if (target_entropy > max_entropy + 1e-12) {
    throw Error(ErrorKind::invalid_config, "target entropy exceeds log(min(P, d))");
  }

  SyntheticTask task;
  task.id = id;
  task.target_entropy = target_entropy;
  task.hardness = hardness;

  auto spectrum = spectrum_with_entropy(dims.effective_rank(), target_entropy);
  for (auto& v : spectrum) v *= opts.feature_variance;
  task.pooled.resize(dims.feature_dim);
  for (auto& m : task.pooled) m = opts.mean_scale * rng.normal();
  task.features = features_with_spectrum(spectrum, task.pooled, dims.patches, rng);
  task.entropy = feature_entropy(task.features);

  task.truth = static_cast<int>(rng.index(dims.answers));
  const auto protos = answer_prototypes(dims.answers, dims.context_dim);
  const double sep = opts.separability * (1.0 - hardness);
  task.context.resize(dims.context_dim);
  for (std::size_t j = 0; j < dims.context_dim; ++j)
    task.context[j] = sep * protos[static_cast<std::size_t>(task.truth)][j] + rng.normal();
  return task;
}

}  // namespace durian::sim
