#pragma once

// Small random generators for property tests. Kept separate from the
// library's own Rng so a bug there cannot hide a bug here.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "durian/linalg.hpp"
#include "oracles/reference_eigen.hpp"

namespace testgen {

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : eng_(seed) {}

  double uniform(double lo = 0.0, double hi = 1.0) { return std::uniform_real_distribution<double>(lo, hi)(eng_); }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(eng_); }
  std::size_t range(std::size_t lo, std::size_t hi) {  // inclusive
    return std::uniform_int_distribution<std::size_t>(lo, hi)(eng_);
  }
  bool coin(double p = 0.5) { return uniform() < p; }

  durian::Matrix gaussian(std::size_t rows, std::size_t cols, double scale = 1.0) {
    durian::Matrix m(rows, cols);
    for (auto& x : m.data()) x = scale * normal();
    return m;
  }

  durian::Matrix symmetric(std::size_t n) {
    durian::Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j <= i; ++j) m(i, j) = m(j, i) = normal();
    return m;
  }

  // Binary row with at least one 0 and one 1 when mixed is set.
  std::vector<double> binary_row(std::size_t g, bool mixed) {
    std::vector<double> r(g);
    for (auto& x : r) x = coin() ? 1.0 : 0.0;
    if (mixed) {
      r[range(0, g - 1)] = 1.0;
      std::size_t z = range(0, g - 1);
      while (r[z] == 1.0 && g > 1) {
        r[z] = 0.0;
        bool any_one = false;
        for (double v : r) any_one |= v == 1.0;
        if (!any_one) r[(z + 1) % g] = 1.0;
      }
    }
    return r;
  }

  std::mt19937_64& engine() { return eng_; }

 private:
  std::mt19937_64 eng_;
};

inline oracle::Dense to_dense(const durian::Matrix& m) {
  oracle::Dense d(m.rows(), std::vector<double>(m.cols()));
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) d[i][j] = m(i, j);
  return d;
}

// Entropy straight from the definition, via the oracle eigensolver.
inline double oracle_entropy(const durian::Matrix& features) {
  const std::size_t p = features.rows();
  const std::size_t d = features.cols();
  std::vector<double> mu(d, 0.0);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t c = 0; c < d; ++c) mu[c] += features(i, c) / static_cast<double>(p);
  oracle::Dense c(p, std::vector<double>(p, 0.0));
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < p; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) s += (features(i, k) - mu[k]) * (features(j, k) - mu[k]);
      c[i][j] = s / static_cast<double>(p - 1);
    }
  auto ev = oracle::eigenvalues(c);
  double total = 0.0;
  for (double v : ev) total += std::abs(v);
  double h = 0.0;
  for (double v : ev) {
    if (v <= 1e-10 * total) continue;
    const double q = v / total;
    h -= q * std::log(q);
  }
  return h;
}

}  // namespace testgen
