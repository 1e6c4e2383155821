#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "durian/error.hpp"

namespace durian {

// Dense row-major real matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw Error(ErrorKind::invalid_input,
                  "matrix data has " + std::to_string(data_.size()) + " values, expected " +
                      std::to_string(rows_ * cols_));
    }
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  static Matrix diagonal(std::span<const double> values) {
    Matrix m(values.size(), values.size());
    for (std::size_t i = 0; i < values.size(); ++i) m(i, i) = values[i];
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  Matrix transposed() const {
    Matrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
    return t;
  }

  double trace() const {
    double s = 0.0;
    for (std::size_t i = 0; i < std::min(rows_, cols_); ++i) s += (*this)(i, i);
    return s;
  }

  Matrix& operator*=(double k) {
    for (auto& v : data_) v *= k;
    return *this;
  }

  friend Matrix operator*(double k, Matrix m) { return m *= k; }

  friend Matrix operator*(const Matrix& a, const Matrix& b) {
    if (a.cols_ != b.rows_) {
      throw Error(ErrorKind::invalid_input, "matrix product shape mismatch");
    }
    Matrix out(a.rows_, b.cols_);
    for (std::size_t i = 0; i < a.rows_; ++i)
      for (std::size_t k = 0; k < a.cols_; ++k) {
        const double aik = a(i, k);
        if (aik == 0.0) continue;
        for (std::size_t j = 0; j < b.cols_; ++j) out(i, j) += aik * b(k, j);
      }
    return out;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Eigenvalues sorted in descending order.
struct Spectrum {
  std::vector<double> eigenvalues;

  std::size_t size() const noexcept { return eigenvalues.size(); }
  double sum() const { return std::accumulate(eigenvalues.begin(), eigenvalues.end(), 0.0); }
};

// Which Gram form of the centered feature matrix to build: the P x P patch
// form (the default) or the d x d feature form. Both share their nonzero
// eigenvalues.
enum class SecondMoment { patch, feature };

struct EigenOptions {
  int max_sweeps = 100;
  // Stop once the off-diagonal Frobenius norm falls below this fraction of
  // the full Frobenius norm.
  double off_diagonal_tol = 1e-10;
  double symmetry_tol = 1e-9;
  // Eigenvalues with magnitude below eigen_floor * sum|lambda| are zeroed.
  double eigen_floor = 1e-10;
};

inline Matrix centered_second_moment(const Matrix& features, SecondMoment mode = SecondMoment::patch) {
  const std::size_t p = features.rows();
  const std::size_t d = features.cols();
  if (p < 2) {
    throw Error(ErrorKind::degenerate_input,
                "second moment needs at least 2 patches, got " + std::to_string(p));
  }
  if (!features.all_finite()) {
    throw Error(ErrorKind::invalid_input, "feature matrix contains a non-finite entry");
  }

  std::vector<double> mean(d, 0.0);
  for (std::size_t r = 0; r < p; ++r)
    for (std::size_t c = 0; c < d; ++c) mean[c] += features(r, c);
  for (auto& m : mean) m /= static_cast<double>(p);

  Matrix centered(p, d);
  for (std::size_t r = 0; r < p; ++r)
    for (std::size_t c = 0; c < d; ++c) centered(r, c) = features(r, c) - mean[c];

  const double scale = 1.0 / static_cast<double>(p - 1);
  const std::size_t n = mode == SecondMoment::patch ? p : d;
  Matrix out(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      double s = 0.0;
      if (mode == SecondMoment::patch) {
        for (std::size_t c = 0; c < d; ++c) s += centered(i, c) * centered(j, c);
      } else {
        for (std::size_t r = 0; r < p; ++r) s += centered(r, i) * centered(r, j);
      }
      out(i, j) = s * scale;
      out(j, i) = s * scale;
    }
  }
  return out;
}

inline bool is_symmetric(const Matrix& m, double rel_tol) {
  if (m.rows() != m.cols()) return false;
  double max_abs = 0.0;
  for (double v : m.data()) max_abs = std::max(max_abs, std::abs(v));
  const double tol = rel_tol * max_abs;
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = i + 1; j < m.cols(); ++j)
      if (std::abs(m(i, j) - m(j, i)) > tol) return false;
  return true;
}

// Cyclic Jacobi rotations. Returns every eigenvalue of the symmetric input in
// descending order.
inline Spectrum eigvals_symmetric(const Matrix& input, const EigenOptions& opts = {}) {
  if (input.rows() != input.cols()) {
    throw Error(ErrorKind::invalid_input, "eigenvalue input is not square");
  }
  if (!input.all_finite()) {
    throw Error(ErrorKind::invalid_input, "eigenvalue input contains a non-finite entry");
  }
  if (!is_symmetric(input, opts.symmetry_tol)) {
    throw Error(ErrorKind::invalid_input, "eigenvalue input is not symmetric");
  }

  const std::size_t n = input.rows();
  Matrix a = input;
  // Symmetrize exactly so the rotations below only ever read the upper triangle.
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = 0.5 * (a(i, j) + a(j, i));
      a(i, j) = v;
      a(j, i) = v;
    }

  double frob2 = 0.0;
  for (double v : a.data()) frob2 += v * v;
  const double target = opts.off_diagonal_tol * std::sqrt(frob2);

  auto off_norm = [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) s += 2.0 * a(i, j) * a(i, j);
    return std::sqrt(s);
  };

  bool converged = off_norm() <= target;
  for (int sweep = 0; sweep < opts.max_sweeps && !converged; ++sweep) {
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;

        a(p, p) -= t * apq;
        a(q, q) += t * apq;
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
          if (r == p || r == q) continue;
          const double arp = a(r, p);
          const double arq = a(r, q);
          a(r, p) = c * arp - s * arq;
          a(p, r) = a(r, p);
          a(r, q) = s * arp + c * arq;
          a(q, r) = a(r, q);
        }
      }
    }
    converged = off_norm() <= target;
  }
  if (!converged) {
    throw Error(ErrorKind::convergence,
                "Jacobi iteration did not converge in " + std::to_string(opts.max_sweeps) + " sweeps");
  }

  Spectrum out;
  out.eigenvalues.resize(n);
  double abs_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    out.eigenvalues[i] = a(i, i);
    abs_sum += std::abs(a(i, i));
  }
  const double floor = opts.eigen_floor * abs_sum;
  for (auto& v : out.eigenvalues)
    if (std::abs(v) <= floor) v = 0.0;
  std::sort(out.eigenvalues.begin(), out.eigenvalues.end(), std::greater<>());
  return out;
}

// Shannon entropy (nats) of the eigenvalues normalized to a distribution.
inline double spectral_entropy(const Spectrum& spectrum) {
  double total = 0.0;
  for (double v : spectrum.eigenvalues) {
    if (v < 0.0) {
      throw Error(ErrorKind::invalid_input, "spectral entropy needs a nonnegative spectrum");
    }
    total += v;
  }
  if (!(total > 0.0)) {
    throw Error(ErrorKind::degenerate_spectrum, "spectrum has no positive eigenvalue");
  }
  double h = 0.0;
  for (double v : spectrum.eigenvalues) {
    if (v == 0.0) continue;
    const double p = v / total;
    h -= p * std::log(p);
  }
  return std::max(h, 0.0);
}

// Modified Gram-Schmidt on the columns of `m`. Throws when the columns are
// numerically dependent.
inline Matrix orthonormalize_columns(Matrix m) {
  const std::size_t rows = m.rows();
  for (std::size_t j = 0; j < m.cols(); ++j) {
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t k = 0; k < j; ++k) {
        double dot = 0.0;
        for (std::size_t i = 0; i < rows; ++i) dot += m(i, k) * m(i, j);
        for (std::size_t i = 0; i < rows; ++i) m(i, j) -= dot * m(i, k);
      }
    }
    double norm = 0.0;
    for (std::size_t i = 0; i < rows; ++i) norm += m(i, j) * m(i, j);
    norm = std::sqrt(norm);
    if (norm < 1e-12) {
      throw Error(ErrorKind::degenerate_input, "columns are linearly dependent");
    }
    for (std::size_t i = 0; i < rows; ++i) m(i, j) /= norm;
  }
  return m;
}

}  // namespace durian
