#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "durian/difficulty.hpp"
#include "durian/linalg.hpp"
#include "support.hpp"

using durian::Error;
using durian::ErrorKind;
using durian::Matrix;
using durian::SecondMoment;

namespace {

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected an error";
  return ErrorKind::io;
}

}  // namespace

TEST(SecondMoment, TwoPatchIdentityExample) {
  const Matrix f(2, 2, {1, 0, 0, 1});
  const Matrix c = durian::centered_second_moment(f, SecondMoment::patch);
  EXPECT_DOUBLE_EQ(c(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(c(0, 1), -0.5);
  EXPECT_DOUBLE_EQ(c(1, 0), -0.5);
  EXPECT_DOUBLE_EQ(c(1, 1), 0.5);
  const auto s = durian::eigvals_symmetric(c);
  EXPECT_NEAR(s.eigenvalues[0], 1.0, 1e-12);
  EXPECT_EQ(s.eigenvalues[1], 0.0);
}

TEST(SecondMoment, ShapesAndErrors) {
  testgen::Gen g(1);
  const Matrix f = g.gaussian(5, 3);
  EXPECT_EQ(durian::centered_second_moment(f, SecondMoment::patch).rows(), 5u);
  EXPECT_EQ(durian::centered_second_moment(f, SecondMoment::feature).rows(), 3u);
  EXPECT_EQ(kind_of([] { durian::centered_second_moment(Matrix(1, 4)); }), ErrorKind::degenerate_input);
  Matrix bad = f;
  bad(2, 1) = std::nan("");
  EXPECT_EQ(kind_of([&] { durian::centered_second_moment(bad); }), ErrorKind::invalid_input);
}

TEST(Eigen, DiagonalAndKnown2x2) {
  const std::vector<double> d{4, -1, 2};
  const auto s = durian::eigvals_symmetric(Matrix::diagonal(d));
  EXPECT_EQ(s.eigenvalues, (std::vector<double>{4, 2, -1}));

  const Matrix m(2, 2, {2, 1, 1, 2});
  const auto t = durian::eigvals_symmetric(m);
  EXPECT_NEAR(t.eigenvalues[0], 3.0, 1e-12);
  EXPECT_NEAR(t.eigenvalues[1], 1.0, 1e-12);
}

TEST(Eigen, RejectsBadInput) {
  EXPECT_EQ(kind_of([] { durian::eigvals_symmetric(Matrix(2, 3)); }), ErrorKind::invalid_input);
  EXPECT_EQ(kind_of([] { durian::eigvals_symmetric(Matrix(2, 2, {1, 2, 3, 1})); }), ErrorKind::invalid_input);
  EXPECT_EQ(kind_of([] { durian::eigvals_symmetric(Matrix(1, 1, {INFINITY})); }), ErrorKind::invalid_input);
}

TEST(Eigen, ConvergenceFailureIsReported) {
  testgen::Gen g(2);
  durian::EigenOptions opts;
  opts.max_sweeps = 1;
  EXPECT_EQ(kind_of([&] { durian::eigvals_symmetric(g.symmetric(10), opts); }), ErrorKind::convergence);
}

TEST(Eigen, MatchesOracleOnRandomSymmetric) {
  testgen::Gen g(3);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = g.range(1, 12);
    const Matrix a = g.symmetric(n);
    const auto got = durian::eigvals_symmetric(a).eigenvalues;
    const auto want = oracle::eigenvalues(testgen::to_dense(a));
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(got[i], want[i], 1e-7) << "n=" << n << " i=" << i;
    const double sum = std::accumulate(got.begin(), got.end(), 0.0);
    EXPECT_NEAR(sum, a.trace(), 1e-8 * std::max(1.0, std::abs(a.trace())));
  }
}

TEST(Eigen, OracleSelfCheck) {
  const oracle::Dense a{{2, 1, 0}, {1, 2, 1}, {0, 1, 2}};
  const auto ev = oracle::eigenvalues(a);
  EXPECT_NEAR(ev[0], 2 + std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(ev[1], 2.0, 1e-12);
  EXPECT_NEAR(ev[2], 2 - std::sqrt(2.0), 1e-12);
}

TEST(SpectralEntropy, HandValues) {
  EXPECT_NEAR(durian::spectral_entropy({{3, 1}}), 0.5623, 1e-4);
  EXPECT_NEAR(durian::spectral_entropy({{3, 1}}), -(0.75 * std::log(0.75) + 0.25 * std::log(0.25)), 1e-15);
  EXPECT_NEAR(durian::spectral_entropy({{0.5, 0.25, 0.125, 0.125}}), 1.2130, 1e-4);
  EXPECT_NEAR(durian::spectral_entropy({{2, 2, 2, 2, 2}}), std::log(5.0), 1e-12);
  EXPECT_EQ(durian::spectral_entropy({{7, 0, 0}}), 0.0);
}

TEST(SpectralEntropy, Errors) {
  EXPECT_EQ(kind_of([] { durian::spectral_entropy({{0, 0}}); }), ErrorKind::degenerate_spectrum);
  EXPECT_EQ(kind_of([] { durian::spectral_entropy({{1, -0.5}}); }), ErrorKind::invalid_input);
}

TEST(FeatureEntropy, ConstantImageScoresZero) {
  const Matrix f(4, 3, std::vector<double>(12, 2.5));
  EXPECT_EQ(durian::feature_entropy(f), 0.0);
}

TEST(FeatureEntropy, InvariancesOnRandomMatrices) {
  testgen::Gen g(4);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t p = g.range(2, 12);
    const std::size_t d = g.range(1, 12);
    Matrix f = g.gaussian(p, d);
    const double h = durian::feature_entropy(f);
    const double h_patch = durian::feature_entropy(f, SecondMoment::patch);
    const double h_feat = durian::feature_entropy(f, SecondMoment::feature);
    EXPECT_NEAR(h_patch, h_feat, 1e-8);
    EXPECT_GE(h, 0.0);
    EXPECT_LE(h, std::log(static_cast<double>(std::min(p, d))) + 1e-12);
    EXPECT_NEAR(h, testgen::oracle_entropy(f), 1e-8);

    Matrix scaled = f;
    scaled *= 3.0;
    EXPECT_NEAR(durian::feature_entropy(scaled), h, 1e-9);

    // Shifting every patch by the same vector leaves the centered moment alone.
    Matrix shifted = f;
    for (std::size_t c = 0; c < d; ++c) {
      const double shift = g.normal();
      for (std::size_t i = 0; i < p; ++i) shifted(i, c) += shift;
    }
    EXPECT_NEAR(durian::feature_entropy(shifted), h, 1e-8);
  }
}

TEST(FeatureEntropy, RotationInvariance) {
  testgen::Gen g(5);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t p = g.range(3, 10);
    const std::size_t d = g.range(2, 8);
    const Matrix f = g.gaussian(p, d);
    const Matrix q = durian::orthonormalize_columns(g.gaussian(d, d));
    EXPECT_NEAR(durian::feature_entropy(f * q), durian::feature_entropy(f), 1e-8);
  }
}

TEST(Orthonormalize, ProducesOrthonormalColumns) {
  testgen::Gen g(6);
  const Matrix q = durian::orthonormalize_columns(g.gaussian(7, 4));
  const Matrix gram = q.transposed() * q;
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(gram(i, j), i == j ? 1.0 : 0.0, 1e-12);
  EXPECT_EQ(kind_of([] { durian::orthonormalize_columns(Matrix(3, 2, {1, 2, 1, 2, 1, 2})); }),
            ErrorKind::degenerate_input);
}
