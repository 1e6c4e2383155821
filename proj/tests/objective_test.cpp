#include <gtest/gtest.h>

#include <cmath>

#include "durian/objective.hpp"
#include "instances.hpp"

using durian::Error;
using durian::ErrorKind;
using durian::LossStyle;
using durian::ObjectiveConfig;
using durian::PolicyEval;
using durian::ResponseEval;

namespace {

template <class Fn>
ErrorKind kind_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected an error";
  return ErrorKind::io;
}

std::vector<double> log_of(std::vector<double> p) {
  for (auto& v : p) v = std::log(v);
  return p;
}

// One response of `len` tokens, all token 0, with the given ratio.
ResponseEval flat_response(std::size_t len, double ratio, std::vector<double> dist = {0.5, 0.5}) {
  ResponseEval r;
  for (std::size_t t = 0; t < len; ++t) {
    r.tokens.push_back(0);
    r.new_log_dists.push_back(log_of(dist));
    r.old_logprobs.push_back(std::log(dist[0]) - std::log(ratio));
    r.ref_dists.push_back(dist);
  }
  return r;
}

durian::TokenAdvantages broadcast(const PolicyEval& e, const std::vector<double>& a) {
  durian::TokenAdvantages out;
  for (std::size_t k = 0; k < e.responses.size(); ++k)
    out.push_back(std::vector<double>(e.responses[k].length(), a[k]));
  return out;
}

}  // namespace

TEST(ImportanceRatios, Examples) {
  PolicyEval e{1, 2, {flat_response(3, 1.0), flat_response(1, 2.0)}};
  const auto r = durian::importance_ratios(e);
  for (double v : r[0]) EXPECT_NEAR(v, 1.0, 1e-15);
  EXPECT_NEAR(r[1][0], 2.0, 1e-12);

  testgen::Gen g(1);
  const auto in = testgen::random_instance(g, 0.2, 0.2, false);
  const auto rr = durian::importance_ratios(in.eval);
  for (std::size_t k = 0; k < rr.size(); ++k)
    for (std::size_t t = 0; t < rr[k].size(); ++t)
      EXPECT_NEAR(rr[k][t], std::exp(in.eval.responses[k].new_logprob(t) - in.eval.responses[k].old_logprobs[t]),
                  1e-12);
}

TEST(ImportanceRatios, Misaligned) {
  PolicyEval e{1, 1, {flat_response(3, 1.0)}};
  e.responses[0].old_logprobs.pop_back();
  EXPECT_EQ(kind_of([&] { durian::importance_ratios(e); }), ErrorKind::invalid_input);
  PolicyEval wrong_shape{2, 1, {flat_response(3, 1.0)}};
  EXPECT_EQ(kind_of([&] { durian::importance_ratios(wrong_shape); }), ErrorKind::invalid_input);
}

TEST(GrpoSurrogate, RatioOneGivesMinusWeightedMeanAdvantage) {
  PolicyEval e{2, 2, {flat_response(1, 1.0), flat_response(3, 1.0), flat_response(2, 1.0), flat_response(5, 1.0)}};
  const std::vector<double> a{1.0, -1.0, 0.5, 2.0};
  ObjectiveConfig cfg;
  cfg.beta = 0.0;
  const auto res = durian::grpo_surrogate(e, broadcast(e, a), cfg);
  // Each response's per-token mean is its advantage; rows then averaged.
  EXPECT_NEAR(res.loss, -((1.0 - 1.0) / 2 + (0.5 + 2.0) / 2) / 2, 1e-15);
  EXPECT_EQ(res.active_rows, 2u);
  EXPECT_EQ(res.active_tokens, 11u);
  EXPECT_EQ(res.clip_frac, 0.0);
}

TEST(GrpoSurrogate, ClipDeadzone) {
  ObjectiveConfig cfg;
  cfg.beta = 0.0;
  PolicyEval e{1, 1, {flat_response(1, 1.0 + 2 * cfg.eps)}};
  const auto res = durian::grpo_surrogate(e, broadcast(e, {1.0}), cfg);
  for (double gv : res.grads[0]) EXPECT_EQ(gv, 0.0);
  EXPECT_NEAR(res.loss, -(1.0 + cfg.eps), 1e-12);
  EXPECT_EQ(res.clip_frac, 1.0);

  // Negative advantage at a low ratio is clipped as well.
  PolicyEval low{1, 1, {flat_response(1, 1.0 - 2 * cfg.eps)}};
  const auto r2 = durian::grpo_surrogate(low, broadcast(low, {-1.0}), cfg);
  for (double gv : r2.grads[0]) EXPECT_EQ(gv, 0.0);
}

TEST(DapoSurrogate, ClipsAtUpperEdge) {
  ObjectiveConfig cfg;
  PolicyEval e{1, 1, {flat_response(1, 1.0 + cfg.eps_high + 0.1)}};
  const auto res = durian::dapo_surrogate(e, broadcast(e, {1.0}), cfg);
  EXPECT_NEAR(res.loss, -(1.0 + cfg.eps_high), 1e-12);
  for (double gv : res.grads[0]) EXPECT_EQ(gv, 0.0);
  // Inside the asymmetric range the unclipped branch stays live.
  PolicyEval in{1, 1, {flat_response(1, 1.0 + 0.25)}};
  const auto r2 = durian::dapo_surrogate(in, broadcast(in, {1.0}), cfg);
  EXPECT_NEAR(r2.loss, -1.25, 1e-12);
  EXPECT_NE(r2.grads[0][0], 0.0);
}

TEST(Objectives, AgreeAtEqualLengths) {
  testgen::Gen g(2);
  for (int trial = 0; trial < 50; ++trial) {
    auto in = testgen::random_instance(g, 0.2, 0.2, false);
    // Equalize lengths by truncation.
    std::size_t len = 100;
    for (const auto& r : in.eval.responses) len = std::min(len, r.length());
    for (auto& r : in.eval.responses) {
      r.tokens.resize(len);
      r.old_logprobs.resize(len);
      r.new_log_dists.resize(len);
    }
    for (auto& a : in.adv)
      if (!a.empty()) a.resize(len);
    ObjectiveConfig cfg;
    cfg.beta = 0.0;
    cfg.eps_low = cfg.eps_high = cfg.eps;
    const auto a = durian::grpo_surrogate(in.eval, in.adv, cfg);
    const auto b = durian::dapo_surrogate(in.eval, in.adv, cfg);
    EXPECT_NEAR(a.loss, b.loss, 1e-10);
  }
}

TEST(Objectives, DifferAtUnequalLengths) {
  PolicyEval e{1, 2, {flat_response(1, 1.0), flat_response(3, 1.0)}};
  ObjectiveConfig cfg;
  cfg.beta = 0.0;
  cfg.eps_low = cfg.eps_high = cfg.eps;
  const auto adv = broadcast(e, {1.0, -1.0});
  EXPECT_NEAR(durian::grpo_surrogate(e, adv, cfg).loss, 0.0, 1e-15);
  EXPECT_NEAR(durian::dapo_surrogate(e, adv, cfg).loss, -(1.0 - 3.0) / 4.0, 1e-15);
}

TEST(Objectives, GradientsMatchFiniteDifferences) {
  testgen::Gen g(3);
  for (int trial = 0; trial < 20; ++trial) {
    ObjectiveConfig cfg;
    cfg.beta = g.coin() ? 0.0 : g.uniform(0.01, 0.5);
    const auto gi = testgen::random_instance(g, cfg.eps, cfg.eps, true);
    const auto gc = testgen::check_gradient(gi, [&](const PolicyEval& e) { return durian::grpo_surrogate(e, gi.adv, cfg); });
    EXPECT_LE(gc.worst, 1.0) << "grpo trial " << trial;

    const auto di = testgen::random_instance(g, cfg.eps_low, cfg.eps_high, false);
    const auto dc = testgen::check_gradient(di, [&](const PolicyEval& e) { return durian::dapo_surrogate(e, di.adv, cfg); });
    EXPECT_LE(dc.worst, 1.0) << "dapo trial " << trial;
  }
}

TEST(Objectives, MaskedRowsContributeNothing) {
  testgen::Gen g(4);
  for (int trial = 0; trial < 30; ++trial) {
    auto in = testgen::random_instance(g, 0.2, 0.28, true);
    ObjectiveConfig cfg;
    const auto full = durian::grpo_surrogate(in.eval, in.adv, cfg);
    for (std::size_t k = 0; k < in.adv.size(); ++k) {
      if (!in.adv[k].empty()) continue;
      for (double v : full.grads[k]) EXPECT_EQ(v, 0.0);
    }
    // Scrambling a masked response's numbers leaves the loss unchanged.
    auto scrambled = in.eval;
    for (std::size_t k = 0; k < in.adv.size(); ++k) {
      if (!in.adv[k].empty()) continue;
      for (auto& lp : scrambled.responses[k].old_logprobs) lp -= 0.7;
    }
    EXPECT_EQ(durian::grpo_surrogate(scrambled, in.adv, cfg).loss, full.loss);
    EXPECT_EQ(durian::dapo_surrogate(scrambled, in.adv, cfg).loss, durian::dapo_surrogate(in.eval, in.adv, cfg).loss);
  }
}

TEST(Objectives, AllMaskedGivesZero) {
  PolicyEval e{1, 2, {flat_response(2, 1.3), flat_response(1, 0.7)}};
  const durian::TokenAdvantages none(2);
  const auto res = durian::grpo_surrogate(e, none, {});
  EXPECT_EQ(res.loss, 0.0);
  EXPECT_EQ(res.active_rows, 0u);
}

TEST(Objectives, InputValidation) {
  PolicyEval e{1, 1, {flat_response(2, 1.0)}};
  EXPECT_EQ(kind_of([&] { durian::grpo_surrogate(e, {{1.0}}, {}); }), ErrorKind::invalid_input);
  ObjectiveConfig bad;
  bad.eps = 1.5;
  EXPECT_EQ(kind_of([&] { durian::grpo_surrogate(e, broadcast(e, {1.0}), bad); }), ErrorKind::invalid_config);
  bad = {};
  bad.eps_low = 0.3;
  bad.eps_high = 0.2;
  EXPECT_EQ(kind_of([&] { durian::dapo_surrogate(e, broadcast(e, {1.0}), bad); }), ErrorKind::invalid_config);
  e.responses[0].ref_dists.clear();
  EXPECT_EQ(kind_of([&] { durian::grpo_surrogate(e, broadcast(e, {1.0}), {}); }), ErrorKind::invalid_input);
}

TEST(KlPenalty, KnownValue) {
  ResponseEval r;
  r.tokens = {0};
  r.old_logprobs = {std::log(0.5)};
  r.new_log_dists = {log_of({0.5, 0.5})};
  r.ref_dists = {{0.9, 0.1}};
  PolicyEval e{1, 1, {r}};
  const double want = 0.5 * std::log(0.5 / 0.9) + 0.5 * std::log(0.5 / 0.1);
  EXPECT_NEAR(durian::kl_penalty(e), want, 1e-15);
  EXPECT_NEAR(durian::kl_penalty(e), 0.5108, 1e-4);
}

TEST(KlPenalty, ZeroIffEqualAndNonnegative) {
  PolicyEval same{1, 2, {flat_response(2, 1.0, {0.3, 0.7}), flat_response(3, 1.0, {0.6, 0.4})}};
  EXPECT_EQ(durian::kl_penalty(same), 0.0);
  testgen::Gen g(5);
  for (int trial = 0; trial < 50; ++trial) {
    const auto in = testgen::random_instance(g, 0.2, 0.2, true);
    EXPECT_GT(durian::kl_penalty(in.eval), 0.0);
    EXPECT_GT(durian::kl_penalty(in.eval, LossStyle::token_mean), 0.0);
  }
}

TEST(KlPenalty, RejectsUnnormalizedReference) {
  ResponseEval r = flat_response(1, 1.0);
  r.ref_dists[0] = {0.5, 0.6};
  PolicyEval e{1, 1, {r}};
  EXPECT_EQ(kind_of([&] { durian::kl_penalty(e); }), ErrorKind::invalid_input);
}

TEST(DynamicSampling, MasksConstantRows) {
  const durian::RewardMatrix r(3, 4, {1, 1, 1, 1, 1, 1, 1, 0, 0.1, 0.1, 0.1, 0.1});
  const auto f = durian::dynamic_sampling_filter(r);
  EXPECT_EQ(f.row_kept, (std::vector<bool>{false, true, false}));
  EXPECT_EQ(f.masked_rows, 2u);
  EXPECT_EQ(f.kept_rows, 1u);
  EXPECT_NEAR(f.masked_fraction(), 2.0 / 3.0, 1e-15);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_FALSE(f.valid[i]);
    EXPECT_TRUE(f.valid[4 + i]);
  }
}

TEST(OverlongShaping, RampAndDefaultOff) {
  durian::OverlongShaping off;
  EXPECT_EQ(durian::shape_reward(1.0, 50, off), 1.0);
  durian::OverlongShaping on{true, 8, 12};
  EXPECT_EQ(durian::overlong_penalty(8, on), 0.0);
  EXPECT_DOUBLE_EQ(durian::overlong_penalty(10, on), -0.5);
  EXPECT_EQ(durian::overlong_penalty(12, on), -1.0);
  EXPECT_DOUBLE_EQ(durian::shape_reward(1.0, 9, on), 0.75);
  EXPECT_EQ(durian::shape_reward(0.1, 11, on), 0.0);
  durian::OverlongShaping bad{true, 12, 8};
  EXPECT_EQ(kind_of([&] { bad.validate(); }), ErrorKind::invalid_config);
}
