/*
 * Copyright (c) 2026, The spanrl Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <gtest/gtest.h>

#include <cmath>

#include "spanrl/acceptance.hpp"
#include "spanrl/theory.hpp"

using namespace spanrl;

TEST(NaturalGradient, FixedPoint) {
  const Distribution p = {0.2, 0.3, 0.5};
  for (const auto& x : natural_gradient_flow(p, p, 0.01, 1.0)) EXPECT_EQ(x, p);
}

TEST(NaturalGradient, ClosedFormHalfway) {
  const auto p = natural_gradient_closed_form({0.9, 0.1}, {0.5, 0.5}, std::log(2.0));
  EXPECT_NEAR(p[0], 0.7, 1e-15);
  EXPECT_NEAR(p[1], 0.3, 1e-15);
}

TEST(NaturalGradient, EulerConvergesAtFirstOrder) {
  const Distribution a = {0.9, 0.05, 0.05}, b = {0.1, 0.6, 0.3};
  const auto cf = natural_gradient_closed_form(a, b, 2.0);
  double prev = 1.0;
  for (double dt : {1e-1, 1e-2, 1e-3}) {
    const auto e = natural_gradient_flow(a, b, dt, 2.0).back();
    const double err = std::fabs(e[0] - cf[0]);
    EXPECT_LT(err, prev / 5);
    prev = err;
  }
  EXPECT_LT(prev, 1e-3);
}

TEST(NaturalGradient, StepSizeError) {
  EXPECT_THROW(natural_gradient_flow({0.5, 0.5}, {0.1, 0.9}, 1.5, 3.0), Error);
  EXPECT_THROW(natural_gradient_flow({0.5, 0.5}, {0.1, 0.9}, 0.0, 3.0), Error);
}

TEST(EuclideanDescent, FrozenCounterexample) {
  const acceptance::EuclideanFixture fx;
  const auto tr = euclidean_fkl_descent(fx.l0, fx.teacher, fx.eta, 1);
  // logit step: eta (q - p) = (0.002, -0.012, 0.01); the partition shift
  // sum_v p_v (q_v - p_v) = 0.048 exceeds q_0 - p_0 = 0.02, so pi_0 falls
  EXPECT_LT(tr[1][0], tr[0][0]);
  EXPECT_LT(tr[0][0], fx.teacher[0]);
  EXPECT_FALSE(acceptance::mass_monotone(tr, fx.teacher, fx.U));
  const auto ng = natural_gradient_flow(softmax(fx.l0), fx.teacher, fx.eta, 1.0);
  EXPECT_TRUE(acceptance::mass_monotone(ng, fx.teacher, fx.U));
}

TEST(ScoreOperator, Examples) {
  const auto z = score_operator_check({0, 0, 0}, {0.2, 0.3, 0.5});
  EXPECT_EQ(z.lhs, 0.0);
  EXPECT_EQ(z.rhs_bound, 0.0);
  for (const Distribution& d : {Distribution{0.5, 0.5}, Distribution{0.99, 0.01}}) {
    const auto c = score_operator_check({0.3, -0.3}, d);
    EXPECT_NEAR(c.lhs, 0.18, 1e-15);
    EXPECT_NEAR(c.rhs_bound, 0.18, 1e-15);
  }
  EXPECT_THROW(score_operator_check({0.3, 0.3}, {0.5, 0.5}), Error);
}

namespace {

CornerInstance corner(std::vector<double> g0, std::vector<double> g1, std::vector<double> gn,
                      std::vector<double> gt, double kappa, double V) {
  return {std::move(g0), std::move(g1), std::move(gn), std::move(gt), kappa, V};
}

}  // namespace

TEST(Corner, UtilityAndThresholds) {
  const auto c = corner({1, 0}, {0, 2}, {0, 0}, {1, 1}, 0.5, 2.0);
  EXPECT_DOUBLE_EQ(corner_utility(c, std::nullopt), 0.0);
  EXPECT_DOUBLE_EQ(corner_utility(c, 0.0), 1.0 - 1.0);
  EXPECT_DOUBLE_EQ(corner_utility(c, 1.0), 2.0 - 1.0);
  EXPECT_DOUBLE_EQ(corner_utility(c, 0.5), 1.5 - 1.0);
  EXPECT_DOUBLE_EQ(corner_threshold(c, 1.0), 1.0);
  EXPECT_EQ(threshold_action(c), std::optional<double>(1.0));
  auto d = c;
  d.kappa = 1.5;
  EXPECT_EQ(threshold_action(d), std::nullopt);
  EXPECT_THROW(corner_utility(c, 1.5), Error);
}

TEST(Corner, SymmetricAndNullInstances) {
  const auto s = corner({1, 1}, {1, 1}, {0, 0}, {1, 0.5}, 0.0, 1.0);
  auto th = corner_thresholds(s, s, s);
  EXPECT_DOUBLE_EQ(th.kappa_E, th.kappa_K);
  const auto n = corner({0.3, -0.2}, {1, 1}, {0.3, -0.2}, {1, 2}, 0.0, 1.0);
  EXPECT_EQ(corner_thresholds(n, s, s).kappa_E, 0.0);
}

TEST(Corner, ThresholdsAgreeWithGridOracle) {
  Engine rng = make_stream(11, 0, kStreamTask);
  for (int i = 0; i < 300; ++i) {
    CornerInstance c = acceptance::random_corner(rng);
    const double s0 = dot(c.g0, c.g_tilde), s1 = dot(c.g1, c.g_tilde);
    if (std::fabs(s1 - s0) < 1e-9) continue;
    // brute force over a kappa grid: endpoint b wins iff kappa below threshold
    const double b = s1 > s0 ? 1.0 : 0.0;
    const double thr = corner_threshold(c, b);
    for (int j = 0; j <= 40; ++j) {
      c.kappa = j / 10.0;
      const bool kl_wins = corner_utility(c, b) > corner_utility(c, std::nullopt);
      EXPECT_EQ(kl_wins, c.kappa < thr);
    }
  }
}

TEST(Alignment, Examples) {
  AlignmentParams p;
  p.lambda_k = 0.5;
  p.p_K = 0.25;
  p.q_K = 1.0;
  p.gamma_K = 0.8;
  EXPECT_NEAR(alignment_lower_bound(p), 0.5 * 0.25 * 0.8, 1e-15);
  p.gamma_K = 1;
  p.B_K = 1;
  p.q_K = 0.5;
  EXPECT_EQ(alignment_lower_bound(p), 0.0);
  p.q_K = 0.9;
  EXPECT_NEAR(alignment_lower_bound(p), 0.1, 1e-15);
  EXPECT_DOUBLE_EQ(precision_threshold(1, 1), 0.5);
  EXPECT_DOUBLE_EQ(precision_threshold(3, 1), 0.25);
}

TEST(Alignment, BernoulliMonteCarlo) {
  // simulate the Bernoulli-precision annotator directly
  Engine rng = make_stream(5, 0, kStreamAnnotate);
  const double gamma = 1.0, B = 1.0, q = 0.9, lam = 0.5, pK = 0.25;
  double s = 0.0;
  const int n = 400000;
  for (int i = 0; i < n; ++i) {
    if (uniform01(rng) >= pK) continue;
    s += uniform01(rng) < q ? gamma : -B;
  }
  AlignmentParams p;
  p.lambda_k = lam;
  p.p_K = pK;
  p.q_K = q;
  p.gamma_K = gamma;
  p.B_K = B;
  EXPECT_NEAR(lam * s / n, alignment_lower_bound(p), 2e-3);
}

TEST(Utility, Examples) {
  const RoutingConfig cfg;
  UtilityParams u = utility_params_from_schedule(cfg);
  EXPECT_NEAR(u.Lambda1, 12.75, 1e-12);
  EXPECT_NEAR(u.Lambda2, schedule_lambda2(cfg), 1e-12);
  u.p_K = 0.3;
  u.q_K = 0.9;
  u.gamma_K = 2.0;
  u.B_K = 1.0;
  u.kappa = 0.0;
  AlignmentParams a;
  a.lambda_k = 1.0;
  a.p_K = 0.3;
  a.q_K = 0.9;
  a.gamma_K = 2.0;
  a.B_K = 1.0;
  EXPECT_NEAR(risk_penalized_utility(u), u.Lambda1 * alignment_lower_bound(a), 1e-12);
  u.q_K = precision_threshold(2.0, 1.0);
  u.kappa = 0.4;
  u.V_bar_K = 0.05;
  EXPECT_NEAR(risk_penalized_utility(u), -0.4 * u.Lambda2 * 0.3 * 0.05, 1e-12);
  EXPECT_LE(risk_penalized_utility(u), 0.0);
}
