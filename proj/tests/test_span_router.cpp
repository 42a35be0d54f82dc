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

#include <algorithm>
#include <cmath>
#include <limits>

#include "spanrl/divergence.hpp"
#include "spanrl/span_router.hpp"

using namespace spanrl;

namespace {

std::vector<TokenInterval> unit_tokens(std::size_t n, std::size_t width = 4) {
  std::vector<TokenInterval> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = {i * width, (i + 1) * width};
  return t;
}

Mask mask_of(std::size_t n, std::initializer_list<std::size_t> on) {
  Mask m(n, 0);
  for (auto i : on) m[i] = 1;
  return m;
}

}  // namespace

TEST(SpanType, NamesRoundTrip) {
  for (int i = 0; i < kNumSpanTypes; ++i) {
    const auto t = static_cast<SpanType>(i);
    EXPECT_EQ(span_type_from_name(span_type_name(t)), t);
    EXPECT_EQ(is_error_type(t), i < kNumErrorTypes);
  }
  EXPECT_THROW(span_type_from_name("nope"), Error);
}

TEST(Projection, Examples) {
  const auto tok = unit_tokens(6);
  EXPECT_EQ(project_spans_to_mask({}, tok), Mask(6, 0));
  EXPECT_EQ(project_spans_to_mask({{12, 16, SpanType::insight}}, tok), mask_of(6, {3}));
  EXPECT_EQ(project_spans_to_mask({{10, 13, SpanType::insight}}, tok), mask_of(6, {2, 3}));
}

TEST(Projection, BruteForceIntersection) {
  // character-level oracle: a token is marked iff some character lies in both
  const auto tok = unit_tokens(5, 3);
  for (std::size_t a = 0; a < 15; ++a)
    for (std::size_t b = a + 1; b <= 15; ++b) {
      const Mask m = project_spans_to_mask({{a, b, SpanType::insight}}, tok);
      for (std::size_t i = 0; i < 5; ++i) {
        bool hit = false;
        for (std::size_t ch = a; ch < b; ++ch) hit |= ch >= tok[i].start && ch < tok[i].end;
        EXPECT_EQ(m[i] != 0, hit);
      }
    }
}

TEST(Projection, AlignmentErrors) {
  EXPECT_THROW(project_spans_to_mask({}, {{0, 4}, {3, 6}}), Error);
  EXPECT_THROW(project_spans_to_mask({{2, 2, SpanType::insight}}, unit_tokens(2)), Error);
}

TEST(CoverageCap, Examples) {
  EXPECT_EQ(enforce_coverage_cap(mask_of(10, {1, 7}), std::vector<double>(10, 1.0), 0.25),
            mask_of(10, {1, 7}));
  Mask big(100, 0);
  for (int i = 0; i < 40; ++i) big[i * 2] = 1;
  const auto out = enforce_coverage_cap(big, std::vector<double>(100, 1.0), 0.25);
  EXPECT_EQ(std::count(out.begin(), out.end(), 1), 25);
  EXPECT_EQ(enforce_coverage_cap(mask_of(8, {1, 3, 4, 6, 7}), std::vector<double>(8, 1.0), 0.25),
            mask_of(8, {1, 3}));
}

TEST(CoverageCap, KeepsHeaviest) {
  std::vector<double> w = {0.1, 0.9, 0.2, 0.8, 0.5, 0.0, 0.0, 0.0};
  EXPECT_EQ(enforce_coverage_cap(mask_of(8, {0, 1, 2, 3, 4}), w, 0.25), mask_of(8, {1, 3}));
}

TEST(CoverageCap, CapValues) {
  EXPECT_EQ(coverage_cap(4, 0.25), 1u);
  EXPECT_EQ(coverage_cap(5, 0.25), 2u);
  EXPECT_EQ(coverage_cap(8, 0.25), 2u);
  EXPECT_EQ(coverage_cap(100, 0.25), 25u);
  EXPECT_THROW(coverage_cap(4, 0.0), Error);
}

TEST(Partition, Examples) {
  const auto p = partition(8, mask_of(8, {2, 5}), 1);
  EXPECT_EQ(p.key_idx, (std::vector<std::size_t>{2, 5}));
  EXPECT_TRUE(p.error_idx.empty());
  EXPECT_EQ(p.nonspan_idx.size(), 6u);
  const auto q = partition(8, mask_of(8, {2, 5}), 0);
  EXPECT_EQ(q.error_idx, (std::vector<std::size_t>{2, 5}));
  EXPECT_TRUE(q.key_idx.empty());
  EXPECT_EQ(q.span_size(), 2u);
  EXPECT_THROW(partition(8, Mask(7, 0), 1), Error);
  EXPECT_THROW(partition(8, Mask(8, 0), 2), Error);
}

TEST(Schedule, Values) {
  const RoutingConfig c;
  EXPECT_EQ(lambda_schedule(0, c), 0.5);
  EXPECT_EQ(lambda_schedule(5, c), 0.5);
  EXPECT_EQ(lambda_schedule(10, c), 0.5);
  EXPECT_EQ(lambda_schedule(25, c), 0.25);
  EXPECT_EQ(lambda_schedule(40, c), 0.0);
  EXPECT_EQ(lambda_schedule(100, c), 0.0);
  EXPECT_THROW(lambda_schedule(-1, c), Error);
}

TEST(Schedule, Rho) {
  EXPECT_EQ(rho(0.5, 0.5), 0.0);
  EXPECT_EQ(rho(0.0, 0.5), 1.0);
  EXPECT_EQ(rho(0.25, 0.5), 0.5);
  EXPECT_THROW(rho(0.6, 0.5), Error);
  EXPECT_THROW(rho(-0.1, 0.5), Error);
}

TEST(Schedule, ClosedFormSumsMatchDirectSummation) {
  for (int ts : {0, 3, 10})
    for (int td : {1, 7, 30}) {
      RoutingConfig c;
      c.t_start = ts;
      c.T_decay = td;
      double s1 = 0, s2 = 0;
      for (long k = 0; k < 1000; ++k) {
        const double l = lambda_schedule(k, c);
        s1 += l;
        s2 += l * l;
      }
      EXPECT_NEAR(schedule_lambda1(c), s1, 1e-12);
      EXPECT_NEAR(schedule_lambda2(c), s2, 1e-12);
    }
  const RoutingConfig d;
  EXPECT_NEAR(schedule_lambda1(d), 12.75, 1e-12);
  EXPECT_NEAR(schedule_lambda2(d), 0.25 * (10 + 31.0 * 61.0 / 180.0), 1e-12);
}

TEST(RoutingConfig, Validate) {
  RoutingConfig c;
  EXPECT_NO_THROW(c.validate());
  c.alpha = 0;
  EXPECT_THROW(c.validate(), Error);
  c = RoutingConfig{};
  c.mu_E = 2;
  EXPECT_THROW(c.validate(), Error);
}

namespace {

RoutedItem item(const std::vector<int>& y, const Mask& m, int outcome, const Distribution& s,
                const Distribution& t, double adv) {
  RoutedItem it;
  it.tokens = y;
  it.part = partition(y.size(), m, outcome);
  it.student.assign(y.size(), s);
  it.teacher.assign(y.size(), t);
  it.advantage = adv;
  return it;
}

const Distribution kS = {0.6, 0.3, 0.1};
const Distribution kT = {0.2, 0.5, 0.3};

RoutingConfig no_clip(int muE, int muK) {
  RoutingConfig c;
  c.mu_E = muE;
  c.mu_K = muK;
  c.tau = std::numeric_limits<double>::infinity();
  return c;
}

LossOptions no_floor() {
  LossOptions o;
  o.p_min = 0.0;
  return o;
}

}  // namespace

TEST(RoutedLoss, ZeroLambdaIsPureGrpoWithoutTeacher) {
  std::vector<RoutedItem> b = {item({0, 1, 2, 0}, mask_of(4, {1}), 1, kS, kS, 1.0),
                               item({1, 1, 0, 2}, mask_of(4, {2}), 0, kS, kS, -1.0)};
  for (auto& it : b) it.teacher.clear();
  const auto rep = routed_step_loss(b, 0.0, no_clip(1, 1), no_floor());
  EXPECT_FALSE(rep.teacher_consulted);
  EXPECT_EQ(rep.kl_error_branch, 0.0);
  EXPECT_EQ(rep.kl_key_branch, 0.0);
  // GRPO at ratio 1: loss per token is -A, averaged over length then batch
  EXPECT_NEAR(rep.total, (-1.0 + 1.0) / 2.0, 1e-15);
  // token gradient oracle: -A (e_y - pi) / (L N)
  const auto& g = rep.per_token_logit_grads[0][0];
  for (int v = 0; v < 3; ++v) EXPECT_NEAR(g[v], -1.0 * ((v == 0) - kS[v]) / 8.0, 1e-15);
}

TEST(RoutedLoss, DeadZoneKeyBranchOnly) {
  std::vector<RoutedItem> b;
  for (int i = 0; i < 4; ++i) b.push_back(item({0, 1, 2, 0}, mask_of(4, {2}), 1, kS, kT, 0.0));
  const auto rep = routed_step_loss(b, 0.5, no_clip(0, 1), no_floor());
  EXPECT_TRUE(rep.teacher_consulted);
  EXPECT_EQ(rep.grpo_nonspan, 0.0);
  EXPECT_EQ(rep.grpo_span, 0.0);
  for (const auto& it : rep.per_token_logit_grads)
    for (int t = 0; t < 4; ++t) {
      const double n = std::fabs(it[t][0]) + std::fabs(it[t][1]) + std::fabs(it[t][2]);
      if (t == 2)
        EXPECT_GT(n, 0.0);
      else
        EXPECT_EQ(n, 0.0);
    }
  // lambda * mu_K * (p - q) / (L N)
  const auto g = fkl_logit_grad(kS, kT);
  for (int v = 0; v < 3; ++v) EXPECT_NEAR(rep.per_token_logit_grads[0][2][v], 0.5 * g[v] / 16.0, 1e-15);
}

TEST(RoutedLoss, BranchValuesMatchHandComputation) {
  // one correct rollout with two key tokens, one wrong with one error token
  std::vector<RoutedItem> b = {item({0, 1, 2, 0}, mask_of(4, {0, 3}), 1, kS, kT, 0.0),
                               item({1, 1, 0, 2}, mask_of(4, {1}), 0, kS, kT, 0.0)};
  const double lam = 0.25;
  const auto rep = routed_step_loss(b, lam, no_clip(1, 1), no_floor());
  const double fk = kl(kT, kS), rk = kl(kS, kT);
  // span mean times |S|/|y| per rollout, then the batch mean
  EXPECT_NEAR(rep.kl_key_branch, (fk * 2.0 / 4.0) / 2.0, 1e-15);
  EXPECT_NEAR(rep.kl_error_branch, (rk * 1.0 / 4.0) / 2.0, 1e-15);
  EXPECT_NEAR(rep.kl_key_rawsum, rep.kl_key_branch, 1e-15);
  EXPECT_NEAR(rep.total, lam * (rep.kl_key_branch + rep.kl_error_branch), 1e-15);
  EXPECT_EQ(rep.rho_k, 0.5);
}

TEST(RoutedLoss, GradientMatchesFiniteDifferenceOfTotal) {
  // Rebuild the total from logits and differentiate numerically.
  const Logits l = {0.4, -0.2, 0.1};
  const std::vector<int> y = {0, 2, 1};
  const Mask m = mask_of(3, {1});
  const double lam = 0.3;
  for (int outcome : {0, 1}) {
    auto total = [&](const Logits& row, int pos) {
      RoutedItem it;
      it.tokens = y;
      it.part = partition(3, m, outcome);
      it.student.assign(3, softmax(l));
      it.student[pos] = softmax(row);
      it.teacher.assign(3, kT);
      it.advantage = outcome ? 0.7 : -0.7;
      // log ratio against the frozen old policy
      it.log_ratio.assign(3, 0.0);
      it.log_ratio[pos] = std::log(softmax(row)[y[pos]]) - std::log(softmax(l)[y[pos]]);
      return routed_step_loss({it}, lam, no_clip(1, 1), no_floor()).total;
    };
    RoutedItem it;
    it.tokens = y;
    it.part = partition(3, m, outcome);
    it.student.assign(3, softmax(l));
    it.teacher.assign(3, kT);
    it.advantage = outcome ? 0.7 : -0.7;
    const auto rep = routed_step_loss({it}, lam, no_clip(1, 1), no_floor());
    for (int pos = 0; pos < 3; ++pos)
      for (int v = 0; v < 3; ++v) {
        Logits a = l, b = l;
        a[v] += 1e-6;
        b[v] -= 1e-6;
        const double fd = (total(a, pos) - total(b, pos)) / 2e-6;
        EXPECT_NEAR(rep.per_token_logit_grads[0][pos][v], fd, 1e-8) << pos << ' ' << v;
      }
  }
}

TEST(RoutedLoss, EmptyMaskAndEqualPolicies) {
  std::vector<RoutedItem> b = {item({0, 1}, Mask(2, 0), 1, kS, kT, 0.0)};
  auto rep = routed_step_loss(b, 0.5, no_clip(1, 1));
  EXPECT_EQ(rep.total, 0.0);
  EXPECT_FALSE(rep.teacher_consulted);
  b = {item({0, 1}, Mask(2, 1), 1, kS, kS, 0.0), item({0, 1}, Mask(2, 1), 0, kS, kS, 0.0)};
  rep = routed_step_loss(b, 0.5, no_clip(1, 1), no_floor());
  EXPECT_EQ(rep.kl_key_branch, 0.0);
  EXPECT_EQ(rep.kl_error_branch, 0.0);
}

TEST(RoutedLoss, Errors) {
  EXPECT_THROW(routed_step_loss({}, 0.5, RoutingConfig{}), Error);
  auto it = item({0, 1}, Mask(2, 1), 1, kS, kT, 0.0);
  it.teacher.clear();
  EXPECT_THROW(routed_step_loss({it}, 0.5, RoutingConfig{}), Error);
  EXPECT_THROW(routed_step_loss({item({0, 1}, Mask(2, 1), 1, kS, kT, 0.0)}, 0.7, RoutingConfig{}),
               Error);
}
