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

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include "spanrl/divergence.hpp"
#include "spanrl/error.hpp"
#include "spanrl/grpo.hpp"
#include "spanrl/policy.hpp"

namespace spanrl {

// Coarse labels. The first block describes errors, the second key steps.
enum class SpanType : int {
  missed_case,
  illegal_step,
  wrong_constraint,
  wrong_equivalence,
  premature_conclusion,
  format_error,
  arithmetic_slip,
  sign_error,
  off_by_one,
  case_split,
  boundary_check,
  invariant,
  substitution,
  constraint_use,
  symmetry,
  construction_step,
  final_verification,
  key_formula,
  insight,
};

inline constexpr int kNumErrorTypes = 9;
inline constexpr int kNumStepTypes = 10;
inline constexpr int kNumSpanTypes = kNumErrorTypes + kNumStepTypes;

inline constexpr std::array<std::string_view, kNumSpanTypes> kSpanTypeNames = {
    "missed_case",   "illegal_step",      "wrong_constraint",   "wrong_equivalence",
    "premature_conclusion", "format_error", "arithmetic_slip",  "sign_error",
    "off_by_one",    "case_split",        "boundary_check",     "invariant",
    "substitution",  "constraint_use",    "symmetry",           "construction_step",
    "final_verification", "key_formula",  "insight"};

inline bool is_error_type(SpanType t) { return static_cast<int>(t) < kNumErrorTypes; }
inline std::string_view span_type_name(SpanType t) { return kSpanTypeNames[static_cast<int>(t)]; }
inline SpanType span_type_from_name(std::string_view s) {
  for (int i = 0; i < kNumSpanTypes; ++i)
    if (kSpanTypeNames[i] == s) return static_cast<SpanType>(i);
  throw input_error("unknown span type: " + std::string(s));
}

struct CharSpan {
  std::size_t start = 0;
  std::size_t end = 0;  // half-open
  SpanType type = SpanType::key_formula;
};

struct TokenInterval {
  std::size_t start = 0;
  std::size_t end = 0;
};

using Mask = std::vector<std::uint8_t>;

inline Mask project_spans_to_mask(const std::vector<CharSpan>& spans,
                                  const std::vector<TokenInterval>& tokens) {
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    SPANRL_REQUIRE(tokens[i].start <= tokens[i].end, input_error, "alignment error: bad interval");
    if (i > 0)
      SPANRL_REQUIRE(tokens[i].start >= tokens[i - 1].end, input_error,
                     "alignment error: overlapping token intervals");
  }
  Mask m(tokens.size(), 0);
  for (const auto& s : spans) {
    SPANRL_REQUIRE(s.start < s.end, input_error, "empty span");
    for (std::size_t i = 0; i < tokens.size(); ++i)
      if (tokens[i].start < s.end && s.start < tokens[i].end) m[i] = 1;
  }
  return m;
}

inline std::size_t coverage_cap(std::size_t len, double alpha) {
  SPANRL_REQUIRE(alpha > 0.0 && alpha <= 1.0, input_error, "alpha outside (0,1]");
  // guard against 0.25 * 100 landing a hair above 25
  return static_cast<std::size_t>(std::ceil(alpha * static_cast<double>(len) - 1e-9));
}

inline Mask enforce_coverage_cap(const Mask& mask, const std::vector<double>& weights,
                                 double alpha) {
  SPANRL_REQUIRE(weights.size() == mask.size(), input_error, "weights/mask length mismatch");
  const std::size_t cap = coverage_cap(mask.size(), alpha);
  std::vector<std::size_t> marked;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) marked.push_back(i);
  if (marked.size() <= cap) return mask;
  std::stable_sort(marked.begin(), marked.end(),
                   [&](std::size_t a, std::size_t b) { return weights[a] > weights[b]; });
  Mask out(mask.size(), 0);
  for (std::size_t i = 0; i < cap; ++i) out[marked[i]] = 1;
  return out;
}

struct SpanPartition {
  std::vector<std::size_t> error_idx;
  std::vector<std::size_t> key_idx;
  std::vector<std::size_t> nonspan_idx;
  Mask mask;

  std::size_t span_size() const { return error_idx.size() + key_idx.size(); }
};

inline SpanPartition partition(std::size_t rollout_len, const Mask& mask, int verifier_outcome) {
  SPANRL_REQUIRE(mask.size() == rollout_len, input_error, "mask/rollout length mismatch");
  SPANRL_REQUIRE(verifier_outcome == 0 || verifier_outcome == 1, input_error, "outcome not binary");
  SpanPartition p;
  p.mask = mask;
  for (std::size_t t = 0; t < rollout_len; ++t) {
    if (!mask[t])
      p.nonspan_idx.push_back(t);
    else if (verifier_outcome == 1)
      p.key_idx.push_back(t);
    else
      p.error_idx.push_back(t);
  }
  return p;
}

struct RoutingConfig {
  int mu_E = 0;
  int mu_K = 1;
  double alpha = 0.25;
  double tau = 0.05;  // non-finite disables the per-vocab clip
  double w0 = 0.5;
  int t_start = 10;
  int T_decay = 30;
  int sync_N = 10;

  void validate() const {
    SPANRL_REQUIRE((mu_E == 0 || mu_E == 1) && (mu_K == 0 || mu_K == 1), config_error,
                   "mu entries must be 0 or 1");
    SPANRL_REQUIRE(alpha > 0.0 && alpha <= 1.0, config_error, "alpha outside (0,1]");
    SPANRL_REQUIRE(w0 > 0.0, config_error, "w0 must be positive");
    SPANRL_REQUIRE(t_start >= 0 && T_decay >= 1 && sync_N >= 1, config_error,
                   "schedule constants out of range");
    SPANRL_REQUIRE(!(tau <= 0.0), config_error, "tau must be positive");
  }
};

inline double lambda_schedule(long k, const RoutingConfig& cfg) {
  SPANRL_REQUIRE(k >= 0, input_error, "negative step");
  if (k < cfg.t_start) return cfg.w0;
  const long end = static_cast<long>(cfg.t_start) + cfg.T_decay;
  if (k > end) return 0.0;
  return cfg.w0 * (1.0 - static_cast<double>(k - cfg.t_start) / static_cast<double>(cfg.T_decay));
}

inline double rho(double lambda_k, double w0) {
  SPANRL_REQUIRE(lambda_k >= 0.0 && lambda_k <= w0, input_error, "lambda outside [0, w0]");
  return 1.0 - lambda_k / w0;
}

// Closed forms of sum_k lambda_k and sum_k lambda_k^2 over k >= 0.
inline double schedule_lambda1(const RoutingConfig& c) {
  return c.w0 * c.t_start + c.w0 * (c.T_decay + 1) / 2.0;
}
inline double schedule_lambda2(const RoutingConfig& c) {
  const double T = c.T_decay;
  return c.w0 * c.w0 * (c.t_start + (T + 1.0) * (2.0 * T + 1.0) / (6.0 * T));
}

struct LossOptions {
  ClipConfig clip;
  std::size_t floor_top_k = 0;  // 0 keeps the whole vocabulary
  double p_min = 1e-9;
};

struct RoutedItem {
  std::vector<int> tokens;
  SpanPartition part;
  std::vector<Distribution> student;  // per position
  std::vector<Distribution> teacher;  // per position; may be empty when the KL is off
  std::vector<double> log_ratio;      // per position; empty means on-policy
  std::vector<double> token_weight;   // per position advantage multiplier; empty means 1
  double advantage = 0.0;
};

struct RoutedLossReport {
  double total = 0.0;
  double grpo_nonspan = 0.0;
  double grpo_span = 0.0;
  double kl_error_branch = 0.0;
  double kl_key_branch = 0.0;
  // same branches written as a raw per-token sum over |y|
  double kl_error_rawsum = 0.0;
  double kl_key_rawsum = 0.0;
  double lambda_k = 0.0;
  double rho_k = 1.0;
  // [item][position] -> logit gradient of total
  std::vector<std::vector<KlGradient>> per_token_logit_grads;
  std::vector<std::vector<KlGradient>> span_grads;
  std::vector<std::vector<KlGradient>> nonspan_grads;
  bool teacher_consulted = false;
};

inline Distribution floored(const Distribution& p, const LossOptions& o) {
  const std::size_t k = o.floor_top_k == 0 ? p.size() : o.floor_top_k;
  if (k == p.size() && o.p_min == 0.0) return p;
  return truncate_and_floor(p, k, o.p_min);
}

inline RoutedLossReport routed_step_loss(const std::vector<RoutedItem>& batch, double lambda_k,
                                         const RoutingConfig& cfg, const LossOptions& opt = {}) {
  SPANRL_REQUIRE(!batch.empty(), input_error, "empty batch");
  RoutedLossReport rep;
  rep.lambda_k = lambda_k;
  rep.rho_k = rho(lambda_k, cfg.w0);
  const double n_items = static_cast<double>(batch.size());
  const bool kl_live = lambda_k > 0.0;

  for (const auto& it : batch) {
    const std::size_t L = it.tokens.size();
    SPANRL_REQUIRE(L > 0, input_error, "zero-length rollout");
    SPANRL_REQUIRE(it.part.mask.size() == L && it.student.size() == L, input_error,
                   "dimension mismatch between partition and rollout");
    const std::size_t V = it.student[0].size();
    const double inv_len = 1.0 / static_cast<double>(L);
    const double scale = inv_len / n_items;

    std::vector<KlGradient> grads(L, KlGradient(V, 0.0));
    std::vector<KlGradient> sgrads(L, KlGradient(V, 0.0));
    std::vector<KlGradient> ngrads(L, KlGradient(V, 0.0));

    double g_non = 0.0, g_span = 0.0;
    for (std::size_t t = 0; t < L; ++t) {
      const double lr = it.log_ratio.empty() ? 0.0 : it.log_ratio[t];
      const double adv = it.advantage * (it.token_weight.empty() ? 1.0 : it.token_weight[t]);
      const GrpoTokenTerm term = grpo_token_loss(lr, adv, opt.clip);
      const bool in_span = it.part.mask[t] != 0;
      const double w = in_span ? rep.rho_k : 1.0;
      if (in_span)
        g_span += term.loss;
      else
        g_non += term.loss;
      if (term.grad_factor != 0.0 && w != 0.0) {
        auto& dst = in_span ? sgrads[t] : ngrads[t];
        const int y = it.tokens[t];
        for (std::size_t v = 0; v < V; ++v) {
          const double score = (static_cast<int>(v) == y ? 1.0 : 0.0) - it.student[t][v];
          dst[v] += w * term.grad_factor * score * scale;
        }
      }
    }
    rep.grpo_nonspan += g_non * inv_len / n_items;
    rep.grpo_span += g_span * inv_len / n_items;

    auto branch = [&](const std::vector<std::size_t>& idx, bool reverse, int mu, double& value,
                      double& rawsum) {
      if (!kl_live || mu == 0 || idx.empty()) return;
      SPANRL_REQUIRE(it.teacher.size() == L, input_error, "teacher distributions missing");
      rep.teacher_consulted = true;
      double sum = 0.0;
      for (std::size_t t : idx) {
        const Distribution s = floored(it.student[t], opt);
        const Distribution q = floored(it.teacher[t], opt);
        const ClippedKl c = reverse ? rkl_clipped(s, q, cfg.tau) : fkl_clipped(s, q, cfg.tau);
        sum += c.value;
        const double f = lambda_k * mu * scale;
        for (std::size_t v = 0; v < V; ++v) sgrads[t][v] += f * c.grad[v];
      }
      const double span_mean = sum / static_cast<double>(idx.size());
      value += span_mean * (static_cast<double>(idx.size()) * inv_len) / n_items;
      rawsum += sum * inv_len / n_items;
    };
    branch(it.part.error_idx, true, cfg.mu_E, rep.kl_error_branch, rep.kl_error_rawsum);
    branch(it.part.key_idx, false, cfg.mu_K, rep.kl_key_branch, rep.kl_key_rawsum);

    for (std::size_t t = 0; t < L; ++t)
      for (std::size_t v = 0; v < V; ++v) grads[t][v] = sgrads[t][v] + ngrads[t][v];
    rep.per_token_logit_grads.push_back(std::move(grads));
    rep.span_grads.push_back(std::move(sgrads));
    rep.nonspan_grads.push_back(std::move(ngrads));
  }
  rep.total = rep.grpo_nonspan + rep.rho_k * rep.grpo_span +
              lambda_k * (cfg.mu_E * rep.kl_error_branch + cfg.mu_K * rep.kl_key_branch);
  return rep;
}

}  // namespace spanrl
