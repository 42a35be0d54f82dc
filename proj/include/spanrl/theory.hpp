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
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "spanrl/divergence.hpp"
#include "spanrl/error.hpp"
#include "spanrl/policy.hpp"
#include "spanrl/span_router.hpp"

namespace spanrl {

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  SPANRL_REQUIRE(a.size() == b.size(), input_error, "dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double mass(const Distribution& p, const std::vector<std::size_t>& set) {
  double s = 0.0;
  for (std::size_t v : set) s += p[v];
  return s;
}

// Explicit Euler on d pi / dt = pi_T - pi. Returns horizon/dt + 1 iterates.
inline std::vector<Distribution> natural_gradient_flow(const Distribution& pi0,
                                                       const Distribution& piT, double dt,
                                                       double horizon) {
  check_same_size(pi0, piT);
  SPANRL_REQUIRE(dt > 0.0 && horizon >= 0.0, input_error, "dt must be positive");
  SPANRL_REQUIRE(dt <= 1.0, input_error, "step size error: iterate would leave the simplex");
  const auto n = static_cast<std::size_t>(std::llround(horizon / dt));
  std::vector<Distribution> traj;
  traj.reserve(n + 1);
  traj.push_back(pi0);
  Distribution p = pi0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t v = 0; v < p.size(); ++v) p[v] += dt * (piT[v] - p[v]);
    traj.push_back(p);
  }
  return traj;
}

inline Distribution natural_gradient_closed_form(const Distribution& pi0, const Distribution& piT,
                                                 double t) {
  check_same_size(pi0, piT);
  Distribution p(pi0.size());
  const double e = std::exp(-t);
  for (std::size_t v = 0; v < p.size(); ++v) p[v] = piT[v] + (pi0[v] - piT[v]) * e;
  return p;
}

// Plain gradient descent on the logits of KL(pi_T || softmax(l)).
inline std::vector<Distribution> euclidean_fkl_descent(const Logits& l0, const Distribution& piT,
                                                       double eta, std::size_t steps) {
  Logits l = l0;
  std::vector<Distribution> traj;
  traj.push_back(softmax(l));
  for (std::size_t i = 0; i < steps; ++i) {
    const Distribution p = traj.back();
    for (std::size_t v = 0; v < l.size(); ++v) l[v] -= eta * (p[v] - piT[v]);
    traj.push_back(softmax(l));
  }
  return traj;
}

struct ScoreOperatorCheck {
  double lhs = 0.0;        // || sum_v a_v grad log pi(v) ||^2
  double rhs_bound = 0.0;  // C_s^2 sum_v a_v^2 with C_s = 1
};

inline ScoreOperatorCheck score_operator_check(const std::vector<double>& a,
                                               const Distribution& dist) {
  SPANRL_REQUIRE(a.size() == dist.size(), input_error, "dimension mismatch");
  double s = 0.0, scale = 0.0;
  for (double x : a) {
    s += x;
    scale += std::fabs(x);
  }
  SPANRL_REQUIRE(std::fabs(s) <= 1e-12 * std::max(1.0, scale), input_error,
                 "score operator needs a zero-sum vector");
  const std::size_t V = a.size();
  std::vector<double> acc(V, 0.0);
  for (std::size_t v = 0; v < V; ++v)
    for (std::size_t u = 0; u < V; ++u) acc[u] += a[v] * ((u == v ? 1.0 : 0.0) - dist[u]);
  return {sq_norm(acc), sq_norm(a)};
}

struct CornerInstance {
  std::vector<double> g0, g1, g_null, g_tilde;
  double kappa = 0.0;
  double V_t = 0.0;
};

// beta = nullopt is the no-KL action, which pays no leakage cost.
inline double corner_utility(const CornerInstance& inst, std::optional<double> beta) {
  if (!beta) return dot(inst.g_null, inst.g_tilde);
  SPANRL_REQUIRE(*beta >= 0.0 && *beta <= 1.0, input_error, "beta outside [0,1]");
  return (1.0 - *beta) * dot(inst.g0, inst.g_tilde) + *beta * dot(inst.g1, inst.g_tilde) -
         inst.kappa * inst.V_t;
}

inline double corner_threshold(const CornerInstance& inst, double beta) {
  if (!(inst.V_t > 0.0)) return std::numeric_limits<double>::infinity();
  const std::vector<double>& g = beta == 0.0 ? inst.g0 : inst.g1;
  double s = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) s += (g[i] - inst.g_null[i]) * inst.g_tilde[i];
  return s / inst.V_t;
}

// Best action implied by the thresholds: an endpoint if kappa sits below its
// threshold, the no-KL action otherwise.
inline std::optional<double> threshold_action(const CornerInstance& inst) {
  const double u0 = dot(inst.g0, inst.g_tilde), u1 = dot(inst.g1, inst.g_tilde);
  const double b = u1 > u0 ? 1.0 : 0.0;
  if (inst.kappa < corner_threshold(inst, b)) return b;
  return std::nullopt;
}

struct CornerThresholds {
  double kappa_E = 0.0;
  double kappa_K = 0.0;
  double kappa_N = 0.0;        // C_N eps / V_min with C_N eps measured as max ||g_b - g_null|| ||g~||
  double kappa_N_tight = 0.0;  // max_b <g_b - g_null, g~> / V_t on the non-span instance
  bool interval_nonempty = false;
};

inline CornerThresholds corner_thresholds(const CornerInstance& err, const CornerInstance& key,
                                          const CornerInstance& non) {
  CornerThresholds th;
  th.kappa_E = corner_threshold(err, 0.0);
  th.kappa_K = corner_threshold(key, 1.0);
  if (!(non.V_t > 0.0)) {
    th.kappa_N = th.kappa_N_tight = std::numeric_limits<double>::infinity();
  } else {
    const double gt = std::sqrt(dot(non.g_tilde, non.g_tilde));
    double cn_eps = 0.0;
    for (const auto* g : {&non.g0, &non.g1}) {
      double d2 = 0.0;
      for (std::size_t i = 0; i < g->size(); ++i) {
        const double d = (*g)[i] - non.g_null[i];
        d2 += d * d;
      }
      cn_eps = std::max(cn_eps, std::sqrt(d2) * gt);
    }
    const double v_min = std::min({err.V_t > 0 ? err.V_t : non.V_t, key.V_t > 0 ? key.V_t : non.V_t,
                                   non.V_t});
    th.kappa_N = cn_eps / v_min;
    th.kappa_N_tight = std::max(corner_threshold(non, 0.0), corner_threshold(non, 1.0));
  }
  th.interval_nonempty = th.kappa_N < std::min(th.kappa_E, th.kappa_K);
  return th;
}

struct AlignmentParams {
  double lambda_k = 0.0;
  double p_E = 0.0, p_K = 0.0;
  double q_E = 1.0, q_K = 1.0;
  double gamma_E = 1.0, gamma_K = 1.0;
  double B_E = 0.0, B_K = 0.0;
  int mu_E = 0, mu_K = 1;
};

inline double alignment_lower_bound(const AlignmentParams& p) {
  const double e = p.p_E * (p.q_E * p.gamma_E - (1.0 - p.q_E) * p.B_E);
  const double k = p.p_K * (p.q_K * p.gamma_K - (1.0 - p.q_K) * p.B_K);
  return p.lambda_k * (p.mu_E * e + p.mu_K * k);
}

inline double precision_threshold(double gamma, double B) { return B / (gamma + B); }

struct UtilityParams {
  double Lambda1 = 0.0, Lambda2 = 0.0;
  double C_s = 1.0, V_bar_K = 0.0, kappa = 0.0;
  double p_K = 0.0, q_K = 1.0, gamma_K = 1.0, B_K = 0.0;
};

// Lambda1/Lambda2 by direct summation of the schedule until it reaches zero.
inline UtilityParams utility_params_from_schedule(const RoutingConfig& cfg) {
  UtilityParams u;
  const long end = static_cast<long>(cfg.t_start) + cfg.T_decay;
  for (long k = 0; k <= end; ++k) {
    const double l = lambda_schedule(k, cfg);
    u.Lambda1 += l;
    u.Lambda2 += l * l;
  }
  return u;
}

inline double risk_penalized_utility(const UtilityParams& p) {
  return p.Lambda1 * p.p_K * (p.q_K * p.gamma_K - (1.0 - p.q_K) * p.B_K) -
         p.kappa * p.Lambda2 * p.C_s * p.C_s * p.p_K * p.V_bar_K;
}

}  // namespace spanrl
