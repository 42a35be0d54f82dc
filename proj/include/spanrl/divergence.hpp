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
#include <vector>

#include "spanrl/error.hpp"
#include "spanrl/policy.hpp"

namespace spanrl {

using KlGradient = std::vector<double>;

struct LogRatioStats {
  std::vector<double> r;  // log(student / teacher)
  double r_bar = 0.0;     // student-weighted mean of r
};

inline void check_same_size(const Distribution& a, const Distribution& b) {
  SPANRL_REQUIRE(a.size() == b.size(), input_error, "dimension mismatch");
}

// KL(p || q) in nats.
inline double kl(const Distribution& p, const Distribution& q) {
  check_same_size(p, q);
  double s = 0.0;
  for (std::size_t v = 0; v < p.size(); ++v) {
    if (p[v] <= 0.0) continue;
    SPANRL_REQUIRE(q[v] > 0.0, input_error, "undefined divergence: q vanishes on supp(p)");
    s += p[v] * std::log(p[v] / q[v]);
  }
  return std::max(0.0, s);
}

inline LogRatioStats log_ratio_stats(const Distribution& student, const Distribution& teacher) {
  check_same_size(student, teacher);
  LogRatioStats st;
  st.r.assign(student.size(), 0.0);
  for (std::size_t v = 0; v < student.size(); ++v) {
    if (student[v] <= 0.0) continue;
    SPANRL_REQUIRE(teacher[v] > 0.0, input_error,
                   "undefined divergence: teacher vanishes on student support");
    st.r[v] = std::log(student[v] / teacher[v]);
    st.r_bar += student[v] * st.r[v];
  }
  return st;
}

// d KL(teacher || softmax(l)) / dl.
inline KlGradient fkl_logit_grad(const Distribution& student, const Distribution& teacher) {
  check_same_size(student, teacher);
  KlGradient g(student.size());
  for (std::size_t v = 0; v < g.size(); ++v) g[v] = student[v] - teacher[v];
  return g;
}

// d KL(softmax(l) || teacher) / dl.
inline KlGradient rkl_logit_grad(const Distribution& student, const Distribution& teacher) {
  const LogRatioStats st = log_ratio_stats(student, teacher);
  KlGradient g(student.size());
  for (std::size_t v = 0; v < g.size(); ++v) g[v] = student[v] * (st.r[v] - st.r_bar);
  return g;
}

inline KlGradient mixed_beta_grad(const Distribution& student, const Distribution& teacher,
                                  double beta) {
  SPANRL_REQUIRE(beta >= 0.0 && beta <= 1.0, input_error, "beta outside [0,1]");
  const KlGradient f = fkl_logit_grad(student, teacher);
  const KlGradient r = rkl_logit_grad(student, teacher);
  KlGradient g(f.size());
  for (std::size_t v = 0; v < g.size(); ++v) g[v] = beta * f[v] + (1.0 - beta) * r[v];
  return g;
}

inline std::vector<double> clip_per_vocab_kl(std::vector<double> terms, double tau) {
  SPANRL_REQUIRE(tau > 0.0, input_error, "tau must be positive");
  for (double& t : terms) t = std::clamp(t, -tau, tau);
  return terms;
}

// Per-vocabulary contributions whose sum is the KL value.
inline std::vector<double> fkl_terms(const Distribution& student, const Distribution& teacher) {
  check_same_size(student, teacher);
  std::vector<double> t(student.size(), 0.0);
  for (std::size_t v = 0; v < t.size(); ++v) {
    if (teacher[v] <= 0.0) continue;
    SPANRL_REQUIRE(student[v] > 0.0, input_error, "undefined divergence: student vanishes");
    t[v] = teacher[v] * std::log(teacher[v] / student[v]);
  }
  return t;
}

inline std::vector<double> rkl_terms(const Distribution& student, const Distribution& teacher) {
  check_same_size(student, teacher);
  std::vector<double> t(student.size(), 0.0);
  for (std::size_t v = 0; v < t.size(); ++v) {
    if (student[v] <= 0.0) continue;
    SPANRL_REQUIRE(teacher[v] > 0.0, input_error, "undefined divergence: teacher vanishes");
    t[v] = student[v] * std::log(student[v] / teacher[v]);
  }
  return t;
}

struct ClippedKl {
  double value = 0.0;
  KlGradient grad;
  std::size_t n_clipped = 0;
};

inline bool clipping_enabled(double tau) { return std::isfinite(tau) && tau > 0.0; }

// Clipped terms are constants; the gradient flows through the rest only.
// A non-finite tau disables clipping.
inline ClippedKl fkl_clipped(const Distribution& student, const Distribution& teacher,
                             double tau) {
  const auto terms = fkl_terms(student, teacher);
  const std::size_t V = student.size();
  ClippedKl out;
  out.grad.assign(V, 0.0);
  std::vector<char> live(V, 1);
  if (clipping_enabled(tau)) {
    for (std::size_t v = 0; v < V; ++v) {
      live[v] = std::fabs(terms[v]) <= tau;
      out.n_clipped += !live[v];
    }
    for (double t : clip_per_vocab_kl(terms, tau)) out.value += t;
  } else {
    for (double t : terms) out.value += t;
  }
  if (out.n_clipped == 0) {
    out.grad = fkl_logit_grad(student, teacher);
    return out;
  }
  double q_live = 0.0;
  for (std::size_t v = 0; v < V; ++v)
    if (live[v]) q_live += teacher[v];
  for (std::size_t v = 0; v < V; ++v)
    out.grad[v] = student[v] * q_live - (live[v] ? teacher[v] : 0.0);
  return out;
}

inline ClippedKl rkl_clipped(const Distribution& student, const Distribution& teacher,
                             double tau) {
  const auto terms = rkl_terms(student, teacher);
  const std::size_t V = student.size();
  ClippedKl out;
  out.grad.assign(V, 0.0);
  std::vector<char> live(V, 1);
  if (clipping_enabled(tau)) {
    for (std::size_t v = 0; v < V; ++v) {
      live[v] = std::fabs(terms[v]) <= tau;
      out.n_clipped += !live[v];
    }
    for (double t : clip_per_vocab_kl(terms, tau)) out.value += t;
  } else {
    for (double t : terms) out.value += t;
  }
  if (out.n_clipped == 0) {
    out.grad = rkl_logit_grad(student, teacher);
    return out;
  }
  const LogRatioStats st = log_ratio_stats(student, teacher);
  double s = 0.0;
  for (std::size_t v = 0; v < V; ++v)
    if (live[v]) s += student[v] * (st.r[v] + 1.0);
  for (std::size_t v = 0; v < V; ++v)
    out.grad[v] = (live[v] ? student[v] * (st.r[v] + 1.0) : 0.0) - student[v] * s;
  return out;
}

}  // namespace spanrl
