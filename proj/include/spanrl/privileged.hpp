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
#include <iomanip>
#include <ostream>
#include <sstream>
#include <vector>

#include "spanrl/error.hpp"
#include "spanrl/policy.hpp"

namespace spanrl {

// Finite context distribution with the teacher it induces at each position.
struct ContextSet {
  std::vector<int> ids;
  std::vector<double> probs;
  std::vector<std::vector<Distribution>> teacher;  // [context][position]

  std::size_t size() const { return ids.size(); }
  std::size_t horizon() const { return teacher.empty() ? 0 : teacher[0].size(); }

  void validate() const {
    SPANRL_REQUIRE(!ids.empty(), input_error, "context set needs at least one context");
    SPANRL_REQUIRE(probs.size() == ids.size() && teacher.size() == ids.size(), input_error,
                   "context set arrays disagree");
    double s = 0.0;
    for (double p : probs) {
      SPANRL_REQUIRE(p >= 0.0, input_error, "negative context probability");
      s += p;
    }
    SPANRL_REQUIRE(std::fabs(s - 1.0) < 1e-12, input_error, "context probabilities must sum to 1");
  }
};

inline Distribution mean_teacher(const ContextSet& ctx, std::size_t t) {
  Distribution m(ctx.teacher[0][t].size(), 0.0);
  for (std::size_t c = 0; c < ctx.size(); ++c)
    for (std::size_t v = 0; v < m.size(); ++v) m[v] += ctx.probs[c] * ctx.teacher[c][t][v];
  return m;
}

inline double privileged_variance(const ContextSet& ctx, std::size_t t) {
  ctx.validate();
  const Distribution m = mean_teacher(ctx, t);
  double var = 0.0;
  for (std::size_t c = 0; c < ctx.size(); ++c)
    for (std::size_t v = 0; v < m.size(); ++v) {
      const double d = ctx.teacher[c][t][v] - m[v];
      var += ctx.probs[c] * d * d;
    }
  return var;
}

// delta_t = -sum_v a_v grad log pi_S(v) with a_v = pi_T(v|c) - mean_c pi_T(v).
// Built row by row from the tabular score e_v - pi_S.
inline std::vector<double> privileged_deviation(const ContextSet& ctx, std::size_t c,
                                                const Distribution& student, std::size_t t) {
  const Distribution m = mean_teacher(ctx, t);
  const std::size_t V = m.size();
  SPANRL_REQUIRE(student.size() == V, input_error, "dimension mismatch");
  std::vector<double> delta(V, 0.0);
  for (std::size_t v = 0; v < V; ++v) {
    const double a = ctx.teacher[c][t][v] - m[v];
    for (std::size_t u = 0; u < V; ++u) {
      const double score = (u == v ? 1.0 : 0.0) - student[u];
      delta[u] -= a * score;
    }
  }
  return delta;
}

// E_c ||delta_t||^2, evaluated from the explicit deviation vectors.
inline double expected_deviation_sq(const ContextSet& ctx, const Distribution& student,
                                    std::size_t t) {
  double s = 0.0;
  for (std::size_t c = 0; c < ctx.size(); ++c)
    s += ctx.probs[c] * sq_norm(privileged_deviation(ctx, c, student, t));
  return s;
}

struct ExposureRecord {
  long k = 0;
  double lambda = 0.0;
  double masked_variance_mean = 0.0;
  double deviation_sq_mean = 0.0;
  double exposure_lhs = 0.0;
  double bound_rhs = 0.0;
};

class ExposureLedger {
 public:
  explicit ExposureLedger(double c_s = 1.0) : c_s_(c_s) {}

  // Throws when the running inequality breaks. Both sides are exact here,
  // so a violation means a formula bug rather than noise.
  void append(long k, double lambda, double masked_variance_mean, double deviation_sq_mean) {
    SPANRL_REQUIRE(std::isfinite(lambda) && std::isfinite(masked_variance_mean) &&
                       std::isfinite(deviation_sq_mean),
                   numeric_error, "non-finite exposure record");
    const double l2 = lambda * lambda;
    lhs_ += l2 * deviation_sq_mean;
    rhs_ += c_s_ * c_s_ * l2 * masked_variance_mean;
    const double tol = 1e-10 * std::max(1.0, std::fabs(rhs_));
    if (lhs_ > rhs_ + tol) {
      std::ostringstream os;
      os << std::setprecision(17) << "exposure bound violated at step " << k << ": lhs=" << lhs_
         << " rhs=" << rhs_;
      throw invariant_error(os.str());
    }
    records_.push_back({k, lambda, masked_variance_mean, deviation_sq_mean, lhs_, rhs_});
  }

  double exposure() const { return lhs_; }
  double bound() const { return rhs_; }
  double c_s() const { return c_s_; }
  const std::vector<ExposureRecord>& records() const { return records_; }

  void write_csv(std::ostream& os) const {
    os << "step,lambda,masked_variance,exposure_lhs,bound_rhs\n";
    os << std::setprecision(17);
    for (const auto& r : records_)
      os << r.k << ',' << r.lambda << ',' << r.masked_variance_mean << ',' << r.exposure_lhs << ','
         << r.bound_rhs << '\n';
  }

 private:
  double c_s_ = 1.0;
  double lhs_ = 0.0;
  double rhs_ = 0.0;
  std::vector<ExposureRecord> records_;
};

struct RlsdWeight {
  double raw = 1.0;
  double clipped = 1.0;
  double eps_w = 0.2;
};

inline RlsdWeight rlsd_weight(double teacher_prob, double student_prob, double eps_w) {
  SPANRL_REQUIRE(student_prob > 0.0, input_error, "student probability must be positive");
  SPANRL_REQUIRE(teacher_prob >= 0.0 && eps_w >= 0.0 && eps_w < 1.0, input_error,
                 "rlsd arguments out of range");
  RlsdWeight w;
  w.eps_w = eps_w;
  w.raw = teacher_prob / student_prob;
  w.clipped = std::clamp(w.raw, 1.0 - eps_w, 1.0 + eps_w);
  return w;
}

}  // namespace spanrl
