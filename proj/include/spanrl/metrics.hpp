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

#include <cmath>
#include <optional>
#include <vector>

#include "spanrl/error.hpp"
#include "spanrl/span_router.hpp"

namespace spanrl {

struct LiftSample {
  int position = 0;
  int token = 0;
  double logprob_before = 0.0;
  double logprob_after = 0.0;
  bool teacher_supported = false;  // judged at the pre-update policy
};

// Absent when no sample survives the teacher-support filter.
inline std::optional<double> delta_lift(const std::vector<LiftSample>& samples) {
  double s = 0.0;
  std::size_t n = 0;
  for (const auto& x : samples) {
    if (!x.teacher_supported) continue;
    s += x.logprob_after - x.logprob_before;
    ++n;
  }
  if (n == 0) return std::nullopt;
  return s / static_cast<double>(n);
}

inline std::optional<double> credit_concentration(const std::vector<double>& credit,
                                                  const Mask& mask) {
  SPANRL_REQUIRE(credit.size() == mask.size(), input_error, "credit/mask length mismatch");
  double in = 0.0, out = 0.0;
  std::size_t n_in = 0, n_out = 0;
  for (std::size_t i = 0; i < credit.size(); ++i) {
    SPANRL_REQUIRE(credit[i] >= 0.0, input_error, "credit must be nonnegative");
    if (mask[i]) {
      in += credit[i];
      ++n_in;
    } else {
      out += credit[i];
      ++n_out;
    }
  }
  if (n_in == 0 || n_out == 0) return std::nullopt;
  const double mo = out / static_cast<double>(n_out);
  if (!(mo > 0.0)) return std::nullopt;
  return (in / static_cast<double>(n_in)) / mo;
}

// L2 norm of each position's logit gradient times the step size.
inline std::vector<double> update_credit(const std::vector<std::vector<double>>& grads, double lr) {
  std::vector<double> c(grads.size(), 0.0);
  for (std::size_t t = 0; t < grads.size(); ++t) {
    double s = 0.0;
    for (double g : grads[t]) s += g * g;
    c[t] = std::sqrt(s) * lr;
  }
  return c;
}

// alpha is the retention weight: s_k = alpha s_{k-1} + (1 - alpha) x_k.
inline std::vector<double> ema(const std::vector<double>& series, double alpha) {
  SPANRL_REQUIRE(alpha >= 0.0 && alpha <= 1.0, input_error, "alpha outside [0,1]");
  std::vector<double> out;
  out.reserve(series.size());
  for (std::size_t i = 0; i < series.size(); ++i)
    out.push_back(i == 0 ? series[0] : alpha * out.back() + (1.0 - alpha) * series[i]);
  return out;
}

}  // namespace spanrl
