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
#include <vector>

#include "spanrl/error.hpp"

namespace spanrl {

struct ClipConfig {
  double eps_low = 0.2;
  double eps_high = 0.28;

  void validate() const {
    SPANRL_REQUIRE(eps_low > 0.0 && eps_low <= eps_high, config_error,
                   "clip needs 0 < eps_low <= eps_high");
  }
};

// Standardized with the population std; a uniform group maps to zeros.
inline std::vector<double> group_advantages(const std::vector<double>& rewards) {
  SPANRL_REQUIRE(rewards.size() >= 2, input_error, "group needs at least two rollouts");
  const double n = static_cast<double>(rewards.size());
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= n;
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  var /= n;
  std::vector<double> a(rewards.size(), 0.0);
  if (var <= 0.0) return a;
  const double sd = std::sqrt(var);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = (rewards[i] - mean) / sd;
  return a;
}

struct GrpoTokenTerm {
  double loss = 0.0;
  // d loss / d log pi(y_t); multiply by (e_y - pi) for logit gradients.
  double grad_factor = 0.0;
  bool clipped = false;
};

inline GrpoTokenTerm grpo_token_loss(double log_ratio, double advantage, const ClipConfig& clip) {
  SPANRL_REQUIRE(std::isfinite(log_ratio), numeric_error, "non-finite log ratio");
  GrpoTokenTerm out;
  if (advantage == 0.0) return out;
  const double ratio = std::exp(log_ratio);
  const double clamped = std::clamp(ratio, 1.0 - clip.eps_low, 1.0 + clip.eps_high);
  const double unclipped_obj = ratio * advantage;
  const double clipped_obj = clamped * advantage;
  if (unclipped_obj <= clipped_obj) {
    out.loss = -unclipped_obj;
    out.grad_factor = -ratio * advantage;
  } else {
    out.loss = -clipped_obj;
    out.clipped = true;
  }
  return out;
}

}  // namespace spanrl
