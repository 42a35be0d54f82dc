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
#include <compare>
#include <cstddef>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "spanrl/error.hpp"

namespace spanrl {

struct Vocabulary {
  std::size_t size = 2;
};

using Logits = std::vector<double>;
using Distribution = std::vector<double>;

inline void check_logits(const Logits& l) {
  SPANRL_REQUIRE(!l.empty(), input_error, "empty logit vector");
  for (double x : l) SPANRL_REQUIRE(std::isfinite(x), input_error, "non-finite logit");
}

inline void check_distribution(const Distribution& p, double tol = 1e-12) {
  SPANRL_REQUIRE(p.size() >= 2, input_error, "distribution needs at least two entries");
  double s = 0.0;
  for (double x : p) {
    SPANRL_REQUIRE(std::isfinite(x) && x >= 0.0 && x <= 1.0 + tol, input_error,
                   "distribution entry outside [0,1]");
    s += x;
  }
  SPANRL_REQUIRE(std::fabs(s - 1.0) <= tol * static_cast<double>(p.size()), input_error,
                 "distribution does not sum to 1");
}

inline double sq_norm(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return s;
}

inline Distribution softmax(const Logits& logits) {
  check_logits(logits);
  const double m = *std::max_element(logits.begin(), logits.end());
  Distribution p(logits.size());
  double z = 0.0;
  for (std::size_t v = 0; v < logits.size(); ++v) {
    p[v] = std::exp(logits[v] - m);
    z += p[v];
  }
  for (double& x : p) x /= z;
  return p;
}

// truncate -> floor -> renormalize, repeated until no supported entry
// drops below the floor again.
inline Distribution truncate_and_floor(const Distribution& dist, std::size_t top_k,
                                       double p_min) {
  const std::size_t V = dist.size();
  SPANRL_REQUIRE(top_k >= 1 && top_k <= V, input_error, "top_k out of range");
  SPANRL_REQUIRE(p_min >= 0.0, input_error, "negative floor");
  SPANRL_REQUIRE(p_min * static_cast<double>(top_k) < 1.0, input_error, "infeasible floor");

  std::vector<std::size_t> order(V);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dist[a] > dist[b]; });
  std::vector<char> keep(V, 0);
  for (std::size_t i = 0; i < top_k; ++i) keep[order[i]] = 1;

  double kept_mass = 0.0;
  for (std::size_t v = 0; v < V; ++v)
    if (keep[v]) kept_mass += dist[v];

  Distribution base(V, 0.0);
  for (std::size_t v = 0; v < V; ++v)
    if (keep[v]) base[v] = kept_mass > 0.0 ? dist[v] / kept_mass : 1.0 / double(top_k);

  std::vector<char> pinned(V, 0);
  Distribution out = base;
  for (std::size_t iter = 0; iter <= top_k; ++iter) {
    bool changed = false;
    for (std::size_t v = 0; v < V; ++v)
      if (keep[v] && !pinned[v] && out[v] < p_min) {
        pinned[v] = 1;
        changed = true;
      }
    double free_mass = 0.0;
    std::size_t n_pinned = 0;
    for (std::size_t v = 0; v < V; ++v) {
      if (!keep[v]) continue;
      if (pinned[v])
        ++n_pinned;
      else
        free_mass += base[v];
    }
    const double budget = 1.0 - p_min * static_cast<double>(n_pinned);
    for (std::size_t v = 0; v < V; ++v) {
      if (!keep[v]) continue;
      out[v] = pinned[v] ? p_min : base[v] * budget / free_mass;
    }
    if (!changed) break;
  }
  return out;
}

inline double entropy(const Distribution& p) {
  double h = 0.0;
  for (double x : p)
    if (x > 0.0) h -= x * std::log(x);
  return std::max(0.0, h);
}

// Row of the shared table. Synthetic tasks hash a prefix to its position.
struct RowKey {
  int prompt = 0;
  long prefix = 0;
  auto operator<=>(const RowKey&) const = default;
};

// A lookup with an empty context list is the student view; a non-empty
// list is the teacher view of the same row under those privileged labels.
struct ContextKey {
  int prompt = 0;
  std::vector<int> contexts;
  long prefix = 0;
};

class PolicyTable {
 public:
  PolicyTable() = default;
  explicit PolicyTable(std::size_t vocab) : vocab_(vocab) {
    SPANRL_REQUIRE(vocab >= 2, input_error, "vocabulary size must be >= 2");
  }

  std::size_t vocab() const { return vocab_; }
  bool shared_parameters() const { return true; }

  void set_row(const RowKey& k, Logits l) {
    SPANRL_REQUIRE(l.size() == vocab_, input_error, "row width mismatch");
    check_logits(l);
    rows_[k] = std::move(l);
  }
  bool has_row(const RowKey& k) const { return rows_.count(k) != 0; }
  const Logits& row(const RowKey& k) const {
    auto it = rows_.find(k);
    SPANRL_REQUIRE(it != rows_.end(), input_error, "unknown policy row");
    return it->second;
  }
  Logits& row(const RowKey& k) {
    auto it = rows_.find(k);
    SPANRL_REQUIRE(it != rows_.end(), input_error, "unknown policy row");
    return it->second;
  }
  const std::map<RowKey, Logits>& rows() const { return rows_; }

  void set_context_effect(int context, long prefix, Logits offset) {
    SPANRL_REQUIRE(offset.size() == vocab_, input_error, "offset width mismatch");
    effects_[{context, prefix}] = std::move(offset);
  }

  Logits logits(const ContextKey& key) const {
    Logits l = row(RowKey{key.prompt, key.prefix});
    if (!key.contexts.empty()) {
      ++context_lookups_;
      for (int c : key.contexts) {
        auto it = effects_.find({c, key.prefix});
        if (it == effects_.end()) continue;
        for (std::size_t v = 0; v < vocab_; ++v) l[v] += it->second[v];
      }
    }
    return l;
  }
  Distribution dist(const ContextKey& key) const { return softmax(logits(key)); }

  // Copies parameters only; context effects belong to the task and stay put.
  void sync_from(const PolicyTable& other) {
    SPANRL_REQUIRE(other.vocab_ == vocab_, input_error, "sync across vocabularies");
    rows_ = other.rows_;
  }

  std::size_t context_lookups() const { return context_lookups_; }
  void reset_lookup_counter() { context_lookups_ = 0; }

 private:
  std::size_t vocab_ = 2;
  std::map<RowKey, Logits> rows_;
  std::map<std::pair<int, long>, Logits> effects_;
  mutable std::size_t context_lookups_ = 0;
};

}  // namespace spanrl
