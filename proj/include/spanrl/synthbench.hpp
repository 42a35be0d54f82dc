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
#include <cstdint>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "spanrl/error.hpp"
#include "spanrl/policy.hpp"
#include "spanrl/privileged.hpp"
#include "spanrl/rng.hpp"
#include "spanrl/span_router.hpp"

namespace spanrl {

enum class Regime { under_allocated, confident_wrong, mixed };

inline std::string regime_name(Regime r) {
  switch (r) {
    case Regime::under_allocated: return "under_allocated";
    case Regime::confident_wrong: return "confident_wrong";
    case Regime::mixed: return "mixed";
  }
  return "?";
}

inline Regime regime_from_name(const std::string& s) {
  if (s == "under_allocated") return Regime::under_allocated;
  if (s == "confident_wrong") return Regime::confident_wrong;
  if (s == "mixed") return Regime::mixed;
  throw config_error("unknown regime: " + s);
}

struct TaskParams {
  Regime regime = Regime::under_allocated;
  int horizon = 4;
  int vocab = 16;
  int n_critical = 1;
  double offset = 7.0;  // teacher logit offset at addressed positions
  // under-allocated positions
  double p_star = 0.004;
  int n_alt = 10;
  double alt_mass = 0.7;
  // confident-wrong positions
  double p_minus = 0.9;
  int cw_n_alt = 3;
  double cw_alt_mass = 0.08;
  double null_context_prob = 0.5;

  static TaskParams defaults(Regime r) {
    TaskParams p;
    p.regime = r;
    if (r == Regime::confident_wrong || r == Regime::mixed) {
      p.horizon = 8;
      p.vocab = 5;
      p.n_critical = 2;
      p.n_alt = 3;
    }
    return p;
  }

  void validate() const {
    SPANRL_REQUIRE(horizon >= 2 && horizon <= 12, config_error, "horizon must be in [2,12]");
    SPANRL_REQUIRE(vocab >= 2 && vocab <= 16, config_error, "vocab must be in [2,16]");
    SPANRL_REQUIRE(n_critical >= 1 && n_critical < horizon, config_error,
                   "critical positions must be a strict nonempty subset");
    SPANRL_REQUIRE(offset > 0.0, config_error, "offset must be positive");
    const bool has_u = regime != Regime::confident_wrong;
    const bool has_c = regime != Regime::under_allocated;
    if (has_u) {
      SPANRL_REQUIRE(n_alt >= 0 && n_alt + 2 <= vocab, config_error,
                     "under-allocated position needs a rejecting token");
      SPANRL_REQUIRE(p_star > 0 && alt_mass >= 0 && p_star + alt_mass < 1.0, config_error,
                     "under-allocated masses out of range");
    }
    if (has_c) {
      SPANRL_REQUIRE(cw_n_alt >= 1 && cw_n_alt + 1 <= vocab, config_error,
                     "confident-wrong position needs an accepting token");
      SPANRL_REQUIRE(p_minus > 0 && cw_alt_mass > 0 && p_minus + cw_alt_mass <= 1.0 + 1e-12,
                     config_error, "confident-wrong masses out of range");
      SPANRL_REQUIRE(cw_n_alt + 1 < vocab || std::fabs(p_minus + cw_alt_mass - 1.0) < 1e-12,
                     config_error, "confident-wrong masses must fill the vocabulary");
    }
    SPANRL_REQUIRE(null_context_prob >= 0.0 && null_context_prob < 1.0, config_error,
                   "null_context_prob outside [0,1)");
  }
};

struct PrivilegedContext {
  int id = 0;
  SpanType label = SpanType::key_formula;
  std::map<int, Logits> offset;  // position -> logit offset
};

struct LabelChoice {
  int context = -1;  // -1: label with no teacher effect
  SpanType type = SpanType::key_formula;
  double prob = 1.0;
};

struct SynthTask {
  std::string id;
  int prompt = 0;
  std::uint64_t seed = 0;
  Regime regime = Regime::under_allocated;
  int T = 0;
  int V = 0;
  std::vector<int> critical;                         // sorted
  std::vector<int> guards;                           // routine positions the verifier still checks
  std::vector<std::vector<std::uint8_t>> allowed;    // [T][V]
  std::vector<Logits> init_logits;                   // [T]
  std::vector<int> pivot;                            // per critical: v* or v-
  std::vector<std::uint8_t> pivot_under;             // per critical: 1 = under-allocated kind
  std::vector<std::vector<LabelChoice>> key_labels;  // per critical
  std::vector<std::vector<LabelChoice>> error_labels;
  std::vector<PrivilegedContext> contexts;
  std::vector<double> context_probs;  // per context, for the variance computation
  double null_context_prob = 0.0;

  int critical_index(int t) const {
    auto it = std::find(critical.begin(), critical.end(), t);
    return it == critical.end() ? -1 : static_cast<int>(it - critical.begin());
  }
  bool is_critical(int t) const { return critical_index(t) >= 0; }
  std::vector<int> noncritical() const {
    std::vector<int> out;
    for (int t = 0; t < T; ++t)
      if (!is_critical(t)) out.push_back(t);
    return out;
  }
  const PrivilegedContext& context(int id) const {
    for (const auto& c : contexts)
      if (c.id == id) return c;
    throw input_error("unknown context id");
  }
};

inline PolicyTable make_policy_table(const SynthTask& task) {
  PolicyTable tab(static_cast<std::size_t>(task.V));
  for (int t = 0; t < task.T; ++t) tab.set_row({task.prompt, t}, task.init_logits[t]);
  for (const auto& c : task.contexts)
    for (const auto& [t, off] : c.offset) tab.set_context_effect(c.id, t, off);
  return tab;
}

inline std::vector<Distribution> student_dists(const SynthTask& task, const PolicyTable& tab) {
  std::vector<Distribution> d(task.T);
  for (int t = 0; t < task.T; ++t) d[t] = softmax(tab.row({task.prompt, t}));
  return d;
}

inline int verifier(const std::vector<int>& y, const SynthTask& task) {
  if (static_cast<int>(y.size()) != task.T) return 0;
  for (int t = 0; t < task.T; ++t) {
    if (y[t] < 0 || y[t] >= task.V || !task.allowed[t][y[t]]) return 0;
  }
  return 1;
}

// Earliest position after which no accepting continuation remains.
inline int root_cause(const std::vector<int>& y, const SynthTask& task) {
  for (int t = 0; t < task.T && t < static_cast<int>(y.size()); ++t)
    if (!task.allowed[t][y[t]]) return t;
  return -1;
}

struct TokenSpan {
  int start = 0;
  int end = 0;  // half-open
  SpanType type = SpanType::key_formula;
  int context = -1;
  bool true_span = true;
};

struct OracleAnnotation {
  std::vector<TokenSpan> spans;
  int outcome = 0;

  std::vector<int> contexts() const {
    std::vector<int> c;
    for (const auto& s : spans)
      if (s.context >= 0 && std::find(c.begin(), c.end(), s.context) == c.end())
        c.push_back(s.context);
    return c;
  }
};

inline const LabelChoice& pick_label(const std::vector<LabelChoice>& opts, Engine& rng) {
  if (opts.size() == 1) return opts[0];
  const double u = uniform01(rng);
  double c = 0.0;
  for (const auto& o : opts) {
    c += o.prob;
    if (u < c) return o;
  }
  return opts.back();
}

inline OracleAnnotation oracle_annotate(const std::vector<int>& y, const SynthTask& task,
                                        double q, Engine& rng) {
  SPANRL_REQUIRE(q >= 0.0 && q <= 1.0, input_error, "precision outside [0,1]");
  for (int tok : y) SPANRL_REQUIRE(tok >= 0 && tok < task.V, input_error, "token outside vocabulary");
  OracleAnnotation ann;
  ann.outcome = verifier(y, task);
  std::vector<TokenSpan> truth;
  if (ann.outcome == 1) {
    for (std::size_t i = 0; i < task.critical.size() && truth.size() < 3; ++i) {
      const LabelChoice& l = pick_label(task.key_labels[i], rng);
      truth.push_back({task.critical[i], task.critical[i] + 1, l.type, l.context, true});
    }
  } else {
    const int t = root_cause(y, task);
    if (t >= 0) {
      const int ci = task.critical_index(t);
      if (ci >= 0) {
        const LabelChoice& l = pick_label(task.error_labels[ci], rng);
        truth.push_back({t, t + 1, l.type, l.context, true});
      } else {
        truth.push_back({t, t + 1, SpanType::format_error, -1, true});
      }
    }
  }
  const std::vector<int> others = task.noncritical();
  for (auto& s : truth) {
    if (q >= 1.0 || others.empty()) {
      ann.spans.push_back(s);
      continue;
    }
    if (uniform01(rng) < q) {
      ann.spans.push_back(s);
    } else {
      const int t = others[uniform_index(rng, others.size())];
      ann.spans.push_back({t, t + 1, s.type, s.context, false});
    }
  }
  return ann;
}

// Null context first, then one entry per labelled context.
inline ContextSet build_context_set(const SynthTask& task, const PolicyTable& teacher) {
  ContextSet cs;
  if (task.null_context_prob > 0.0) {
    cs.ids.push_back(-1);
    cs.probs.push_back(task.null_context_prob);
    std::vector<Distribution> d(task.T);
    for (int t = 0; t < task.T; ++t) d[t] = teacher.dist({task.prompt, {}, t});
    cs.teacher.push_back(std::move(d));
  }
  for (std::size_t i = 0; i < task.contexts.size(); ++i) {
    cs.ids.push_back(task.contexts[i].id);
    cs.probs.push_back(task.context_probs[i]);
    std::vector<Distribution> d(task.T);
    for (int t = 0; t < task.T; ++t) d[t] = teacher.dist({task.prompt, {task.contexts[i].id}, t});
    cs.teacher.push_back(std::move(d));
  }
  return cs;
}

inline void check_enumeration_budget(const SynthTask& task) {
  const double n = std::pow(static_cast<double>(task.V), static_cast<double>(task.T));
  SPANRL_REQUIRE(n <= 1e6, budget_error, "enumeration budget exceeded (V^T > 1e6)");
}

namespace detail {
template <class Leaf>
void enumerate(const std::vector<Distribution>& d, int t, double p, std::vector<int>& y,
               Leaf& leaf) {
  if (t == static_cast<int>(d.size())) {
    leaf(y, p);
    return;
  }
  for (std::size_t v = 0; v < d[t].size(); ++v) {
    const double pv = d[t][v];
    if (pv == 0.0) continue;
    y[t] = static_cast<int>(v);
    enumerate(d, t + 1, p * pv, y, leaf);
  }
}
}  // namespace detail

inline double expected_reward(const SynthTask& task, const std::vector<Distribution>& d) {
  check_enumeration_budget(task);
  std::vector<int> y(task.T, 0);
  double er = 0.0;
  auto leaf = [&](const std::vector<int>& s, double p) {
    if (verifier(s, task)) er += p;
  };
  detail::enumerate(d, 0, 1.0, y, leaf);
  return er;
}

// Exact gradient of E[R] with respect to every logit row, by enumeration.
inline std::vector<std::vector<double>> oracle_reward_gradient(const SynthTask& task,
                                                               const PolicyTable& tab) {
  check_enumeration_budget(task);
  const auto d = student_dists(task, tab);
  std::vector<std::vector<double>> joint(task.T, std::vector<double>(task.V, 0.0));
  double er = 0.0;
  std::vector<int> y(task.T, 0);
  auto leaf = [&](const std::vector<int>& s, double p) {
    if (!verifier(s, task)) return;
    er += p;
    for (int t = 0; t < task.T; ++t) joint[t][s[t]] += p;
  };
  detail::enumerate(d, 0, 1.0, y, leaf);
  for (int t = 0; t < task.T; ++t)
    for (int v = 0; v < task.V; ++v) joint[t][v] -= er * d[t][v];
  return joint;
}

struct CertificateReport {
  bool ok = true;
  std::string detail;
};

// The two inequalities that define the regimes, checked on the key-context teacher.
inline CertificateReport regime_certificates(const SynthTask& task) {
  CertificateReport rep;
  const PolicyTable tab = make_policy_table(task);
  for (std::size_t i = 0; i < task.critical.size(); ++i) {
    const int t = task.critical[i];
    const int v = task.pivot[i];
    const Distribution s = tab.dist({task.prompt, {}, t});
    const Distribution q = tab.dist({task.prompt, {task.key_labels[i][0].context}, t});
    if (task.pivot_under[i]) {
      if (!(s[v] <= 0.01 * q[v] && q[v] >= 0.5)) {
        rep.ok = false;
        rep.detail += "under-allocated certificate fails at position " + std::to_string(t) + "; ";
      }
    } else {
      if (!(q[v] <= 0.05 && s[v] >= 0.7)) {
        rep.ok = false;
        rep.detail += "confident-wrong certificate fails at position " + std::to_string(t) + "; ";
      }
    }
  }
  return rep;
}

namespace detail {
inline std::vector<int> permutation(int n, Engine& rng) {
  std::vector<int> p(n);
  std::iota(p.begin(), p.end(), 0);
  for (int i = n - 1; i > 0; --i) std::swap(p[i], p[uniform_index(rng, i + 1)]);
  return p;
}

inline void finish_contexts(SynthTask& task) {
  const double share = (1.0 - task.null_context_prob) / static_cast<double>(task.contexts.size());
  task.context_probs.assign(task.contexts.size(), share);
}
}  // namespace detail

inline SynthTask generate_task(const TaskParams& P, std::uint64_t seed) {
  P.validate();
  Engine rng = make_stream(seed, 0, kStreamTask);
  SynthTask task;
  task.seed = seed;
  task.regime = P.regime;
  task.T = P.horizon;
  task.V = P.vocab;
  task.id = regime_name(P.regime) + "-" + std::to_string(seed);
  task.null_context_prob = P.null_context_prob;
  task.allowed.assign(task.T, std::vector<std::uint8_t>(task.V, 1));
  task.init_logits.assign(task.T, Logits(task.V, 0.0));

  auto pos = detail::permutation(task.T, rng);
  task.critical.assign(pos.begin(), pos.begin() + P.n_critical);
  std::sort(task.critical.begin(), task.critical.end());

  for (std::size_t i = 0; i < task.critical.size(); ++i) {
    const int t = task.critical[i];
    const bool under = P.regime == Regime::under_allocated ||
                       (P.regime == Regime::mixed && i % 2 == 0);
    auto perm = detail::permutation(task.V, rng);
    Distribution p(task.V, 0.0);
    std::vector<std::uint8_t> acc(task.V, 0);
    Logits off(task.V, 0.0);
    const int pivot = perm[0];
    if (under) {
      const int n_rej = task.V - 1 - P.n_alt;
      p[pivot] = P.p_star;
      acc[pivot] = 1;
      for (int j = 1; j <= P.n_alt; ++j) {
        p[perm[j]] = P.alt_mass / P.n_alt;
        acc[perm[j]] = 1;
      }
      for (int j = 1 + P.n_alt; j < task.V; ++j) p[perm[j]] = (1.0 - P.p_star - P.alt_mass) / n_rej;
      off[pivot] = P.offset;
    } else {
      const int n_rej = task.V - 1 - P.cw_n_alt;
      p[pivot] = P.p_minus;
      for (int j = 1; j <= P.cw_n_alt; ++j) {
        p[perm[j]] = P.cw_alt_mass / P.cw_n_alt;
        acc[perm[j]] = 1;
      }
      for (int j = 1 + P.cw_n_alt; j < task.V; ++j)
        p[perm[j]] = (1.0 - P.p_minus - P.cw_alt_mass) / n_rej;
      off[pivot] = -P.offset;
    }
    for (int v = 0; v < task.V; ++v) task.init_logits[t][v] = std::log(p[v]);
    task.allowed[t] = acc;
    task.pivot.push_back(pivot);
    task.pivot_under.push_back(under ? 1 : 0);

    // one step-type and one error-type label per position, both pointing
    // the teacher at the same move
    const auto step = static_cast<SpanType>(kNumErrorTypes + uniform_index(rng, kNumStepTypes));
    const auto err = static_cast<SpanType>(uniform_index(rng, kNumErrorTypes));
    const int kid = static_cast<int>(task.contexts.size());
    task.contexts.push_back({kid, step, {{t, off}}});
    task.contexts.push_back({kid + 1, err, {{t, off}}});
    task.key_labels.push_back({{kid, step, 1.0}});
    task.error_labels.push_back({{kid + 1, err, 1.0}});
  }
  detail::finish_contexts(task);
  return task;
}

// One critical position with two accepting moves and two step-type labels
// that pull the teacher in opposite directions. The mean teacher matches a
// balanced student, so the privileged variance stays put under long
// self-distillation.
inline SynthTask generate_exposure_task(std::uint64_t seed, double offset = 2.0) {
  Engine rng = make_stream(seed, 0, kStreamTask);
  SynthTask task;
  task.seed = seed;
  task.regime = Regime::mixed;
  task.T = 4;
  task.V = 4;
  task.id = "exposure-" + std::to_string(seed);
  task.null_context_prob = 0.0;
  task.allowed.assign(task.T, std::vector<std::uint8_t>(task.V, 1));
  task.init_logits.assign(task.T, Logits(task.V, 0.0));
  const int t = static_cast<int>(uniform_index(rng, task.T));
  task.critical = {t};
  auto perm = detail::permutation(task.V, rng);
  const int a = perm[0], b = perm[1];
  Distribution p(task.V, 0.01);
  p[a] = p[b] = 0.49;
  for (int v = 0; v < task.V; ++v) task.init_logits[t][v] = std::log(p[v]);
  task.allowed[t].assign(task.V, 0);
  task.allowed[t][a] = task.allowed[t][b] = 1;
  Logits oa(task.V, 0.0), ob(task.V, 0.0);
  oa[a] = offset / 2;
  oa[b] = -offset / 2;
  ob[a] = -offset / 2;
  ob[b] = offset / 2;
  task.contexts.push_back({0, SpanType::case_split, {{t, oa}}});
  task.contexts.push_back({1, SpanType::symmetry, {{t, ob}}});
  task.contexts.push_back({2, SpanType::missed_case, {}});
  task.key_labels.push_back({{0, SpanType::case_split, 0.5}, {1, SpanType::symmetry, 0.5}});
  task.error_labels.push_back({{2, SpanType::missed_case, 1.0}});
  task.pivot = {a};
  task.pivot_under = {1};
  task.context_probs = {0.5, 0.5, 0.0};
  return task;
}

// One decisive position the teacher knows about, plus routine guard
// positions where a formatting token is fatal. False-positive spans land on
// the guards.
inline SynthTask generate_alignment_task(std::uint64_t seed, double offset = 3.0) {
  Engine rng = make_stream(seed, 0, kStreamTask);
  SynthTask task;
  task.seed = seed;
  task.regime = Regime::under_allocated;
  task.T = 4;
  task.V = 4;
  task.id = "alignment-" + std::to_string(seed);
  task.null_context_prob = 0.5;
  task.allowed.assign(task.T, std::vector<std::uint8_t>(task.V, 1));
  task.init_logits.assign(task.T, Logits(task.V, 0.0));
  const int c = static_cast<int>(uniform_index(rng, task.T));
  task.critical = {c};
  auto perm = detail::permutation(task.V, rng);
  const int good = perm[0], alt = perm[1];
  task.allowed[c].assign(task.V, 0);
  task.allowed[c][good] = task.allowed[c][alt] = 1;
  Distribution p(task.V, 0.3);
  p[good] = 0.1;
  for (int v = 0; v < task.V; ++v) task.init_logits[c][v] = std::log(p[v]);
  const int bad = perm[3];
  for (int t = 0; t < task.T; ++t) {
    if (t == c) continue;
    task.guards.push_back(t);
    task.allowed[t][bad] = 0;
    Distribution g(task.V, 0.3);
    g[bad] = 0.1;
    for (int v = 0; v < task.V; ++v) task.init_logits[t][v] = std::log(g[v]);
  }
  Logits off(task.V, 0.0);
  off[good] = offset;
  task.contexts.push_back({0, SpanType::key_formula, {{c, off}}});
  task.contexts.push_back({1, SpanType::illegal_step, {{c, off}}});
  task.key_labels.push_back({{0, SpanType::key_formula, 1.0}});
  task.error_labels.push_back({{1, SpanType::illegal_step, 1.0}});
  task.pivot = {good};
  task.pivot_under = {1};
  detail::finish_contexts(task);
  return task;
}

}  // namespace spanrl
