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

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "spanrl/divergence.hpp"
#include "spanrl/io.hpp"
#include "spanrl/privileged.hpp"
#include "spanrl/runner.hpp"
#include "spanrl/theory.hpp"

namespace spanrl::acceptance {

struct Result {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
  double limit_seconds = 0.0;  // 0: no runtime budget
};

namespace detail {

inline Distribution random_dist(Engine& rng, std::size_t V, double spread = 2.0) {
  Logits l(V);
  for (auto& x : l) x = spread * (2.0 * uniform01(rng) - 1.0);
  return softmax(l);
}

inline Logits random_logits(Engine& rng, std::size_t V, double spread = 2.0) {
  Logits l(V);
  for (auto& x : l) x = spread * (2.0 * uniform01(rng) - 1.0);
  return l;
}

inline double max_abs(const std::vector<double>& x) {
  double m = 0.0;
  for (double v : x) m = std::max(m, std::fabs(v));
  return m;
}

inline double sum(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s;
}

inline RunConfig experiment_config(Method m, Regime r) {
  RunConfig c;
  c.method = m;
  c.task = TaskParams::defaults(r);
  c.steps = 80;
  c.lr = 4.0;
  c.routing.tau = std::numeric_limits<double>::infinity();
  c.lift_eval_rollouts = 0;
  return c;
}

inline RunConfig exposure_config(Method m, int steps) {
  RunConfig c;
  c.method = m;
  c.task_kind = TaskKind::exposure;
  c.steps = steps;
  c.lr = 1.0;
  c.routing.tau = std::numeric_limits<double>::infinity();
  c.lift_eval_rollouts = 0;
  return c;
}

inline std::string fmt(double x) {
  std::ostringstream os;
  os << std::setprecision(6) << x;
  return os.str();
}

}  // namespace detail

// Analytic logit gradients against central differences of the divergence itself.
inline Result gradient_identities(int n = 1000) {
  Result r{1, "gradient identities", false, {}};
  r.limit_seconds = 5.0;
  Engine rng = make_stream(101, 0, kStreamTask);
  double worst_rel = 0.0, worst_sum = 0.0;
  const double h = 1e-5;
  for (int i = 0; i < n; ++i) {
    const std::size_t V = 2 + uniform_index(rng, 63);
    const Logits l = detail::random_logits(rng, V);
    const Distribution q = detail::random_dist(rng, V);
    const Distribution p = softmax(l);
    const KlGradient gf = fkl_logit_grad(p, q);
    const KlGradient gr = rkl_logit_grad(p, q);
    std::vector<double> fdf(V), fdr(V);
    for (std::size_t v = 0; v < V; ++v) {
      Logits a = l, b = l;
      a[v] += h;
      b[v] -= h;
      const Distribution pa = softmax(a), pb = softmax(b);
      fdf[v] = (kl(q, pa) - kl(q, pb)) / (2 * h);
      fdr[v] = (kl(pa, q) - kl(pb, q)) / (2 * h);
    }
    for (const auto* pair : {&gf, &gr}) {
      const auto& fd = pair == &gf ? fdf : fdr;
      std::vector<double> d(V);
      for (std::size_t v = 0; v < V; ++v) d[v] = (*pair)[v] - fd[v];
      worst_rel = std::max(worst_rel, detail::max_abs(d) / std::max(detail::max_abs(fd), 1e-12));
      worst_sum = std::max(worst_sum, std::fabs(detail::sum(*pair)));
    }
  }
  r.pass = worst_rel <= 1e-5 && worst_sum < 1e-10;
  r.detail = "max rel err " + detail::fmt(worst_rel) + ", max |sum| " + detail::fmt(worst_sum);
  return r;
}

inline Result score_operator(int n = 1000) {
  Result r{2, "score-operator identity", false, {}};
  Engine rng = make_stream(102, 0, kStreamTask);
  double worst = 0.0;
  for (int i = 0; i < n; ++i) {
    const std::size_t V = 2 + uniform_index(rng, 63);
    const Distribution p = detail::random_dist(rng, V);
    std::vector<double> a(V);
    for (auto& x : a) x = 2.0 * uniform01(rng) - 1.0;
    const double m = detail::sum(a) / static_cast<double>(V);
    for (auto& x : a) x -= m;
    const auto c = score_operator_check(a, p);
    worst = std::max(worst, std::fabs(c.lhs - c.rhs_bound));
  }
  r.pass = worst <= 1e-12;
  r.detail = "max |lhs - rhs| " + detail::fmt(worst);
  return r;
}

// An all-correct group on the under-allocated task, routed once with the
// GRPO-only settings and once with the default key-span action.
inline Result dead_zone() {
  Result r{3, "dead-zone preservation", false, {}};
  const SynthTask task = generate_task(TaskParams::defaults(Regime::under_allocated), 0);
  const PolicyTable student = make_policy_table(task);
  const auto sd = student_dists(task, student);
  Engine arng = make_stream(0, 0, kStreamAnnotate);
  const int G = 8;
  std::vector<RoutedItem> batch(G);
  std::vector<double> rewards(G, 1.0);
  const auto adv = group_advantages(rewards);
  for (int i = 0; i < G; ++i) {
    std::vector<int> y(task.T);
    for (int t = 0; t < task.T; ++t) {
      int v = 0;
      while (!task.allowed[t][v]) ++v;
      y[t] = (v + i) % task.V;
      while (!task.allowed[t][y[t]]) y[t] = (y[t] + 1) % task.V;
    }
    const auto ann = oracle_annotate(y, task, 1.0, arng);
    auto& it = batch[i];
    it.tokens = y;
    it.student = sd;
    it.advantage = adv[i];
    it.part = partition(task.T, annotation_mask(ann, task.T, 0.25), ann.outcome);
    for (int t = 0; t < task.T; ++t) it.teacher.push_back(student.dist({task.prompt, ann.contexts(), t}));
  }
  bool ok = true;
  for (int i = 0; i < G; ++i) ok = ok && verifier(batch[i].tokens, task) == 1;

  RoutingConfig grpo_cfg;
  const auto g = routed_step_loss(batch, 0.0, grpo_cfg);
  double grpo_max = 0.0;
  for (const auto& item : g.per_token_logit_grads)
    for (const auto& row : item) grpo_max = std::max(grpo_max, detail::max_abs(row));

  RoutingConfig trace_cfg = method_routing(Method::trace_fkl_key, RoutingConfig{});
  const auto tr = routed_step_loss(batch, 0.5, trace_cfg);
  double on_key = 0.0, off_key = 0.0;
  for (int i = 0; i < G; ++i)
    for (int t = 0; t < task.T; ++t) {
      const bool key = std::find(batch[i].part.key_idx.begin(), batch[i].part.key_idx.end(),
                                 static_cast<std::size_t>(t)) != batch[i].part.key_idx.end();
      const double m = detail::max_abs(tr.per_token_logit_grads[i][t]);
      (key ? on_key : off_key) = std::max(key ? on_key : off_key, m);
    }
  r.pass = ok && grpo_max == 0.0 && on_key > 0.0 && off_key == 0.0;
  r.detail = "grpo max |g| " + detail::fmt(grpo_max) + ", trace key max |g| " + detail::fmt(on_key) +
             ", trace off-key max |g| " + detail::fmt(off_key);
  return r;
}

inline Result exposure_dichotomy() {
  Result r{4, "exposure dichotomy", false, {}};
  r.limit_seconds = 60.0;
  const auto all = run_single(detail::exposure_config(Method::alltoken_kl_persistent, 1000), 0);
  const auto tr = run_single(detail::exposure_config(Method::trace_fkl_key, 1000), 0);
  const auto& A = all.ledger.records();
  const auto& B = tr.ledger.records();
  const double ratio_all = A[999].exposure_lhs / A[99].exposure_lhs;
  bool flat = true;
  for (std::size_t k = 41; k < B.size(); ++k) flat = flat && B[k].exposure_lhs == B[40].exposure_lhs;
  const double ratio_tr = B[999].exposure_lhs / B[99].exposure_lhs;
  double worst = 0.0;
  for (const auto* recs : {&A, &B})
    for (const auto& x : *recs)
      worst = std::max(worst, std::fabs(x.exposure_lhs - x.bound_rhs) / std::max(1e-300, x.bound_rhs));
  r.pass = ratio_all >= 9.0 && ratio_all <= 11.0 && flat && ratio_tr == 1.0 && worst <= 1e-12;
  r.detail = "all-token ratio " + detail::fmt(ratio_all) + ", schedule ratio " + detail::fmt(ratio_tr) +
             (flat ? " (flat after 40)" : " (not flat)") + ", max |lhs/rhs - 1| " + detail::fmt(worst);
  return r;
}

inline Result corner_inversion(int seeds = 10) {
  Result r{5, "corner inversion", false, {}};
  r.limit_seconds = 300.0;
  std::ostringstream os;
  bool pass = true;
  for (Regime reg : {Regime::under_allocated, Regime::confident_wrong}) {
    int wins = 0;
    for (int s = 0; s < seeds; ++s) {
      const double f = run_single(detail::experiment_config(Method::trace_fkl_key, reg), s).summary.final_val_reward;
      const double k = run_single(detail::experiment_config(Method::trace_rkl_error, reg), s).summary.final_val_reward;
      const double g = run_single(detail::experiment_config(Method::grpo_only, reg), s).summary.final_val_reward;
      const bool ok = reg == Regime::under_allocated ? (f > g && f >= k) : (k > g && k >= f);
      wins += ok;
    }
    pass = pass && wins >= (seeds * 8 + 9) / 10;
    os << regime_name(reg) << ' ' << wins << '/' << seeds << ' ';
  }
  r.pass = pass;
  r.detail = os.str();
  return r;
}

inline Result lift_ordering(int seeds = 10) {
  Result r{6, "lift ordering", false, {}};
  int wins = 0;
  double mf = 0, mg = 0, ma = 0;
  for (int s = 0; s < seeds; ++s) {
    auto run = [&](Method m) {
      RunConfig c = detail::experiment_config(m, Regime::under_allocated);
      c.lift_eval_rollouts = 4096;
      return run_single(c, s).summary.delta_lift.value_or(std::nan(""));
    };
    const double f = run(Method::trace_fkl_key), g = run(Method::grpo_only),
                 a = run(Method::alltoken_kl_persistent);
    mf += f / seeds;
    mg += g / seeds;
    ma += a / seeds;
    wins += (f > g && g > a);
  }
  r.pass = wins >= (seeds * 8 + 9) / 10;
  r.detail = std::to_string(wins) + "/" + std::to_string(seeds) + " seeds; mean lift trace " +
             detail::fmt(mf) + ", grpo " + detail::fmt(mg) + ", all-token " + detail::fmt(ma);
  return r;
}

inline CornerInstance random_corner(Engine& rng) {
  CornerInstance c;
  const std::size_t d = 2 + uniform_index(rng, 14);
  auto vec = [&] {
    std::vector<double> x(d);
    for (auto& v : x) v = 2.0 * uniform01(rng) - 1.0;
    return x;
  };
  c.g0 = vec();
  c.g1 = vec();
  c.g_null = vec();
  c.g_tilde = vec();
  c.V_t = 0.05 + uniform01(rng);
  c.kappa = 2.0 * uniform01(rng);
  return c;
}

inline Result endpoint_dominance(int n = 500) {
  Result r{7, "endpoint dominance", false, {}};
  Engine rng = make_stream(107, 0, kStreamTask);
  int endpoint = 0, agree = 0, made = 0;
  while (made < n) {
    const CornerInstance c = random_corner(rng);
    const double slope = dot(c.g1, c.g_tilde) - dot(c.g0, c.g_tilde);
    if (std::fabs(slope) < 1e-9) continue;
    ++made;
    int best = 0;
    double best_u = -std::numeric_limits<double>::infinity();
    for (int i = 0; i <= 100; ++i) {
      const double b = i / 100.0;
      const double u = (1.0 - b) * dot(c.g0, c.g_tilde) + b * dot(c.g1, c.g_tilde) - c.kappa * c.V_t;
      if (u > best_u) {
        best_u = u;
        best = i;
      }
    }
    endpoint += (best == 0 || best == 100);
    // oracle over the whole action set, no-KL included
    std::optional<double> oracle = best / 100.0;
    if (dot(c.g_null, c.g_tilde) > best_u) oracle = std::nullopt;
    agree += threshold_action(c) == oracle;
  }
  r.pass = endpoint == n && agree == n;
  r.detail = "endpoint " + std::to_string(endpoint) + "/" + std::to_string(n) + ", classifier agrees " +
             std::to_string(agree) + "/" + std::to_string(n);
  return r;
}

struct AlignmentMeasurement {
  double gamma = 0.0;
  double B = 0.0;
  double q_star = 0.0;
  double p_K = 0.0;
  std::vector<double> q_grid;
  std::vector<double> inner;    // Monte Carlo <g_sel, g~>
  std::vector<double> predicted;
};

// Stale teacher: every guard row carries extra mass on the fatal token.
inline PolicyTable stale_teacher(const SynthTask& task, double staleness) {
  PolicyTable t = make_policy_table(task);
  for (int g : task.guards) {
    Logits& row = t.row({task.prompt, g});
    for (int v = 0; v < task.V; ++v)
      if (!task.allowed[g][v]) row[v] += staleness;
  }
  return t;
}

inline AlignmentMeasurement measure_alignment(std::uint64_t seed, double staleness, int rollouts,
                                              int grid = 101) {
  AlignmentMeasurement m;
  const SynthTask task = generate_alignment_task(seed);
  const PolicyTable student = make_policy_table(task);
  const PolicyTable teacher = stale_teacher(task, staleness);
  const auto sd = student_dists(task, student);
  const auto gt = oracle_reward_gradient(task, student);
  m.p_K = expected_reward(task, sd);
  const std::vector<int> key_ctx = {task.key_labels[0][0].context};
  auto align = [&](int t) {
    const Distribution q = teacher.dist({task.prompt, key_ctx, t});
    double a = 0.0;
    for (int v = 0; v < task.V; ++v) a += (q[v] - sd[t][v]) * gt[t][v];
    return a;
  };
  m.gamma = align(task.critical[0]);
  for (int g : task.guards) m.B -= align(g) / static_cast<double>(task.guards.size());
  m.q_star = precision_threshold(m.gamma, m.B);

  const double lambda = 0.5;
  RoutingConfig cfg = method_routing(Method::trace_fkl_key, RoutingConfig{});
  cfg.tau = std::numeric_limits<double>::infinity();
  LossOptions lopt;
  lopt.p_min = 0.0;
  Engine srng = make_stream(seed, 0, kStreamSample);
  const auto ro = sample_rollouts(task, student, static_cast<std::size_t>(rollouts), srng);
  for (int gi = 0; gi < grid; ++gi) {
    const double q = gi / static_cast<double>(grid - 1);
    Engine arng = make_stream(seed, static_cast<std::uint64_t>(gi), kStreamAnnotate);
    std::vector<RoutedItem> batch(ro.size());
    for (std::size_t i = 0; i < ro.size(); ++i) {
      const auto ann = oracle_annotate(ro[i].tokens, task, q, arng);
      auto& it = batch[i];
      it.tokens = ro[i].tokens;
      it.student = sd;
      it.part = partition(task.T, annotation_mask(ann, task.T, cfg.alpha), ann.outcome);
      for (int t = 0; t < task.T; ++t) it.teacher.push_back(teacher.dist({task.prompt, ann.contexts(), t}));
    }
    const auto rep = routed_step_loss(batch, lambda, cfg, lopt);
    double ip = 0.0;
    for (const auto& item : rep.per_token_logit_grads)
      for (int t = 0; t < task.T; ++t)
        for (int v = 0; v < task.V; ++v) ip -= item[t][v] * gt[t][v];
    m.q_grid.push_back(q);
    m.inner.push_back(ip);
    AlignmentParams ap;
    ap.lambda_k = lambda;
    ap.p_K = m.p_K / task.T;
    ap.q_K = q;
    ap.gamma_K = m.gamma;
    ap.B_K = m.B;
    m.predicted.push_back(alignment_lower_bound(ap));
  }
  return m;
}

inline Result alignment_threshold(int rollouts = 20000) {
  Result r{8, "alignment threshold", false, {}};
  const auto m = measure_alignment(0, std::log(4.0), rollouts);
  double last_neg = -1.0, first_pos = 2.0;
  for (std::size_t i = 0; i < m.q_grid.size(); ++i) {
    if (m.inner[i] < 0) last_neg = m.q_grid[i];
    if (m.inner[i] > 0 && first_pos > 1.5) first_pos = m.q_grid[i];
  }
  const bool ends = m.inner.front() < 0 && m.inner.back() > 0;
  r.pass = ends && m.gamma > 0 && m.B > 0 && std::fabs(last_neg - m.q_star) <= 0.05 &&
           std::fabs(first_pos - m.q_star) <= 0.05;
  r.detail = "gamma " + detail::fmt(m.gamma) + ", B " + detail::fmt(m.B) + ", q* " + detail::fmt(m.q_star) +
             ", sign change between " + detail::fmt(first_pos) + " and " + detail::fmt(last_neg);
  return r;
}

// Frozen fixture: one Euclidean step in logit space drives the mass of token 0
// away from its teacher value.
struct EuclideanFixture {
  Logits l0 = {std::log(0.1), std::log(0.2), std::log(0.7)};
  Distribution teacher = {0.12, 0.08, 0.8};
  double eta = 0.1;
  std::vector<std::size_t> U = {0};
};

inline bool mass_monotone(const std::vector<Distribution>& traj, const Distribution& piT,
                          const std::vector<std::size_t>& U, double slack = 1e-15) {
  const double target = mass(piT, U);
  double prev = std::fabs(mass(traj[0], U) - target);
  for (std::size_t i = 1; i < traj.size(); ++i) {
    const double d = std::fabs(mass(traj[i], U) - target);
    if (d > prev + slack) return false;
    prev = d;
  }
  return true;
}

inline Result natural_gradient(int n = 500) {
  Result r{9, "natural-gradient dynamics", false, {}};
  Engine rng = make_stream(109, 0, kStreamTask);
  double worst = 0.0;
  int mono = 0;
  for (int i = 0; i < n; ++i) {
    const std::size_t V = 2 + uniform_index(rng, 15);
    const Distribution p0 = detail::random_dist(rng, V, 3.0), pT = detail::random_dist(rng, V, 3.0);
    std::vector<std::size_t> U;
    for (std::size_t v = 0; v < V; ++v)
      if (uniform01(rng) < 0.5) U.push_back(v);
    if (U.empty()) U.push_back(0);
    const auto traj = natural_gradient_flow(p0, pT, 1e-3, 2.0);
    const auto cf = natural_gradient_closed_form(p0, pT, 2.0);
    for (std::size_t v = 0; v < V; ++v) worst = std::max(worst, std::fabs(traj.back()[v] - cf[v]));
    mono += mass_monotone(traj, pT, U);
  }
  const EuclideanFixture fx;
  const auto eu = euclidean_fkl_descent(fx.l0, fx.teacher, fx.eta, 1);
  const double d0 = std::fabs(mass(eu[0], fx.U) - mass(fx.teacher, fx.U));
  const double d1 = std::fabs(mass(eu[1], fx.U) - mass(fx.teacher, fx.U));
  const bool cex = d1 > d0;
  r.pass = worst <= 1e-3 && mono == n && cex;
  r.detail = "max |euler - closed| " + detail::fmt(worst) + ", monotone " + std::to_string(mono) + "/" +
             std::to_string(n) + ", euclidean fixture gap " + detail::fmt(d0) + " -> " + detail::fmt(d1);
  return r;
}

inline Result rlsd_damping() {
  Result r{10, "rlsd damping", false, {}};
  int checked = 0, bad_raw = 0, bad_clip = 0;
  for (double eps : {0.0, 0.1, 0.2, 0.5, 0.9})
    for (int i = 1; i <= 40; ++i)
      for (int j = 1; j <= 40; ++j) {
        const double delta = i / 40.0, p0 = j / 40.0;
        for (double ft : {0.0, 0.25, 0.5, 0.99, 1.0})
          for (double fs : {1.0, 1.5, 3.0}) {
            const double tp = ft * delta, sp = std::min(1.0, fs * p0);
            const RlsdWeight w = rlsd_weight(tp, sp, eps);
            if (w.clipped < 1.0 - eps) ++bad_clip;
            if (tp <= delta && sp >= p0) {
              ++checked;
              const double A = 1.0;
              if (w.raw * A > A * delta / p0 * (1 + 1e-15)) ++bad_raw;
            }
          }
      }
  r.pass = checked > 0 && bad_raw == 0 && bad_clip == 0;
  r.detail = std::to_string(checked) + " grid points, raw violations " + std::to_string(bad_raw) +
             ", clipped below floor " + std::to_string(bad_clip);
  return r;
}

inline Result reduction_determinism() {
  Result r{11, "reduction and determinism", false, {}};
  RunConfig cfg = detail::experiment_config(Method::trace_fkl_key, Regime::under_allocated);
  const SynthTask task = make_task(cfg, 3);
  TrainState a = make_state(task, 3);
  const long decay_end = cfg.routing.t_start + cfg.routing.T_decay;
  for (long k = 0; k <= decay_end; ++k) train_step(a, k, cfg);
  TrainState b = a;
  RunConfig gcfg = cfg;
  gcfg.method = Method::grpo_only;
  bool same = true;
  long nonzero = 0;
  for (long k = decay_end + 1; k < 120; ++k) {
    const auto ra = train_step(a, k, cfg);
    train_step(b, k, gcfg);
    for (int t = 0; t < task.T; ++t) {
      same = same && a.student.row({task.prompt, t}) == b.student.row({task.prompt, t});
      nonzero += detail::max_abs(ra.grad[t]) > 0.0;
    }
  }
  std::ostringstream c1, c2;
  RunConfig dcfg = cfg;
  dcfg.steps = 60;
  dcfg.lift_eval_rollouts = 256;
  write_log_csv(c1, run_single(dcfg, 5));
  write_log_csv(c2, run_single(dcfg, 5));
  const bool det = c1.str() == c2.str();
  r.pass = same && det && nonzero > 0;
  r.detail = std::string("post-decay trajectories ") + (same ? "identical" : "differ") +
             " (" + std::to_string(nonzero) + " nonzero row updates), repeated CSV " +
             (det ? "byte-identical" : "differs");
  return r;
}

inline Result coverage_schedule() {
  Result r{12, "coverage and schedule", false, {}};
  std::size_t masks = 0, over = 0;
  for (Regime reg : {Regime::under_allocated, Regime::confident_wrong, Regime::mixed})
    for (Method m : {Method::trace_fkl_key, Method::trace_rkl_error, Method::trace_both}) {
      RunConfig cfg = detail::experiment_config(m, reg);
      cfg.annotator_precision = 0.7;
      const SynthTask task = make_task(cfg, 1);
      TrainState st = make_state(task, 1);
      for (long k = 0; k < 50; ++k) {
        const auto res = train_step(st, k, cfg);
        for (const auto& p : res.partitions) {
          ++masks;
          over += p.span_size() > coverage_cap(p.mask.size(), cfg.routing.alpha);
        }
      }
    }
  const RoutingConfig rc;
  const bool lam = lambda_schedule(5, rc) == 0.5 && lambda_schedule(25, rc) == 0.25 &&
                   lambda_schedule(100, rc) == 0.0;
  double L1 = 0.0, L2 = 0.0;
  for (long k = 0; k < 10000; ++k) {
    const double l = lambda_schedule(k, rc);
    L1 += l;
    L2 += l * l;
  }
  const bool sums = std::fabs(L1 - schedule_lambda1(rc)) < 1e-12 &&
                    std::fabs(L2 - schedule_lambda2(rc)) < 1e-12;
  r.pass = over == 0 && masks > 0 && lam && sums;
  r.detail = std::to_string(masks) + " masks, " + std::to_string(over) + " over cap; Lambda1 " +
             detail::fmt(L1) + ", Lambda2 " + detail::fmt(L2) + (lam ? "" : "; lambda values wrong");
  return r;
}

inline std::vector<std::function<Result()>> all_checks() {
  return {[] { return gradient_identities(); }, [] { return score_operator(); },
          [] { return dead_zone(); },           [] { return exposure_dichotomy(); },
          [] { return corner_inversion(); },    [] { return lift_ordering(); },
          [] { return endpoint_dominance(); },  [] { return alignment_threshold(); },
          [] { return natural_gradient(); },    [] { return rlsd_damping(); },
          [] { return reduction_determinism(); }, [] { return coverage_schedule(); }};
}

inline Result timed(const std::function<Result()>& f) {
  const auto t0 = std::chrono::steady_clock::now();
  Result r = f();
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (r.limit_seconds > 0.0 && r.seconds > r.limit_seconds) {
    r.pass = false;
    r.detail += "; over runtime budget";
  }
  return r;
}

}  // namespace spanrl::acceptance
