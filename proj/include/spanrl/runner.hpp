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
#include <optional>
#include <string>
#include <vector>

#include "spanrl/divergence.hpp"
#include "spanrl/error.hpp"
#include "spanrl/grpo.hpp"
#include "spanrl/metrics.hpp"
#include "spanrl/policy.hpp"
#include "spanrl/privileged.hpp"
#include "spanrl/rng.hpp"
#include "spanrl/span_router.hpp"
#include "spanrl/synthbench.hpp"

namespace spanrl {

enum class Method {
  trace_fkl_key,
  trace_rkl_error,
  trace_both,
  grpo_only,
  alltoken_kl_persistent,
  rlsd_weighted,
};

inline std::string method_name(Method m) {
  switch (m) {
    case Method::trace_fkl_key: return "trace_fkl_key";
    case Method::trace_rkl_error: return "trace_rkl_error";
    case Method::trace_both: return "trace_both";
    case Method::grpo_only: return "grpo_only";
    case Method::alltoken_kl_persistent: return "alltoken_kl_persistent";
    case Method::rlsd_weighted: return "rlsd_weighted";
  }
  return "?";
}

inline Method method_from_name(const std::string& s) {
  for (Method m : {Method::trace_fkl_key, Method::trace_rkl_error, Method::trace_both,
                   Method::grpo_only, Method::alltoken_kl_persistent, Method::rlsd_weighted})
    if (method_name(m) == s) return m;
  throw config_error("unknown method: " + s);
}

inline bool is_routed(Method m) {
  return m == Method::trace_fkl_key || m == Method::trace_rkl_error || m == Method::trace_both;
}

enum class TaskKind { regime, exposure, alignment };

struct RunConfig {
  Method method = Method::trace_fkl_key;
  TaskKind task_kind = TaskKind::regime;
  TaskParams task = TaskParams::defaults(Regime::under_allocated);
  std::vector<std::uint64_t> seeds = {0};
  int steps = 200;
  int group_size = 8;
  int groups = 1;
  double lr = 0.1;
  RoutingConfig routing;
  ClipConfig clip;
  std::size_t floor_top_k = 0;
  double p_min = 1e-9;
  double annotator_precision = 1.0;
  double eps_w = 0.2;
  int lift_eval_rollouts = 4096;
  std::string out_dir = "out";

  void validate() const {
    SPANRL_REQUIRE(steps >= 1, config_error, "steps must be >= 1");
    SPANRL_REQUIRE(group_size >= 2, config_error, "group_size must be >= 2");
    SPANRL_REQUIRE(groups >= 1, config_error, "groups must be >= 1");
    SPANRL_REQUIRE(lr > 0.0 && std::isfinite(lr), config_error, "lr must be positive");
    SPANRL_REQUIRE(!seeds.empty(), config_error, "at least one seed");
    SPANRL_REQUIRE(annotator_precision >= 0.0 && annotator_precision <= 1.0, config_error,
                   "annotator_precision outside [0,1]");
    SPANRL_REQUIRE(eps_w >= 0.0 && eps_w < 1.0, config_error, "eps_w outside [0,1)");
    SPANRL_REQUIRE(lift_eval_rollouts >= 0, config_error, "lift_eval_rollouts must be >= 0");
    SPANRL_REQUIRE(p_min >= 0.0 && p_min < 0.5, config_error, "p_min out of range");
    routing.validate();
    clip.validate();
    if (task_kind == TaskKind::regime) task.validate();
  }
};

inline bool should_sync(long k, int N, double lambda_k) { return k % N == 0 && lambda_k > 0.0; }

inline double method_lambda(Method m, long k, const RoutingConfig& cfg) {
  switch (m) {
    case Method::grpo_only:
    case Method::rlsd_weighted: return 0.0;
    case Method::alltoken_kl_persistent: return cfg.w0;
    default: return lambda_schedule(k, cfg);
  }
}

inline RoutingConfig method_routing(Method m, RoutingConfig cfg) {
  switch (m) {
    case Method::trace_fkl_key: cfg.mu_E = 0; cfg.mu_K = 1; break;
    case Method::trace_rkl_error: cfg.mu_E = 1; cfg.mu_K = 0; break;
    case Method::trace_both: cfg.mu_E = 1; cfg.mu_K = 1; break;
    case Method::alltoken_kl_persistent: cfg.mu_E = 0; cfg.mu_K = 1; break;
    default: break;
  }
  return cfg;
}

struct Rollout {
  std::vector<int> tokens;
  int outcome = 0;
  std::vector<double> logprobs;
  std::vector<long> prefix;  // row index per position
};

struct TrainState {
  SynthTask task;
  PolicyTable student;
  PolicyTable teacher;
  ExposureLedger ledger;
  std::uint64_t seed = 0;
};

inline TrainState make_state(const SynthTask& task, std::uint64_t seed) {
  TrainState s{task, make_policy_table(task), make_policy_table(task), ExposureLedger(1.0), seed};
  return s;
}

struct StepResult {
  long k = 0;
  double lambda = 0.0;
  double rho = 1.0;
  double train_reward = 0.0;
  bool synced = false;
  bool teacher_consulted = false;
  std::size_t teacher_lookups = 0;
  double loss = 0.0;
  std::vector<Rollout> rollouts;
  std::vector<SpanPartition> partitions;
  std::vector<std::vector<double>> grad;  // [T][V], summed over the batch
  std::vector<std::vector<double>> key_grad;
  double max_span_fraction = 0.0;
};

inline std::vector<Rollout> sample_rollouts(const SynthTask& task, const PolicyTable& student,
                                            std::size_t n, Engine& rng) {
  const auto d = student_dists(task, student);
  std::vector<Rollout> out(n);
  for (auto& r : out) {
    r.tokens.resize(task.T);
    r.logprobs.resize(task.T);
    r.prefix.resize(task.T);
    for (int t = 0; t < task.T; ++t) {
      const int y = sample_inverse_cdf(d[t], uniform01(rng));
      r.tokens[t] = y;
      r.logprobs[t] = std::log(d[t][y]);
      r.prefix[t] = t;
    }
    r.outcome = verifier(r.tokens, task);
  }
  return out;
}

inline Mask annotation_mask(const OracleAnnotation& ann, int T, double alpha) {
  std::vector<CharSpan> spans;
  for (const auto& s : ann.spans)
    spans.push_back({static_cast<std::size_t>(s.start), static_cast<std::size_t>(s.end), s.type});
  std::vector<TokenInterval> toks(T);
  for (int t = 0; t < T; ++t) toks[t] = {static_cast<std::size_t>(t), static_cast<std::size_t>(t + 1)};
  const Mask m = project_spans_to_mask(spans, toks);
  return enforce_coverage_cap(m, std::vector<double>(T, 1.0), alpha);
}

inline StepResult train_step(TrainState& st, long k, const RunConfig& cfg) {
  const SynthTask& task = st.task;
  const Method method = cfg.method;
  const RoutingConfig rcfg = method_routing(method, cfg.routing);
  StepResult res;
  res.k = k;
  res.lambda = method_lambda(method, k, rcfg);
  res.rho = rho(res.lambda, rcfg.w0);

  const bool kl_method = is_routed(method) || method == Method::alltoken_kl_persistent;
  const bool uses_teacher = (kl_method && res.lambda > 0.0) || method == Method::rlsd_weighted;
  const double sync_level = method == Method::rlsd_weighted ? 1.0 : res.lambda;
  if (uses_teacher && should_sync(k, rcfg.sync_N, sync_level)) {
    st.teacher.sync_from(st.student);
    res.synced = true;
  }
  const std::size_t lookups0 = st.teacher.context_lookups();

  const std::size_t n = static_cast<std::size_t>(cfg.group_size) * cfg.groups;
  Engine srng = make_stream(st.seed, static_cast<std::uint64_t>(k), kStreamSample);
  Engine arng = make_stream(st.seed, static_cast<std::uint64_t>(k), kStreamAnnotate);
  res.rollouts = sample_rollouts(task, st.student, n, srng);
  const auto sd = student_dists(task, st.student);

  std::vector<double> adv(n, 0.0);
  for (int g = 0; g < cfg.groups; ++g) {
    std::vector<double> r;
    for (int i = 0; i < cfg.group_size; ++i)
      r.push_back(res.rollouts[g * cfg.group_size + i].outcome);
    const auto a = group_advantages(r);
    for (int i = 0; i < cfg.group_size; ++i) adv[g * cfg.group_size + i] = a[i];
  }

  std::vector<RoutedItem> batch(n);
  std::vector<OracleAnnotation> anns(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Rollout& ro = res.rollouts[i];
    res.train_reward += ro.outcome / static_cast<double>(n);
    anns[i] = oracle_annotate(ro.tokens, task, cfg.annotator_precision, arng);
    RoutedItem& it = batch[i];
    it.tokens = ro.tokens;
    it.student = sd;
    it.advantage = adv[i];
    if (method == Method::alltoken_kl_persistent) {
      // every token joins the forward branch, whatever the outcome
      it.part = partition(task.T, Mask(task.T, 1), 1);
    } else {
      it.part = partition(task.T, annotation_mask(anns[i], task.T, rcfg.alpha), ro.outcome);
    }
    res.max_span_fraction = std::max(
        res.max_span_fraction, it.part.span_size() / static_cast<double>(task.T));
    if (uses_teacher) {
      const auto ctx = anns[i].contexts();
      it.teacher.resize(task.T);
      for (int t = 0; t < task.T; ++t) it.teacher[t] = st.teacher.dist({task.prompt, ctx, t});
      if (method == Method::rlsd_weighted) {
        it.token_weight.resize(task.T);
        for (int t = 0; t < task.T; ++t) {
          const int y = ro.tokens[t];
          it.token_weight[t] = rlsd_weight(it.teacher[t][y], sd[t][y], cfg.eps_w).clipped;
        }
        it.teacher.clear();
      }
    }
    res.partitions.push_back(it.part);
  }

  LossOptions lopt;
  lopt.clip = cfg.clip;
  lopt.floor_top_k = cfg.floor_top_k;
  lopt.p_min = cfg.p_min;
  const RoutedLossReport rep = routed_step_loss(batch, res.lambda, rcfg, lopt);
  res.loss = rep.total;
  res.teacher_consulted = rep.teacher_consulted;
  SPANRL_REQUIRE(std::isfinite(rep.total), numeric_error,
                 "non-finite loss at step " + std::to_string(k));

  res.grad.assign(task.T, std::vector<double>(task.V, 0.0));
  res.key_grad.assign(task.T, std::vector<double>(task.V, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (int t = 0; t < task.T; ++t)
      for (int v = 0; v < task.V; ++v) {
        const double g = rep.per_token_logit_grads[i][t][v];
        SPANRL_REQUIRE(std::isfinite(g), numeric_error, "non-finite gradient");
        res.grad[t][v] += g;
        if (!batch[i].part.key_idx.empty() &&
            std::find(batch[i].part.key_idx.begin(), batch[i].part.key_idx.end(),
                      static_cast<std::size_t>(t)) != batch[i].part.key_idx.end())
          res.key_grad[t][v] += rep.span_grads[i][t][v];
      }

  // exposure: tokens that received a privileged gradient this step
  double mv = 0.0, dev = 0.0;
  if (kl_method && res.lambda > 0.0) {
    const ContextSet cs = build_context_set(task, st.teacher);
    std::vector<double> Vt(task.T), Dt(task.T);
    for (int t = 0; t < task.T; ++t) {
      Vt[t] = privileged_variance(cs, t);
      Dt[t] = expected_deviation_sq(cs, sd[t], t);
    }
    for (const auto& it : batch) {
      double a = 0.0, b = 0.0;
      auto add = [&](const std::vector<std::size_t>& idx, int mu) {
        if (!mu) return;
        for (std::size_t t : idx) {
          a += Vt[t];
          b += Dt[t];
        }
      };
      add(it.part.error_idx, rcfg.mu_E);
      add(it.part.key_idx, rcfg.mu_K);
      mv += a / task.T / static_cast<double>(n);
      dev += b / task.T / static_cast<double>(n);
    }
  }
  st.ledger.append(k, res.lambda, mv, dev);

  res.teacher_lookups = st.teacher.context_lookups() - lookups0;
  if (res.lambda == 0.0 && method != Method::rlsd_weighted)
    SPANRL_REQUIRE(res.teacher_lookups == 0 && !res.teacher_consulted, invariant_error,
                   "teacher consulted while the KL weight is zero");

  for (int t = 0; t < task.T; ++t) {
    Logits& row = st.student.row({task.prompt, t});
    for (int v = 0; v < task.V; ++v) row[v] -= cfg.lr * res.grad[t][v];
  }
  return res;
}

struct LogRow {
  long step = 0;
  double train_reward = 0.0;
  double val_reward = 0.0;
  double entropy = 0.0;
  double lambda = 0.0;
  double rho = 1.0;
  double exposure = 0.0;
  std::optional<double> delta_lift;
  double response_length = 0.0;
};

struct RunSummary {
  std::string method;
  std::string task_id;
  std::uint64_t seed = 0;
  double initial_val_reward = 0.0;
  double final_val_reward = 0.0;
  double final_entropy = 0.0;
  double exposure = 0.0;
  double exposure_bound = 0.0;
  std::optional<double> delta_lift;  // pooled over every step and qualifying eval token
  std::optional<double> delta_lift_window;  // same, restricted to steps with lambda schedule > 0
  std::size_t lift_eval_tokens = 0;
};

struct RunLog {
  std::vector<LogRow> rows;
  RunSummary summary;
  ExposureLedger ledger;
  std::vector<std::vector<double>> final_logits;
};

struct LiftProbe {
  int t = 0;
  int y = 0;
  std::vector<int> contexts;
};

// Key-span tokens drawn once from the untrained policy; every method is
// scored on the same set.
inline std::vector<LiftProbe> freeze_lift_set(const SynthTask& task, std::uint64_t seed, int n) {
  std::vector<LiftProbe> out;
  if (n <= 0) return out;
  const PolicyTable init = make_policy_table(task);
  Engine srng = make_stream(seed, 0, kStreamLiftSet);
  Engine arng = make_stream(seed, 1, kStreamLiftSet);
  const auto ro = sample_rollouts(task, init, static_cast<std::size_t>(n), srng);
  for (const auto& r : ro) {
    const auto ann = oracle_annotate(r.tokens, task, 1.0, arng);
    if (ann.outcome != 1) continue;
    for (const auto& s : ann.spans)
      for (int t = s.start; t < s.end; ++t) out.push_back({t, r.tokens[t], ann.contexts()});
  }
  return out;
}

inline double mean_entropy(const SynthTask& task, const PolicyTable& tab) {
  double h = 0.0;
  for (const auto& d : student_dists(task, tab)) h += entropy(d);
  return h / task.T;
}

inline SynthTask make_task(const RunConfig& cfg, std::uint64_t seed) {
  switch (cfg.task_kind) {
    case TaskKind::exposure: return generate_exposure_task(seed);
    case TaskKind::alignment: return generate_alignment_task(seed);
    default: break;
  }
  SynthTask t = generate_task(cfg.task, seed);
  const auto cert = regime_certificates(t);
  SPANRL_REQUIRE(cert.ok, invariant_error, "regime certificate: " + cert.detail);
  return t;
}

inline RunLog run_single(const RunConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const SynthTask task = make_task(cfg, seed);
  TrainState st = make_state(task, seed);
  const auto probes = freeze_lift_set(task, seed, cfg.lift_eval_rollouts);
  RunLog log;
  log.summary.method = method_name(cfg.method);
  log.summary.task_id = task.id;
  log.summary.seed = seed;
  log.summary.lift_eval_tokens = probes.size();
  log.summary.initial_val_reward = expected_reward(task, student_dists(task, st.student));

  double lift_sum = 0.0, lift_win = 0.0;
  std::size_t lift_n = 0, lift_wn = 0;
  for (long k = 0; k < cfg.steps; ++k) {
    std::vector<LiftSample> samples(probes.size());
    for (std::size_t i = 0; i < probes.size(); ++i) {
      const auto& p = probes[i];
      const Distribution s = st.student.dist({task.prompt, {}, p.t});
      // the teacher a sync at step k would produce; diagnostics only
      const Distribution q = st.student.dist({task.prompt, p.contexts, p.t});
      samples[i] = {p.t, p.y, std::log(s[p.y]), 0.0, q[p.y] > s[p.y]};
    }
    const StepResult r = train_step(st, k, cfg);
    for (std::size_t i = 0; i < probes.size(); ++i) {
      const Distribution s = st.student.dist({task.prompt, {}, probes[i].t});
      samples[i].logprob_after = std::log(s[probes[i].y]);
      if (samples[i].teacher_supported) {
        const double d = samples[i].logprob_after - samples[i].logprob_before;
        lift_sum += d;
        ++lift_n;
        if (lambda_schedule(k, cfg.routing) > 0.0) {
          lift_win += d;
          ++lift_wn;
        }
      }
    }
    LogRow row;
    row.step = k;
    row.train_reward = r.train_reward;
    row.val_reward = expected_reward(task, student_dists(task, st.student));
    row.entropy = mean_entropy(task, st.student);
    row.lambda = r.lambda;
    row.rho = r.rho;
    row.exposure = st.ledger.exposure();
    row.delta_lift = delta_lift(samples);
    row.response_length = task.T;
    SPANRL_REQUIRE(std::isfinite(row.val_reward) && std::isfinite(row.entropy), numeric_error,
                   "non-finite diagnostics at step " + std::to_string(k));
    log.rows.push_back(row);
  }
  log.summary.final_val_reward = log.rows.back().val_reward;
  log.summary.final_entropy = log.rows.back().entropy;
  log.summary.exposure = st.ledger.exposure();
  log.summary.exposure_bound = st.ledger.bound();
  if (lift_n) log.summary.delta_lift = lift_sum / static_cast<double>(lift_n);
  if (lift_wn) log.summary.delta_lift_window = lift_win / static_cast<double>(lift_wn);
  log.ledger = st.ledger;
  for (int t = 0; t < task.T; ++t) log.final_logits.push_back(st.student.row({task.prompt, t}));
  return log;
}

}  // namespace spanrl
