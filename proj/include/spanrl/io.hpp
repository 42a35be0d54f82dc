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

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>
#include <string>

#include <json.hpp>

#include "spanrl/runner.hpp"

namespace spanrl {

using json = nlohmann::json;

namespace detail {

inline void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key())) throw config_error("unknown key '" + it.key() + "' in " + where);
}

template <class T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw config_error(std::string("bad value for '") + key + "': " + e.what());
  }
}

// "inf", null or a non-positive number switch the clip off.
inline double read_tau(const json& v) {
  if (v.is_null()) return std::numeric_limits<double>::infinity();
  if (v.is_string()) {
    if (v.get<std::string>() == "inf") return std::numeric_limits<double>::infinity();
    throw config_error("tau must be a number, null or \"inf\"");
  }
  if (!v.is_number()) throw config_error("tau must be a number, null or \"inf\"");
  const double t = v.get<double>();
  return t > 0.0 ? t : std::numeric_limits<double>::infinity();
}

}  // namespace detail

inline RunConfig parse_config(const json& j) {
  if (!j.is_object()) throw config_error("config root must be an object");
  RunConfig c;
  detail::reject_unknown(j, {"method", "task", "seeds", "seed", "steps", "group_size", "groups",
                             "lr", "routing", "clip", "floor", "annotator_precision", "eps_w",
                             "lift_eval_rollouts", "out_dir", "sweep"},
                         "config");
  if (j.contains("method")) c.method = method_from_name(j.at("method").get<std::string>());
  if (j.contains("task")) {
    const json& t = j.at("task");
    detail::reject_unknown(t, {"kind", "regime", "horizon", "vocab", "n_critical", "offset", "p_star",
                               "n_alt", "alt_mass", "p_minus", "cw_n_alt", "cw_alt_mass",
                               "null_context_prob"},
                           "task");
    if (t.contains("kind")) {
      const std::string k = t.at("kind").get<std::string>();
      if (k == "regime") c.task_kind = TaskKind::regime;
      else if (k == "exposure") c.task_kind = TaskKind::exposure;
      else if (k == "alignment") c.task_kind = TaskKind::alignment;
      else throw config_error("unknown task kind: " + k);
    }
    if (t.contains("regime")) c.task = TaskParams::defaults(regime_from_name(t.at("regime").get<std::string>()));
    detail::read(t, "horizon", c.task.horizon);
    detail::read(t, "vocab", c.task.vocab);
    detail::read(t, "n_critical", c.task.n_critical);
    detail::read(t, "offset", c.task.offset);
    detail::read(t, "p_star", c.task.p_star);
    detail::read(t, "n_alt", c.task.n_alt);
    detail::read(t, "alt_mass", c.task.alt_mass);
    detail::read(t, "p_minus", c.task.p_minus);
    detail::read(t, "cw_n_alt", c.task.cw_n_alt);
    detail::read(t, "cw_alt_mass", c.task.cw_alt_mass);
    detail::read(t, "null_context_prob", c.task.null_context_prob);
  }
  if (j.contains("seeds")) detail::read(j, "seeds", c.seeds);
  if (j.contains("seed")) c.seeds = {j.at("seed").get<std::uint64_t>()};
  detail::read(j, "steps", c.steps);
  detail::read(j, "group_size", c.group_size);
  detail::read(j, "groups", c.groups);
  detail::read(j, "lr", c.lr);
  if (j.contains("routing")) {
    const json& r = j.at("routing");
    detail::reject_unknown(r, {"mu_E", "mu_K", "alpha", "tau", "w0", "t_start", "T_decay", "sync_N"},
                           "routing");
    detail::read(r, "mu_E", c.routing.mu_E);
    detail::read(r, "mu_K", c.routing.mu_K);
    detail::read(r, "alpha", c.routing.alpha);
    if (r.contains("tau")) c.routing.tau = detail::read_tau(r.at("tau"));
    detail::read(r, "w0", c.routing.w0);
    detail::read(r, "t_start", c.routing.t_start);
    detail::read(r, "T_decay", c.routing.T_decay);
    detail::read(r, "sync_N", c.routing.sync_N);
  }
  if (j.contains("clip")) {
    const json& r = j.at("clip");
    detail::reject_unknown(r, {"eps_low", "eps_high"}, "clip");
    detail::read(r, "eps_low", c.clip.eps_low);
    detail::read(r, "eps_high", c.clip.eps_high);
  }
  if (j.contains("floor")) {
    const json& r = j.at("floor");
    detail::reject_unknown(r, {"top_k", "p_min"}, "floor");
    detail::read(r, "top_k", c.floor_top_k);
    detail::read(r, "p_min", c.p_min);
  }
  detail::read(j, "annotator_precision", c.annotator_precision);
  detail::read(j, "eps_w", c.eps_w);
  detail::read(j, "lift_eval_rollouts", c.lift_eval_rollouts);
  detail::read(j, "out_dir", c.out_dir);
  c.validate();
  return c;
}

inline json parse_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open config: " + path);
  try {
    return json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw config_error(std::string("config parse failure: ") + e.what());
  }
}

inline json to_json(const RunConfig& c) {
  auto tau = std::isfinite(c.routing.tau) ? json(c.routing.tau) : json("inf");
  std::string kind = c.task_kind == TaskKind::regime ? "regime"
                     : c.task_kind == TaskKind::exposure ? "exposure" : "alignment";
  return json{
      {"method", method_name(c.method)},
      {"task",
       {{"kind", kind}, {"regime", regime_name(c.task.regime)}, {"horizon", c.task.horizon},
        {"vocab", c.task.vocab}, {"n_critical", c.task.n_critical}, {"offset", c.task.offset},
        {"p_star", c.task.p_star}, {"n_alt", c.task.n_alt}, {"alt_mass", c.task.alt_mass},
        {"p_minus", c.task.p_minus}, {"cw_n_alt", c.task.cw_n_alt},
        {"cw_alt_mass", c.task.cw_alt_mass}, {"null_context_prob", c.task.null_context_prob}}},
      {"seeds", c.seeds},
      {"steps", c.steps},
      {"group_size", c.group_size},
      {"groups", c.groups},
      {"lr", c.lr},
      {"routing",
       {{"mu_E", c.routing.mu_E}, {"mu_K", c.routing.mu_K}, {"alpha", c.routing.alpha},
        {"tau", tau}, {"w0", c.routing.w0}, {"t_start", c.routing.t_start},
        {"T_decay", c.routing.T_decay}, {"sync_N", c.routing.sync_N}}},
      {"clip", {{"eps_low", c.clip.eps_low}, {"eps_high", c.clip.eps_high}}},
      {"floor", {{"top_k", c.floor_top_k}, {"p_min", c.p_min}}},
      {"annotator_precision", c.annotator_precision},
      {"eps_w", c.eps_w},
      {"lift_eval_rollouts", c.lift_eval_rollouts},
  };
}

// FNV-1a over the canonical dump; out_dir is excluded on purpose.
inline std::string config_hash(const RunConfig& c) {
  const std::string s = to_json(c).dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

inline void write_log_csv(std::ostream& os, const RunLog& log) {
  os << "step,train_reward,val_reward,entropy,lambda,rho,exposure,delta_lift,response_length\n";
  os << std::setprecision(17);
  for (const auto& r : log.rows) {
    os << r.step << ',' << r.train_reward << ',' << r.val_reward << ',' << r.entropy << ','
       << r.lambda << ',' << r.rho << ',' << r.exposure << ',';
    if (r.delta_lift)
      os << *r.delta_lift;
    else
      os << "NA";
    os << ',' << r.response_length << '\n';
  }
}

inline void write_plot_long(std::ostream& os, const RunLog& log, bool header = true) {
  if (header) os << "method,seed,step,metric,value\n";
  os << std::setprecision(17);
  for (const auto& r : log.rows) {
    auto emit = [&](const char* name, double v) {
      os << log.summary.method << ',' << log.summary.seed << ',' << r.step << ',' << name << ','
         << v << '\n';
    };
    emit("train_reward", r.train_reward);
    emit("val_reward", r.val_reward);
    emit("entropy", r.entropy);
    emit("lambda", r.lambda);
    emit("rho", r.rho);
    emit("exposure", r.exposure);
    if (r.delta_lift) emit("delta_lift", *r.delta_lift);
  }
}

inline json summary_json(const RunLog& log, const RunConfig& cfg) {
  const auto& s = log.summary;
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  return json{{"method", s.method},
              {"task_id", s.task_id},
              {"seed", s.seed},
              {"config_hash", config_hash(cfg)},
              {"steps", cfg.steps},
              {"initial_val_reward", s.initial_val_reward},
              {"final_val_reward", s.final_val_reward},
              {"final_entropy", s.final_entropy},
              {"exposure", s.exposure},
              {"exposure_bound", s.exposure_bound},
              {"delta_lift", opt(s.delta_lift)},
              {"delta_lift_window", opt(s.delta_lift_window)},
              {"lift_eval_tokens", s.lift_eval_tokens},
              {"credit_norm", "l2"}};
}

}  // namespace spanrl
