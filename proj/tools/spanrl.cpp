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

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "spanrl/acceptance.hpp"
#include "spanrl/io.hpp"

namespace fs = std::filesystem;
using namespace spanrl;

namespace {

void write_file(const fs::path& p, const std::string& body) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw config_error("cannot write " + p.string());
  f << body;
}

// One directory per seed when there are several.
void run_config(const RunConfig& cfg, const fs::path& out) {
  fs::create_directories(out);
  std::ostringstream plot;
  bool header = true;
  for (std::uint64_t seed : cfg.seeds) {
    const fs::path dir = cfg.seeds.size() == 1 ? out : out / ("seed_" + std::to_string(seed));
    fs::create_directories(dir);
    const RunLog log = run_single(cfg, seed);
    std::ostringstream csv, expo;
    write_log_csv(csv, log);
    log.ledger.write_csv(expo);
    write_file(dir / "log.csv", csv.str());
    write_file(dir / "exposure.csv", expo.str());
    write_file(dir / "summary.json", summary_json(log, cfg).dump(2) + "\n");
    write_plot_long(plot, log, header);
    header = false;
    std::printf("%s seed %llu: final E[R] %.6f (start %.6f)\n", log.summary.method.c_str(),
                static_cast<unsigned long long>(seed), log.summary.final_val_reward,
                log.summary.initial_val_reward);
  }
  write_file(out / "plot_long.csv", plot.str());
  write_file(out / "config.json", to_json(cfg).dump(2) + "\n");
}

json::json_pointer dotted(const std::string& key) {
  std::string p;
  std::size_t i = 0;
  while (i <= key.size()) {
    const std::size_t j = std::min(key.find('.', i), key.size());
    p += "/" + key.substr(i, j - i);
    i = j + 1;
  }
  return json::json_pointer(p);
}

std::string label(const json& v) {
  std::string s = v.is_string() ? v.get<std::string>() : v.dump();
  for (char& c : s)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '.' && c != '-') c = '_';
  return s;
}

int cmd_run(const std::string& path, std::optional<std::uint64_t> seed, const std::string& out) {
  json j = parse_json_file(path);
  RunConfig cfg = parse_config(j);
  if (seed) cfg.seeds = {*seed};
  run_config(cfg, out.empty() ? fs::path(cfg.out_dir) : fs::path(out));
  return 0;
}

int cmd_sweep(const std::string& path, const std::string& out) {
  json base = parse_json_file(path);
  if (!base.contains("sweep") || !base.at("sweep").is_object() || base.at("sweep").empty())
    throw config_error("sweep needs a non-empty \"sweep\" object of key -> list");
  const json axes = base.at("sweep");
  base.erase("sweep");
  std::vector<std::string> keys;
  std::vector<std::vector<json>> vals;
  for (auto it = axes.begin(); it != axes.end(); ++it) {
    if (!it.value().is_array() || it.value().empty())
      throw config_error("sweep axis '" + it.key() + "' must be a non-empty list");
    keys.push_back(it.key());
    vals.emplace_back(it.value().begin(), it.value().end());
  }
  RunConfig probe = parse_config(base);
  const fs::path root = out.empty() ? fs::path(probe.out_dir) : fs::path(out);
  fs::create_directories(root);
  std::ofstream index(root / "sweep_index.csv");
  index << "run";
  for (const auto& k : keys) index << ',' << k;
  index << ",dir\n";

  std::vector<std::size_t> at(keys.size(), 0);
  for (std::size_t n = 0;; ++n) {
    json j = base;
    std::string name = std::to_string(n);
    for (std::size_t a = 0; a < keys.size(); ++a) {
      j[dotted(keys[a])] = vals[a][at[a]];
      name += "_" + label(vals[a][at[a]]);
    }
    const RunConfig cfg = parse_config(j);
    run_config(cfg, root / name);
    index << n;
    for (std::size_t a = 0; a < keys.size(); ++a) index << ',' << vals[a][at[a]].dump();
    index << ',' << name << '\n';
    std::size_t a = 0;
    while (a < keys.size() && ++at[a] == vals[a].size()) at[a++] = 0;
    if (a == keys.size()) break;
  }
  return 0;
}

int cmd_verify(const std::vector<int>& only) {
  int failed = 0;
  const auto checks = acceptance::all_checks();
  for (std::size_t i = 0; i < checks.size(); ++i) {
    if (!only.empty() && std::find(only.begin(), only.end(), static_cast<int>(i) + 1) == only.end())
      continue;
    const auto r = acceptance::timed(checks[i]);
    std::printf("[%s] %2d %-28s %s (%.2fs)\n", r.pass ? "PASS" : "FAIL", r.id, r.name.c_str(),
                r.detail.c_str(), r.seconds);
    std::fflush(stdout);
    failed += !r.pass;
  }
  return failed ? 4 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"span-routed self-distillation on synthetic tabular tasks"};
  app.require_subcommand(1);

  std::string config, out;
  std::optional<std::uint64_t> seed;
  auto* run = app.add_subcommand("run", "train one config (every seed it lists)");
  run->add_option("config", config, "JSON config file")->required();
  run->add_option("--seed", seed, "override the config's seeds");
  run->add_option("--out", out, "output directory");

  auto* sweep = app.add_subcommand("sweep", "cartesian product over the config's sweep lists");
  sweep->add_option("config", config, "JSON config file")->required();
  sweep->add_option("--out", out, "output directory");

  std::vector<int> only;
  auto* verify = app.add_subcommand("verify", "run the invariant suite");
  verify->add_option("--only", only, "criterion ids to run");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*run) return cmd_run(config, seed, out);
    if (*sweep) return cmd_sweep(config, out);
    if (*verify) return cmd_verify(only);
  } catch (const spanrl::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
