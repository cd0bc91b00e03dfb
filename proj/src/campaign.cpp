// Copyright 2026 The rtmarl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

#include "rtmarl/harness.hpp"

#ifndef RTMARL_VERSION
#define RTMARL_VERSION "0.0.0"
#endif

namespace rtmarl::harness {

using json = nlohmann::json;

std::string code_version() { return std::string("rtmarl ") + RTMARL_VERSION; }

namespace {

json metrics_body(const EvalMetrics& m) {
  return {{"cr", m.collision_rate},
          {"tt", m.travel_time ? json(*m.travel_time) : json(nullptr)},
          {"ala", m.avg_lateral_accel},
          {"as", m.avg_speed},
          {"episodes", m.episodes}};
}

std::string cell_name(const std::string& label, cgmdp::Scenario scenario, std::uint64_t seed) {
  return label + "_" + std::string(cgmdp::scenario_name(scenario)) + "_seed" + std::to_string(seed);
}

void write_eval(const std::filesystem::path& dir, const EvalResult& eval, std::uint64_t seed,
                const std::string& label, cgmdp::Scenario scenario, int keep_logs) {
  write_text(dir / "metrics.json", metrics_json(eval.metrics, seed, label, scenario).dump(2) + "\n");
  const std::size_t keep = keep_logs < 0 ? eval.logs.size()
                                         : std::min(eval.logs.size(), static_cast<std::size_t>(keep_logs));
  for (std::size_t i = 0; i < keep; ++i) {
    char name[48];
    std::snprintf(name, sizeof name, "episode_%03zu.csv", i);
    write_trajectory_csv(dir / "logs" / name, eval.logs[i]);
  }
}

double mean_cost(const EvalResult& eval) {
  if (eval.episodes.empty()) return 0.0;
  double s = 0.0;
  for (const auto& e : eval.episodes) s += e.mean_cost;
  return s / static_cast<double>(eval.episodes.size());
}

RunRecord run_cell(const Config& cfg, algo::Algo a, cgmdp::Scenario scenario, std::uint64_t seed,
                   const std::filesystem::path& out_dir) {
  RunRecord rec;
  rec.label = std::string(algo::algo_name(a));
  rec.scenario = scenario;
  rec.seed = seed;
  rec.dir = out_dir / cell_name(rec.label, scenario, seed);
  try {
    algo::TrainConfig tc = cfg.train;
    tc.seed = seed;
    tc.threads = 1;
    const algo::TrainResult trained = algo::train(a, cfg.env, scenario, tc);
    write_curves_csv(rec.dir / "curves.csv", trained.curves);
    save_checkpoint(rec.dir / "checkpoint.json", *trained.model, scenario, cfg);
    const std::size_t n = trained.curves.size();
    const std::size_t tail = std::min<std::size_t>(100, n);
    double s = 0.0;
    for (std::size_t i = n - tail; i < n; ++i) s += trained.curves[i].normalized_reward;
    rec.final_normalized_reward = tail > 0 ? s / static_cast<double>(tail) : 0.0;

    const EvalResult eval = evaluate(trained.model.get(), cfg.env, scenario,
                                     {cfg.campaign.eval_episodes, seed, cfg.campaign.greedy_eval});
    write_eval(rec.dir, eval, seed, rec.label, scenario, cfg.campaign.keep_logs);
    rec.metrics = eval.metrics;
    rec.eval_cost = mean_cost(eval);
    rec.ok = true;
  } catch (const std::exception& e) {
    rec.error = e.what();
  }
  return rec;
}

RunRecord run_baseline(const Config& cfg, std::uint64_t seed, const std::filesystem::path& out_dir) {
  RunRecord rec;
  rec.label = "baseline";
  rec.scenario = cgmdp::Scenario::kSvi;
  rec.seed = seed;
  rec.dir = out_dir / cell_name(rec.label, rec.scenario, seed);
  try {
    const EvalResult eval =
        evaluate(nullptr, cfg.env, rec.scenario, {cfg.campaign.eval_episodes, seed, true});
    write_eval(rec.dir, eval, seed, rec.label, rec.scenario, cfg.campaign.keep_logs);
    rec.metrics = eval.metrics;
    rec.ok = true;
  } catch (const std::exception& e) {
    rec.error = e.what();
  }
  return rec;
}

void mean_std(const std::vector<double>& v, double& mean, double& sd) {
  mean = 0.0;
  sd = 0.0;
  if (v.empty()) return;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  for (double x : v) sd += (x - mean) * (x - mean);
  sd = std::sqrt(sd / static_cast<double>(v.size()));
}

}  // namespace

json RunManifest::to_json() const {
  json doc;
  json a = json::array();
  for (auto x : algos) a.push_back(std::string(algo::algo_name(x)));
  json s = json::array();
  for (auto x : scenarios) s.push_back(std::string(cgmdp::scenario_name(x)));
  doc["algos"] = a;
  doc["scenarios"] = s;
  doc["seeds"] = seeds;
  doc["config_hash"] = config_hash;
  doc["code_version"] = code_version;
  doc["out_dir"] = out_dir.string();
  json runs_json = json::array();
  for (const auto& r : runs) {
    json j = {{"label", r.label},
              {"scenario", std::string(cgmdp::scenario_name(r.scenario))},
              {"seed", r.seed},
              {"ok", r.ok},
              {"dir", r.dir.string()}};
    if (r.ok) {
      j["metrics"] = metrics_body(r.metrics);
      j["eval_cost"] = r.eval_cost;
      j["final_normalized_reward"] = r.final_normalized_reward;
    } else {
      j["error"] = r.error;
    }
    runs_json.push_back(j);
  }
  doc["runs"] = runs_json;
  return doc;
}

std::vector<SummaryRow> summarize(const RunManifest& manifest) {
  std::vector<SummaryRow> rows;
  std::vector<std::pair<std::string, cgmdp::Scenario>> keys;
  for (const auto& r : manifest.runs) {
    const auto key = std::pair{r.label, r.scenario};
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) keys.push_back(key);
  }
  for (const auto& [label, scenario] : keys) {
    std::vector<double> cr, tt, ala, as;
    for (const auto& r : manifest.runs) {
      if (!r.ok || r.label != label || r.scenario != scenario) continue;
      cr.push_back(r.metrics.collision_rate);
      if (r.metrics.travel_time) tt.push_back(*r.metrics.travel_time);
      ala.push_back(r.metrics.avg_lateral_accel);
      as.push_back(r.metrics.avg_speed);
    }
    SummaryRow row;
    row.label = label;
    row.scenario = scenario;
    row.runs = static_cast<int>(cr.size());
    mean_std(cr, row.cr_mean, row.cr_std);
    mean_std(tt, row.tt_mean, row.tt_std);
    mean_std(ala, row.ala_mean, row.ala_std);
    mean_std(as, row.as_mean, row.as_std);
    rows.push_back(row);
  }
  return rows;
}

std::string summary_csv(std::span<const SummaryRow> rows) {
  std::ostringstream os;
  os << "label,scenario,runs,cr_mean,cr_std,tt_mean,tt_std,ala_mean,ala_std,as_mean,as_std\n";
  for (const auto& r : rows) {
    os << r.label << ',' << cgmdp::scenario_name(r.scenario) << ',' << r.runs;
    for (double v : {r.cr_mean, r.cr_std, r.tt_mean, r.tt_std, r.ala_mean, r.ala_std, r.as_mean,
                     r.as_std}) {
      char buf[64];
      const auto res = std::to_chars(buf, buf + sizeof buf, v);
      os << ',' << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf));
    }
    os << '\n';
  }
  return os.str();
}

RunManifest run_campaign(const Config& cfg, std::span<const algo::Algo> algos,
                         std::span<const cgmdp::Scenario> scenarios,
                         std::span<const std::uint64_t> seeds,
                         const std::filesystem::path& out_dir, int threads, const LogFn& log) {
  RunManifest manifest;
  manifest.algos.assign(algos.begin(), algos.end());
  manifest.scenarios.assign(scenarios.begin(), scenarios.end());
  manifest.seeds.assign(seeds.begin(), seeds.end());
  manifest.code_version = code_version();
  manifest.out_dir = out_dir;
  const std::string config_text = serialize_config(cfg);
  manifest.config_hash = hex64(fnv1a(config_text));
  std::filesystem::create_directories(out_dir);
  write_text(out_dir / "config.json", config_text);

  struct Cell {
    bool baseline;
    algo::Algo algo;
    cgmdp::Scenario scenario;
    std::uint64_t seed;
  };
  std::vector<Cell> cells;
  for (auto a : algos) {
    for (auto s : scenarios) {
      for (auto seed : seeds) cells.push_back({false, a, s, seed});
    }
  }
  if (!algos.empty() &&
      std::find(scenarios.begin(), scenarios.end(), cgmdp::Scenario::kSvi) != scenarios.end()) {
    for (auto seed : seeds) cells.push_back({true, algo::Algo::kPpo, cgmdp::Scenario::kSvi, seed});
  }

  manifest.runs.resize(cells.size());
  std::mutex log_mutex;
  std::size_t next = 0;
  const auto worker = [&] {
    for (;;) {
      std::size_t i = 0;
      {
        std::lock_guard lock(log_mutex);
        if (next >= cells.size()) return;
        i = next++;
      }
      const Cell& c = cells[i];
      RunRecord rec = c.baseline ? run_baseline(cfg, c.seed, out_dir)
                                 : run_cell(cfg, c.algo, c.scenario, c.seed, out_dir);
      std::lock_guard lock(log_mutex);
      if (log) {
        std::ostringstream os;
        os << rec.label << ' ' << cgmdp::scenario_name(rec.scenario) << " seed " << rec.seed;
        if (rec.ok) {
          os << ": CR " << rec.metrics.collision_rate << "%";
        } else {
          os << ": FAILED " << rec.error;
        }
        log(os.str());
      }
      manifest.runs[i] = std::move(rec);
    }
  };
  const int n = std::clamp(algo::resolve_threads(threads), 1, std::max<int>(1, static_cast<int>(cells.size())));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  const auto rows = summarize(manifest);
  write_text(out_dir / "summary.csv", summary_csv(rows));
  std::ostringstream md;
  md << "| Method | Scenario | CR (%) | TT (s) | ALA (m/s^2) | AS (m/s) |\n";
  md << "|---|---|---|---|---|---|\n";
  md.setf(std::ios::fixed);
  md.precision(2);
  for (const auto& r : rows) {
    md << "| " << r.label << " | " << cgmdp::scenario_name(r.scenario) << " | " << r.cr_mean
       << " ± " << r.cr_std << " | " << r.tt_mean << " ± " << r.tt_std << " | " << r.ala_mean
       << " ± " << r.ala_std << " | " << r.as_mean << " ± " << r.as_std << " |\n";
  }
  write_text(out_dir / "summary.md", md.str());
  write_text(out_dir / "manifest.json", manifest.to_json().dump(2) + "\n");
  return manifest;
}

}  // namespace rtmarl::harness
