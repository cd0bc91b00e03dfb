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

// rtmarl: train, evaluate and inspect red-team policies.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "rtmarl/harness.hpp"

namespace fs = std::filesystem;
using namespace rtmarl;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

harness::Config load_or_default(const std::string& path) {
  return path.empty() ? harness::Config{} : harness::load_config(path);
}

void write_logs(const fs::path& dir, const harness::EvalResult& eval) {
  for (std::size_t i = 0; i < eval.logs.size(); ++i) {
    char name[48];
    std::snprintf(name, sizeof name, "episode_%03zu.csv", i);
    harness::write_trajectory_csv(dir / "logs" / name, eval.logs[i]);
  }
}

void print_metrics(const harness::EvalMetrics& m) {
  std::cout << "CR " << m.collision_rate << "%  TT ";
  if (m.travel_time) {
    std::cout << *m.travel_time;
  } else {
    std::cout << "n/a";
  }
  std::cout << "  ALA " << m.avg_lateral_accel << "  AS " << m.avg_speed << "  (" << m.episodes
            << " episodes)\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Red-team scenario generation for AV testing"};
  app.require_subcommand(1);
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "No progress output");

  const std::vector<std::string> algo_names = {"ppo", "gd3qn", "gppo", "dc-gppo"};
  const std::vector<std::string> scenario_names = {"svi", "mvi"};

  std::string config_path, algo_name, scenario = "svi", out_dir, checkpoint, run_dir, log_path;
  std::uint64_t seed = 0;
  std::optional<int> episodes;
  std::optional<bool> greedy;
  int threads = 0;

  auto* train = app.add_subcommand("train", "Train one red-team policy");
  train->add_option("--config", config_path, "JSON config (defaults when omitted)")->check(CLI::ExistingFile);
  train->add_option("--algo", algo_name)->required()->check(CLI::IsMember(algo_names));
  train->add_option("--scenario", scenario)->check(CLI::IsMember(scenario_names));
  train->add_option("--seed", seed);
  train->add_option("--episodes", episodes, "Override train.episodes")->check(CLI::PositiveNumber);
  train->add_option("--out", out_dir)->required();

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint, or the baseline with 'none'");
  eval->add_option("--checkpoint", checkpoint)->required();
  eval->add_option("--config", config_path, "Config for the baseline run")->check(CLI::ExistingFile);
  eval->add_option("--scenario", scenario)->check(CLI::IsMember(scenario_names));
  eval->add_option("--episodes", episodes);
  eval->add_option("--seed", seed);
  eval->add_option("--greedy", greedy, "Argmax actions instead of seeded sampling");
  eval->add_option("--out", out_dir)->required();

  auto* campaign = app.add_subcommand("campaign", "Train and evaluate every configured cell");
  campaign->add_option("--config", config_path)->required()->check(CLI::ExistingFile);
  campaign->add_option("--out", out_dir)->required();
  campaign->add_option("--threads", threads, "Parallel cells (0: RTMARL_THREADS or cores)");

  auto* plot = app.add_subcommand("plot", "Write SVG reward curves and trajectories");
  plot->add_option("--run", run_dir)->required()->check(CLI::ExistingDirectory);
  plot->add_option("--out", out_dir)->required();

  auto* replay = app.add_subcommand("replay", "Print a trajectory log step by step");
  replay->add_option("--log", log_path)->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*train) {
      harness::Config cfg = load_or_default(config_path);
      if (episodes) cfg.train.episodes = *episodes;
      cfg.train.seed = seed;
      const auto a = algo::algo_from_name(algo_name);
      const auto sc = cgmdp::scenario_from_name(scenario);
      algo::TrainOptions opts;
      if (!quiet) {
        opts.progress = [](const algo::EpisodeRecord& r) {
          if ((r.episode + 1) % 50 == 0) {
            std::cerr << "episode " << r.episode + 1 << " reward " << r.reward << " cost " << r.cost
                      << " lambda " << r.lambda << "\n";
          }
        };
      }
      const auto result = algo::train(a, cfg.env, sc, cfg.train, opts);
      const fs::path out(out_dir);
      harness::write_curves_csv(out / "curves.csv", result.curves);
      harness::save_checkpoint(out / "checkpoint.json", *result.model, sc, cfg);
      harness::write_text(out / "config.json", harness::serialize_config(cfg));
      if (!quiet) std::cerr << "wrote " << (out / "checkpoint.json").string() << "\n";
      return 0;
    }

    if (*eval) {
      harness::Config cfg;
      std::optional<harness::Checkpoint> ckpt;
      std::string label = "baseline";
      if (checkpoint == "none") {
        cfg = load_or_default(config_path);
      } else {
        ckpt = harness::load_checkpoint(checkpoint);
        cfg = harness::parse_config(ckpt->config);
        label = std::string(algo::algo_name(ckpt->model->algo()));
      }
      const auto sc = cgmdp::scenario_from_name(scenario);
      if (ckpt && ckpt->scenario != sc) {
        throw harness::FormatError("checkpoint was trained on " +
                                   std::string(cgmdp::scenario_name(ckpt->scenario)));
      }
      harness::EvalOptions opts;
      opts.episodes = episodes.value_or(cfg.campaign.eval_episodes);
      if (opts.episodes <= 0) throw harness::ConfigError("--episodes must be positive");
      opts.seed = seed;
      opts.greedy = greedy.value_or(cfg.campaign.greedy_eval);
      const auto result = harness::evaluate(ckpt ? ckpt->model.get() : nullptr, cfg.env, sc, opts);
      const fs::path out(out_dir);
      harness::write_text(out / "metrics.json",
                          harness::metrics_json(result.metrics, seed, label, sc).dump(2) + "\n");
      write_logs(out, result);
      if (!quiet) print_metrics(result.metrics);
      return 0;
    }

    if (*campaign) {
      const harness::Config cfg = harness::load_config(config_path);
      harness::LogFn log;
      if (!quiet) log = [](const std::string& line) { std::cerr << line << "\n"; };
      const auto manifest =
          harness::run_campaign(cfg, cfg.campaign.algos, cfg.campaign.scenarios, cfg.campaign.seeds,
                                out_dir, threads, log);
      int failed = 0;
      for (const auto& r : manifest.runs) failed += r.ok ? 0 : 1;
      if (!quiet) std::cout << harness::read_text(fs::path(out_dir) / "summary.md");
      if (failed > 0) {
        std::cerr << failed << " run(s) failed, see manifest.json\n";
        return kExitRuntime;
      }
      return 0;
    }

    if (*plot) {
      for (const auto& p : harness::emit_plots(run_dir, out_dir)) {
        if (!quiet) std::cout << p.string() << "\n";
      }
      return 0;
    }

    if (*replay) {
      harness::replay(harness::read_trajectory_csv(log_path), std::cout);
      return 0;
    }
  } catch (const harness::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
