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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "rtmarl/config.hpp"
#include "rtmarl/harness.hpp"

namespace fs = std::filesystem;
using namespace rtmarl;
using harness::ConfigError;
using harness::FormatError;

namespace {

const fs::path kGolden = RTMARL_GOLDEN_DIR;

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("rtmarl_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Small enough to train in well under a second per cell.
harness::Config tiny_config() {
  harness::Config cfg;
  cfg.train.episodes = 4;
  cfg.train.batch_size = 2;
  cfg.train.hidden = 8;
  cfg.train.minibatch_size = 64;
  cfg.train.epochs_per_update = 1;
  cfg.train.threads = 1;
  cfg.campaign.eval_episodes = 3;
  cfg.campaign.keep_logs = 2;
  return cfg;
}

harness::EpisodeLog golden_log(const std::string& name) {
  return harness::read_trajectory_csv(kGolden / "logs" / (name + ".csv"));
}

// Writes the fresh output when RTMARL_UPDATE_GOLDEN is set, then compares.
void expect_golden(const std::string& name, const std::string& text) {
  const fs::path path = kGolden / name;
  if (std::getenv("RTMARL_UPDATE_GOLDEN") != nullptr) harness::write_text(path, text);
  ASSERT_TRUE(fs::exists(path)) << path;
  EXPECT_EQ(harness::read_text(path), text) << name;
}

}  // namespace

// ---------------------------------------------------------------------------
// config

TEST(Config, DefaultsRoundTripThroughJson) {
  const harness::Config cfg;
  const std::string text = harness::serialize_config(cfg);
  const harness::Config back = harness::parse_config_text(text);
  EXPECT_EQ(harness::serialize_config(back), text);
  EXPECT_TRUE(back.train == cfg.train);
  EXPECT_TRUE(back.campaign == cfg.campaign);
}

TEST(Config, OverridesSurviveRoundTrip) {
  const harness::Config cfg = harness::parse_config_text(
      R"({"train": {"episodes": 7, "lr": 0.001}, "omega": {"safety_margin": 0.5},
          "campaign": {"algos": ["gppo"], "scenarios": ["mvi"], "seeds": [3, 9]}})");
  EXPECT_EQ(cfg.train.episodes, 7);
  EXPECT_DOUBLE_EQ(cfg.train.lr, 0.001);
  EXPECT_DOUBLE_EQ(cfg.env.omega.safety_margin, 0.5);
  EXPECT_EQ(cfg.campaign.algos, std::vector<algo::Algo>{algo::Algo::kGppo});
  EXPECT_EQ(cfg.campaign.scenarios, std::vector<cgmdp::Scenario>{cgmdp::Scenario::kMvi});
  EXPECT_EQ(cfg.campaign.seeds, (std::vector<std::uint64_t>{3, 9}));
  const harness::Config back = harness::parse_config_text(harness::serialize_config(cfg));
  EXPECT_EQ(harness::serialize_config(back), harness::serialize_config(cfg));
}

TEST(Config, FailsClosed) {
  const char* bad[] = {
      R"([])",
      R"({"trian": {}})",
      R"({"train": {"episodez": 3}})",
      R"({"train": {"episodes": "many"}})",
      R"({"train": {"episodes": 2.5}})",
      R"({"train": {"gamma": 1.5}})",
      R"({"train": []})",
      R"({"world": {"dt": -0.1}})",
      R"({"campaign": {"algos": ["sac"]}})",
      R"({"campaign": {"seeds": [-1]}})",
      R"({"campaign": {"eval_episodes": 0}})",
      R"({"train": {"episodes": 3})",
  };
  for (const char* text : bad) {
    EXPECT_THROW(harness::parse_config_text(text), ConfigError) << text;
  }
  EXPECT_THROW(harness::load_config("/nonexistent/rtmarl.json"), ConfigError);
}

TEST(Config, HashIsFnv1aOfTheSerializedBytes) {
  // published FNV-1a 64-bit vectors
  EXPECT_EQ(harness::fnv1a(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(harness::fnv1a("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(harness::fnv1a("foobar"), 0x85944171f73967e8ULL);
  EXPECT_EQ(harness::hex64(0xaf63dc4c8601ec8cULL), "af63dc4c8601ec8c");
  EXPECT_EQ(harness::hex64(1), "0000000000000001");

  harness::Config cfg;
  EXPECT_EQ(harness::config_hash(cfg), harness::fnv1a(harness::serialize_config(cfg)));
  const auto before = harness::config_hash(cfg);
  cfg.train.lr *= 2.0;
  EXPECT_NE(harness::config_hash(cfg), before);
}

// ---------------------------------------------------------------------------
// trajectory and curve files

TEST(TrajectoryCsv, RoundTripIsExact) {
  const harness::EpisodeLog log = golden_log("collision");
  ASSERT_FALSE(log.rows.empty());
  const std::string text = harness::trajectory_csv(log);
  const harness::EpisodeLog back = harness::parse_trajectory_csv(text);
  EXPECT_EQ(back.rows, log.rows);
  EXPECT_EQ(harness::trajectory_csv(back), text);
  EXPECT_EQ(text, harness::read_text(kGolden / "logs" / "collision.csv"));
}

TEST(TrajectoryCsv, MalformedRowNamesItsLine) {
  std::string text = harness::trajectory_csv(golden_log("clear_a"));
  // break the third data row (line 4)
  std::size_t pos = 0;
  for (int i = 0; i < 3; ++i) pos = text.find('\n', pos) + 1;
  const std::size_t end = text.find('\n', pos);
  std::string row = text.substr(pos, end - pos);
  row.replace(row.find(",AV,") != std::string::npos ? row.find(",AV,") : row.find(",HV,"), 4,
              ",Bus,");
  text.replace(pos, end - pos, row);
  try {
    harness::parse_trajectory_csv(text);
    FAIL() << "no error";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("line 4"), std::string::npos) << e.what();
  }

  EXPECT_THROW(harness::parse_trajectory_csv("step,time\n"), FormatError);
  const std::string header = harness::trajectory_csv({});
  try {
    harness::parse_trajectory_csv(header + "0,0,0,AV,1,2,3\n");
    FAIL() << "no error";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
  try {
    harness::parse_trajectory_csv(header + "0,0,0,AV,1,2,0,10,0,0,1,7,0\n");
    FAIL() << "no error";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("collision"), std::string::npos) << e.what();
  }
}

TEST(CurvesCsv, RoundTripAndErrors) {
  std::vector<algo::EpisodeRecord> curves;
  for (int e = 0; e < 5; ++e) {
    curves.push_back({e, -3.0 + 0.7 * e, 0.1 * e, 0.01 * e + 1.0 / 3.0, e == 2, 0.05 * e});
  }
  const std::string text = harness::curves_csv(curves);
  const auto back = harness::parse_curves_csv(text);
  ASSERT_EQ(back.size(), curves.size());
  for (std::size_t i = 0; i < curves.size(); ++i) {
    EXPECT_EQ(back[i].episode, curves[i].episode);
    EXPECT_EQ(back[i].reward, curves[i].reward);
    EXPECT_EQ(back[i].normalized_reward, curves[i].normalized_reward);
    EXPECT_EQ(back[i].cost, curves[i].cost);
    EXPECT_EQ(back[i].collision, curves[i].collision);
    EXPECT_EQ(back[i].lambda, curves[i].lambda);
  }
  const std::string header = text.substr(0, text.find('\n') + 1);
  try {
    harness::parse_curves_csv(header + "0,1,2,3,0,0\n1,nan?,2,3,0,0\n");
    FAIL() << "no error";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
  EXPECT_THROW(harness::read_curves_csv("/nonexistent/curves.csv"), FormatError);
}

// ---------------------------------------------------------------------------
// checkpoints

TEST(Checkpoint, RoundTripPreservesEveryWeight) {
  harness::Config cfg = tiny_config();
  auto trained = algo::train(algo::Algo::kDcGppo, cfg.env, cgmdp::Scenario::kSvi, cfg.train);
  const fs::path dir = scratch("ckpt");
  harness::save_checkpoint(dir / "c.json", *trained.model, cgmdp::Scenario::kSvi, cfg);
  const harness::Checkpoint ck = harness::load_checkpoint(dir / "c.json");
  EXPECT_EQ(ck.scenario, cgmdp::Scenario::kSvi);
  EXPECT_EQ(ck.model->algo(), algo::Algo::kDcGppo);
  EXPECT_EQ(ck.model->lambda_lag(), trained.model->lambda_lag());
  const auto a = trained.model->layers();
  const auto b = ck.model->layers();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i]->weight.data(), b[i]->weight.data()) << a[i]->name;
    EXPECT_EQ(a[i]->bias, b[i]->bias) << a[i]->name;
  }
  EXPECT_EQ(harness::parse_config(ck.config).train.hidden, 8);
  // saving the loaded model reproduces the file
  harness::save_checkpoint(dir / "d.json", *ck.model, ck.scenario, harness::parse_config(ck.config));
  EXPECT_EQ(harness::read_text(dir / "c.json"), harness::read_text(dir / "d.json"));
}

TEST(Checkpoint, MismatchesAreRejected) {
  harness::Config cfg = tiny_config();
  cfg.train.episodes = 0;
  auto trained = algo::train(algo::Algo::kGppo, cfg.env, cgmdp::Scenario::kSvi, cfg.train);
  const nlohmann::json good = harness::checkpoint_json(*trained.model, cgmdp::Scenario::kSvi, cfg);
  EXPECT_NO_THROW(harness::parse_checkpoint(good));

  auto mutate = [&](auto&& f) {
    nlohmann::json doc = good;
    f(doc);
    return doc;
  };
  EXPECT_THROW(harness::parse_checkpoint(mutate([](auto& d) { d["format_version"] = 2; })),
               FormatError);
  EXPECT_THROW(harness::parse_checkpoint(mutate([](auto& d) { d["algo"] = "sac"; })), FormatError);
  EXPECT_THROW(harness::parse_checkpoint(mutate([](auto& d) { d["model"]["hidden"] = 9; })),
               FormatError);
  EXPECT_THROW(harness::parse_checkpoint(mutate([](auto& d) { d["model"]["encoder"] = "flat"; })),
               FormatError);
  EXPECT_THROW(harness::parse_checkpoint(mutate([](auto& d) { d["layers"].erase(0); })),
               FormatError);
  EXPECT_THROW(harness::parse_checkpoint(mutate([](auto& d) { d["layers"][0]["shape"][0] = 3; })),
               FormatError);
  EXPECT_THROW(
      harness::parse_checkpoint(mutate([](auto& d) { d["layers"][1]["values"].push_back(0.0); })),
      FormatError);
  EXPECT_THROW(harness::parse_checkpoint(mutate([](auto& d) { d.erase("lambda_lag"); })),
               FormatError);

  const fs::path dir = scratch("ckpt_bad");
  harness::write_text(dir / "x.json", "{not json");
  EXPECT_THROW(harness::load_checkpoint(dir / "x.json"), FormatError);
}

// ---------------------------------------------------------------------------
// evaluation

TEST(Evaluate, MetricsFromLogsMatchAnIndependentScan) {
  std::vector<harness::EpisodeLog> logs = {golden_log("collision"), golden_log("clear_a"),
                                           golden_log("clear_b")};
  const harness::EvalMetrics m = harness::metrics_from_logs(logs);
  EXPECT_EQ(m.episodes, 3);

  // collision rate, and travel time over the clean episodes, by hand
  int collided = 0;
  double tt_sum = 0.0;
  int tt_count = 0;
  double lat_sum = 0.0, speed_sum = 0.0;
  int av_rows = 0;
  for (const auto& log : logs) {
    bool hit = false;
    std::map<int, double> arrival;
    std::set<int> avs;
    for (const auto& r : log.rows) {
      if (r.role != sim::Role::kAv) continue;
      avs.insert(r.id);
      if (r.collision != harness::CollisionMark::kNone) hit = true;
      if (r.goal) arrival[r.id] = r.time;
      if (r.step > 0) {
        lat_sum += std::abs(r.a_lat);
        speed_sum += r.v;
        ++av_rows;
      }
    }
    collided += hit ? 1 : 0;
    if (!hit && arrival.size() == avs.size()) {
      double s = 0.0;
      for (const auto& [id, t] : arrival) s += t;
      tt_sum += s / static_cast<double>(arrival.size());
      ++tt_count;
    }
  }
  EXPECT_EQ(collided, 1);
  EXPECT_NEAR(m.collision_rate, 100.0 / 3.0, 1e-12);
  ASSERT_EQ(tt_count, 2);
  ASSERT_TRUE(m.travel_time.has_value());
  EXPECT_NEAR(*m.travel_time, tt_sum / tt_count, 1e-9);
  EXPECT_NEAR(m.avg_lateral_accel, lat_sum / av_rows, 1e-9);
  EXPECT_NEAR(m.avg_speed, speed_sum / av_rows, 1e-9);
}

TEST(Evaluate, LogsReproduceTheReportedMetrics) {
  const harness::Config cfg = tiny_config();
  const auto r = harness::evaluate(nullptr, cfg.env, cgmdp::Scenario::kSvi, {40, 1, false});
  ASSERT_EQ(r.logs.size(), 40u);
  // through the CSV text as well, as plot and replay see it
  std::vector<harness::EpisodeLog> reread;
  for (const auto& log : r.logs) {
    reread.push_back(harness::parse_trajectory_csv(harness::trajectory_csv(log)));
  }
  EXPECT_EQ(harness::metrics_from_logs(reread), r.metrics);
}

TEST(Evaluate, SeededAndDeterministic) {
  const harness::Config cfg = tiny_config();
  auto trained = algo::train(algo::Algo::kDcGppo, cfg.env, cgmdp::Scenario::kSvi, cfg.train);
  const harness::EvalOptions opts{6, 3, false};
  const auto a = harness::evaluate(trained.model.get(), cfg.env, cgmdp::Scenario::kSvi, opts);
  const auto b = harness::evaluate(trained.model.get(), cfg.env, cgmdp::Scenario::kSvi, opts);
  EXPECT_EQ(a.metrics, b.metrics);
  ASSERT_EQ(a.logs.size(), b.logs.size());
  for (std::size_t i = 0; i < a.logs.size(); ++i) {
    EXPECT_EQ(harness::trajectory_csv(a.logs[i]), harness::trajectory_csv(b.logs[i]));
  }
  const auto greedy = harness::evaluate(trained.model.get(), cfg.env, cgmdp::Scenario::kSvi,
                                        {6, 3, true});
  const auto greedy2 = harness::evaluate(trained.model.get(), cfg.env, cgmdp::Scenario::kSvi,
                                         {6, 3, true});
  EXPECT_EQ(greedy.metrics, greedy2.metrics);
}

TEST(Evaluate, BaselineIgnoresAnyPolicy) {
  // with interference off the red team runs its script, so the baseline is a
  // function of the seed alone
  const harness::Config cfg = tiny_config();
  const auto a = harness::evaluate(nullptr, cfg.env, cgmdp::Scenario::kSvi, {5, 2, false});
  const auto b = harness::evaluate(nullptr, cfg.env, cgmdp::Scenario::kSvi, {5, 2, true});
  EXPECT_EQ(a.metrics, b.metrics);
  for (const auto& ep : a.episodes) EXPECT_EQ(ep.mean_cost, 0.0);
}

TEST(Evaluate, RejectsBadRequests) {
  const harness::Config cfg = tiny_config();
  EXPECT_THROW(harness::evaluate(nullptr, cfg.env, cgmdp::Scenario::kSvi, {0, 1, false}),
               std::invalid_argument);
  EXPECT_THROW(harness::evaluate(nullptr, cfg.env, cgmdp::Scenario::kSvi, {-3, 1, false}),
               std::invalid_argument);
  // a flat policy is tied to its vehicle count
  harness::Config flat = tiny_config();
  flat.train.episodes = 0;
  auto ppo = algo::train(algo::Algo::kPpo, flat.env, cgmdp::Scenario::kSvi, flat.train);
  EXPECT_THROW(harness::evaluate(ppo.model.get(), flat.env, cgmdp::Scenario::kMvi, {1, 1, false}),
               FormatError);
}

// ---------------------------------------------------------------------------
// campaign

TEST(Campaign, EmptyAlgorithmListRunsNothing) {
  const harness::Config cfg = tiny_config();
  const fs::path dir = scratch("campaign_empty");
  const std::vector<algo::Algo> algos;
  const std::vector<cgmdp::Scenario> scenarios = {cgmdp::Scenario::kSvi};
  const std::vector<std::uint64_t> seeds = {1, 2};
  const auto m = harness::run_campaign(cfg, algos, scenarios, seeds, dir, 1);
  EXPECT_TRUE(m.runs.empty());
  EXPECT_TRUE(harness::summarize(m).empty());
  EXPECT_TRUE(fs::exists(dir / "manifest.json"));
}

TEST(Campaign, CountsFilesAndSummarizesFromDisk) {
  const harness::Config cfg = tiny_config();
  const fs::path dir = scratch("campaign_one");
  const std::vector<algo::Algo> algos = {algo::Algo::kGppo};
  const std::vector<cgmdp::Scenario> scenarios = {cgmdp::Scenario::kSvi};
  const std::vector<std::uint64_t> seeds = {1, 2};
  const auto m = harness::run_campaign(cfg, algos, scenarios, seeds, dir, 2);

  // two trained cells then the two baseline runs
  ASSERT_EQ(m.runs.size(), 4u);
  EXPECT_EQ(m.runs[0].label, "gppo");
  EXPECT_EQ(m.runs[1].label, "gppo");
  EXPECT_EQ(m.runs[2].label, "baseline");
  EXPECT_EQ(m.runs[3].label, "baseline");
  EXPECT_EQ(m.config_hash, harness::hex64(harness::fnv1a(harness::read_text(dir / "config.json"))));
  EXPECT_EQ(m.code_version, harness::code_version());

  int curve_files = 0;
  int log_files = 0;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (entry.path().filename() == "curves.csv") ++curve_files;
    if (entry.path().parent_path().filename() == "logs") ++log_files;
  }
  EXPECT_EQ(curve_files, 2);
  EXPECT_EQ(log_files, 4 * cfg.campaign.keep_logs);

  const auto rows = harness::summarize(m);
  ASSERT_EQ(rows.size(), 2u);
  const harness::SummaryRow& gppo = rows[0].label == "gppo" ? rows[0] : rows[1];
  EXPECT_EQ(gppo.runs, 2);

  // recompute mean and population std of CR from the per-run metrics files
  std::vector<double> cr;
  for (const auto& run : m.runs) {
    if (run.label != "gppo") continue;
    ASSERT_TRUE(run.ok) << run.error;
    const auto doc = nlohmann::json::parse(harness::read_text(run.dir / "metrics.json"));
    cr.push_back(doc.at("cr").get<double>());
    EXPECT_EQ(doc.at("episodes").get<int>(), cfg.campaign.eval_episodes);
  }
  ASSERT_EQ(cr.size(), 2u);
  const double mean = 0.5 * (cr[0] + cr[1]);
  const double sd = std::sqrt(0.5 * ((cr[0] - mean) * (cr[0] - mean) + (cr[1] - mean) * (cr[1] - mean)));
  EXPECT_NEAR(gppo.cr_mean, mean, 1e-12);
  EXPECT_NEAR(gppo.cr_std, sd, 1e-12);

  const std::string csv = harness::read_text(dir / "summary.csv");
  EXPECT_EQ(csv, harness::summary_csv(rows));
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);

  const auto manifest = nlohmann::json::parse(harness::read_text(dir / "manifest.json"));
  EXPECT_EQ(manifest.at("runs").size(), 4u);
}

TEST(Campaign, SameInputsSameBytes) {
  const harness::Config cfg = tiny_config();
  const std::vector<algo::Algo> algos = {algo::Algo::kDcGppo};
  const std::vector<cgmdp::Scenario> scenarios = {cgmdp::Scenario::kSvi};
  const std::vector<std::uint64_t> seeds = {4};
  const fs::path a = scratch("campaign_a");
  const fs::path b = scratch("campaign_b");
  harness::run_campaign(cfg, algos, scenarios, seeds, a, 1);
  harness::run_campaign(cfg, algos, scenarios, seeds, b, 2);
  for (const char* f : {"summary.csv", "config.json"}) {
    EXPECT_EQ(harness::read_text(a / f), harness::read_text(b / f)) << f;
  }
  const fs::path cell = "dc-gppo_svi_seed4";
  for (const char* f : {"curves.csv", "checkpoint.json", "metrics.json"}) {
    EXPECT_EQ(harness::read_text(a / cell / f), harness::read_text(b / cell / f)) << f;
  }
}

// ---------------------------------------------------------------------------
// plots

TEST(Plots, TrajectorySvgMatchesGolden) {
  const sim::WorldConfig world;
  expect_golden("traj_collision.svg",
                harness::trajectory_svg(golden_log("collision"), world, "collision"));
  expect_golden("traj_clear.svg", harness::trajectory_svg(golden_log("clear_a"), world, "clear"));
}

TEST(Plots, CollisionMarkersOnlyWhereThereIsAContact) {
  const sim::WorldConfig world;
  const std::string hit = harness::trajectory_svg(golden_log("collision"), world, "t");
  const std::string clear = harness::trajectory_svg(golden_log("clear_b"), world, "t");
  EXPECT_EQ(clear.find("<circle"), std::string::npos);
  std::size_t circles = 0;
  for (std::size_t p = hit.find("<circle"); p != std::string::npos; p = hit.find("<circle", p + 1)) {
    ++circles;
  }
  EXPECT_EQ(circles, 2u);
}

TEST(Plots, RewardCurveBandAndGolden) {
  std::vector<std::vector<algo::EpisodeRecord>> runs(3);
  for (int s = 0; s < 3; ++s) {
    for (int e = 0; e < 12 + s; ++e) {
      runs[s].push_back({e, 0.0, 0.05 * e + 0.1 * s, 0.0, false, 0.0});
    }
  }
  const auto series = harness::aggregate_curves("dc-gppo", runs);
  ASSERT_EQ(series.mean.size(), 12u);
  const double sd = std::sqrt(((0.1 * 0.1) + 0.0 + (0.1 * 0.1)) / 3.0);
  for (std::size_t e = 0; e < 12; ++e) {
    EXPECT_NEAR(series.mean[e], 0.05 * e + 0.1, 1e-12);
    EXPECT_NEAR(series.std[e], sd, 1e-12);
  }
  const std::vector<harness::CurveSeries> both = {series,
                                                  harness::aggregate_curves("gppo", {&runs[0], 1})};
  // one run: zero-width band
  for (double v : both[1].std) EXPECT_EQ(v, 0.0);
  expect_golden("reward.svg", harness::reward_curve_svg(both, "svi"));
}

TEST(Plots, EmitPlotsFindsRunsAndRejectsEmptyDirs) {
  const fs::path run = scratch("plots_in");
  const fs::path out = scratch("plots_out");
  EXPECT_THROW(harness::emit_plots(run, out), FormatError);

  std::vector<algo::EpisodeRecord> curves;
  for (int e = 0; e < 5; ++e) curves.push_back({e, 0.0, 0.2 * e, 0.0, false, 0.0});
  for (int seed : {1, 2}) {
    const fs::path cell = run / ("gppo_svi_seed" + std::to_string(seed));
    fs::create_directories(cell / "logs");
    harness::write_curves_csv(cell / "curves.csv", curves);
    harness::write_trajectory_csv(cell / "logs" / "episode_000.csv", golden_log("clear_a"));
  }
  const auto written = harness::emit_plots(run, out);
  std::set<std::string> names;
  for (const auto& p : written) {
    EXPECT_TRUE(fs::exists(p)) << p;
    names.insert(p.filename().string());
  }
  EXPECT_TRUE(names.count("reward_svi.svg"));
  EXPECT_TRUE(names.count("traj_gppo_svi_seed1_episode_000.svg"));
  EXPECT_TRUE(names.count("traj_gppo_svi_seed2_episode_000.svg"));
  EXPECT_EQ(names.size(), 3u);
}

// ---------------------------------------------------------------------------
// replay

TEST(Replay, EmptyLogPrintsOnlyTheSummary) {
  std::ostringstream out;
  const auto s = harness::replay({}, out);
  EXPECT_EQ(s.steps, 0);
  EXPECT_FALSE(s.collision_step.has_value());
  EXPECT_EQ(out.str().find("step "), std::string::npos);
  EXPECT_NE(out.str().find("no collision"), std::string::npos);
}

TEST(Replay, ReportsCollisionStepAndStriker) {
  const harness::EpisodeLog log = golden_log("collision");
  std::ostringstream out;
  const auto s = harness::replay(log, out);
  ASSERT_TRUE(s.collision_step.has_value());
  EXPECT_EQ(*s.collision_step, 75);
  EXPECT_EQ(s.striker_id, 0);
  EXPECT_EQ(s.struck_id, 1);
  EXPECT_EQ(s.steps, 75);
  EXPECT_NE(out.str().find("collision at step 75: striker 0, struck 1"), std::string::npos);
  EXPECT_NEAR(s.metrics.collision_rate, 100.0, 1e-12);
  // one frame per logged step, each with a row per lane
  std::size_t frames = 0;
  for (std::size_t p = out.str().find("step "); p != std::string::npos;
       p = out.str().find("\nstep ", p + 1)) {
    ++frames;
  }
  EXPECT_EQ(frames, 76u);
  EXPECT_NE(out.str().find('X'), std::string::npos);
}
