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

#ifndef RTMARL_HARNESS_HPP_
#define RTMARL_HARNESS_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "rtmarl/algo.hpp"
#include "rtmarl/config.hpp"

namespace rtmarl::harness {

/// Malformed or mismatched artifact on disk.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EvalMetrics {
  /// Percent of episodes with any AV collision.
  double collision_rate = 0.0;
  /// Mean seconds to the goal line over episodes without a collision in
  /// which every AV arrived; absent when there are none.
  std::optional<double> travel_time;
  /// Mean |a_lat| of the AVs over every simulated step.
  double avg_lateral_accel = 0.0;
  /// Mean AV speed over every simulated step.
  double avg_speed = 0.0;
  int episodes = 0;

  bool operator==(const EvalMetrics&) const = default;
};

enum class CollisionMark { kNone = 0, kStruck = 1, kStriker = 2 };

/// One vehicle at one step; step 0 is the state after reset.
struct TrajectoryRow {
  int step = 0;
  double time = 0.0;
  int id = 0;
  sim::Role role = sim::Role::kHv;
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;
  double v = 0.0;
  double a_lon = 0.0;
  double a_lat = 0.0;
  int lane = 0;
  CollisionMark collision = CollisionMark::kNone;
  /// Set on the step an AV crosses the goal line.
  bool goal = false;

  bool operator==(const TrajectoryRow&) const = default;
};

struct EpisodeLog {
  std::vector<TrajectoryRow> rows;
};

struct EpisodeSummary {
  bool av_collision = false;
  int collision_step = -1;
  int striker_id = -1;
  int struck_id = -1;
  bool red_striker = false;
  int steps = 0;
  /// Mean per-step cost over red-team agents; 0 for the baseline.
  double mean_cost = 0.0;
  /// Seconds from reset to the collision, when there was one.
  std::optional<double> time_to_collision;
};

struct EvalOptions {
  int episodes = 100;
  std::uint64_t seed = 0;
  bool greedy = false;
};

struct EvalResult {
  EvalMetrics metrics;
  std::vector<EpisodeSummary> episodes;
  std::vector<EpisodeLog> logs;
};

/// Runs the red-team policy, or with model == nullptr the no-interference
/// baseline, for opts.episodes episodes. Episode e uses environment seed
/// derive_seed(opts.seed, kEvalStream, e).
EvalResult evaluate(const algo::RedTeamModel* model, const cgmdp::EnvConfig& env_cfg,
                    cgmdp::Scenario scenario, const EvalOptions& opts);

/// Recomputes the metrics from trajectory logs alone.
EvalMetrics metrics_from_logs(std::span<const EpisodeLog> logs);

std::string trajectory_csv(const EpisodeLog& log);
EpisodeLog parse_trajectory_csv(const std::string& text);
void write_trajectory_csv(const std::filesystem::path& path, const EpisodeLog& log);
EpisodeLog read_trajectory_csv(const std::filesystem::path& path);

std::string curves_csv(std::span<const algo::EpisodeRecord> curves);
std::vector<algo::EpisodeRecord> parse_curves_csv(const std::string& text);
void write_curves_csv(const std::filesystem::path& path,
                      std::span<const algo::EpisodeRecord> curves);
std::vector<algo::EpisodeRecord> read_curves_csv(const std::filesystem::path& path);

nlohmann::json metrics_json(const EvalMetrics& m, std::uint64_t seed, std::string_view algo,
                            cgmdp::Scenario scenario);

inline constexpr int kCheckpointFormat = 1;

struct Checkpoint {
  std::unique_ptr<algo::RedTeamModel> model;
  cgmdp::Scenario scenario = cgmdp::Scenario::kSvi;
  nlohmann::json config;
};

nlohmann::json checkpoint_json(const algo::RedTeamModel& model, cgmdp::Scenario scenario,
                               const Config& cfg);
void save_checkpoint(const std::filesystem::path& path, const algo::RedTeamModel& model,
                     cgmdp::Scenario scenario, const Config& cfg);
/// Throws FormatError on a wrong format_version, unknown algorithm, or any
/// layer whose name or shape differs from the model the header describes.
Checkpoint parse_checkpoint(const nlohmann::json& doc);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Writes text atomically enough for our purposes (whole file, binary mode).
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

struct RunRecord {
  /// Algorithm tag, or "baseline" for the no-interference runs.
  std::string label;
  cgmdp::Scenario scenario = cgmdp::Scenario::kSvi;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  std::filesystem::path dir;
  EvalMetrics metrics;
  double eval_cost = 0.0;
  /// Mean normalized reward over the last 100 training episodes.
  double final_normalized_reward = 0.0;
};

struct RunManifest {
  std::vector<algo::Algo> algos;
  std::vector<cgmdp::Scenario> scenarios;
  std::vector<std::uint64_t> seeds;
  std::string config_hash;
  std::string code_version;
  std::filesystem::path out_dir;
  /// Trained cells in (algo, scenario, seed) order, then one SVI baseline
  /// run per seed when SVI is requested.
  std::vector<RunRecord> runs;

  nlohmann::json to_json() const;
};

struct SummaryRow {
  std::string label;
  cgmdp::Scenario scenario = cgmdp::Scenario::kSvi;
  int runs = 0;
  double cr_mean = 0.0, cr_std = 0.0;
  double tt_mean = 0.0, tt_std = 0.0;
  double ala_mean = 0.0, ala_std = 0.0;
  double as_mean = 0.0, as_std = 0.0;
};

/// One row per (algorithm, scenario) over the successful runs; population
/// standard deviation over seeds.
std::vector<SummaryRow> summarize(const RunManifest& manifest);
std::string summary_csv(std::span<const SummaryRow> rows);

using LogFn = std::function<void(const std::string&)>;

/// Trains and evaluates every (algo, scenario, seed) cell into out_dir.
/// Cells run on up to `threads` threads (0: RTMARL_THREADS or core count);
/// each cell is single-threaded so results do not depend on scheduling.
/// A failing cell is recorded and the campaign continues.
RunManifest run_campaign(const Config& cfg, std::span<const algo::Algo> algos,
                         std::span<const cgmdp::Scenario> scenarios,
                         std::span<const std::uint64_t> seeds,
                         const std::filesystem::path& out_dir, int threads = 0,
                         const LogFn& log = {});

struct CurveSeries {
  std::string label;
  std::vector<double> mean;
  std::vector<double> std;
};

/// Mean and population std across runs, truncated to the shortest run.
CurveSeries aggregate_curves(std::string label,
                             std::span<const std::vector<algo::EpisodeRecord>> runs);
std::string reward_curve_svg(std::span<const CurveSeries> series, const std::string& title);
std::string trajectory_svg(const EpisodeLog& log, const sim::WorldConfig& world,
                           const std::string& title);

/// Finds curves.csv and logs/*.csv under run_dir and writes SVGs to out_dir.
/// Returns the files written; throws FormatError when nothing is found.
std::vector<std::filesystem::path> emit_plots(const std::filesystem::path& run_dir,
                                              const std::filesystem::path& out_dir,
                                              const sim::WorldConfig& world = {},
                                              int max_trajectories_per_run = 5);

struct ReplaySummary {
  int steps = 0;
  std::optional<int> collision_step;
  int striker_id = -1;
  int struck_id = -1;
  EvalMetrics metrics;
};

/// Prints a lane diagram per step, then the summary.
ReplaySummary replay(const EpisodeLog& log, std::ostream& out, const sim::WorldConfig& world = {});

std::string code_version();

}  // namespace rtmarl::harness

#endif  // RTMARL_HARNESS_HPP_
