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

#ifndef RTMARL_CONFIG_HPP_
#define RTMARL_CONFIG_HPP_

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "rtmarl/algo.hpp"
#include "rtmarl/cgmdp.hpp"

namespace rtmarl::harness {

/// Malformed, unknown or out-of-range configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CampaignConfig {
  std::vector<algo::Algo> algos = {algo::Algo::kPpo, algo::Algo::kGd3qn, algo::Algo::kGppo,
                                   algo::Algo::kDcGppo};
  std::vector<cgmdp::Scenario> scenarios = {cgmdp::Scenario::kSvi, cgmdp::Scenario::kMvi};
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  int eval_episodes = 100;
  /// Argmax actions at evaluation instead of seeded sampling.
  bool greedy_eval = false;
  /// Trajectory logs kept per evaluated run (all when negative).
  int keep_logs = 10;

  bool operator==(const CampaignConfig&) const = default;
};

struct Config {
  cgmdp::EnvConfig env;
  algo::TrainConfig train;
  CampaignConfig campaign;
};

/// Fails closed: unknown sections or keys, wrong types and invalid values
/// all raise ConfigError. Missing keys keep their defaults.
Config parse_config(const nlohmann::json& doc);
Config parse_config_text(std::string_view text);
Config load_config(const std::filesystem::path& path);

/// Every field, defaults included.
nlohmann::json config_to_json(const Config& cfg);
/// Canonical byte stream hashed by config_hash.
std::string serialize_config(const Config& cfg);
std::uint64_t config_hash(const Config& cfg);

std::uint64_t fnv1a(std::string_view bytes);
std::string hex64(std::uint64_t value);

}  // namespace rtmarl::harness

#endif  // RTMARL_CONFIG_HPP_
