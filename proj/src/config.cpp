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

#include "rtmarl/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <variant>

namespace rtmarl::harness {

namespace {

using json = nlohmann::json;
using FieldPtr = std::variant<double*, int*, std::uint64_t*, bool*>;

struct Field {
  const char* key;
  FieldPtr ptr;
};

struct Section {
  const char* name;
  std::vector<Field> fields;
};

std::vector<Section> sections(Config& c) {
  auto& w = c.env.world;
  auto& s = c.env.scenario;
  auto& r = c.env.reward;
  auto& k = c.env.cost;
  auto& t = c.env.threat;
  auto& o = c.env.omega;
  auto& a = c.env.av;
  auto& i = c.env.idm;
  auto& tr = c.train;
  return {
      {"world",
       {{"lane_count", &w.lane_count},
        {"lane_width", &w.lane_width},
        {"road_length", &w.road_length},
        {"goal_y", &w.goal_y},
        {"dt", &w.dt},
        {"v_max", &w.v_max},
        {"a_max", &w.a_max},
        {"delta_max", &w.delta_max},
        {"theta_max", &w.theta_max},
        {"wheelbase", &w.wheelbase},
        {"vehicle_length", &w.vehicle_length},
        {"vehicle_width", &w.vehicle_width},
        {"sensing_range", &w.sensing_range}}},
      {"scenario",
       {{"horizon", &s.horizon},
        {"position_jitter", &s.position_jitter},
        {"speed_jitter", &s.speed_jitter},
        {"lead_brake_onset_min", &s.lead_brake_onset_min},
        {"lead_brake_onset_max", &s.lead_brake_onset_max},
        {"lead_brake_decel", &s.lead_brake_decel}}},
      {"reward_weights",
       {{"w_col", &r.w_col}, {"w_dan", &r.w_dan}, {"w_vel", &r.w_vel}, {"w_com", &r.w_com}}},
      {"cost_weights", {{"w_int", &k.w_int}}},
      {"constants",
       {{"c0", &r.c0},
        {"c1", &k.c1},
        {"d_safe", &r.d_safe},
        {"ttc_threshold", &w.ttc_threshold},
        {"k", &k.k},
        {"w_ttc", &k.w_ttc},
        {"w_ptz", &r.w_ptz},
        {"response_accel", &k.response_accel},
        {"response_steer", &k.response_steer},
        {"lane_change_heading", &k.lane_change_heading}}},
      {"threat", {{"accel_scale", &t.accel_scale}, {"heading_scale", &t.heading_scale}}},
      {"omega",
       {{"horizon_steps", &o.horizon_steps},
        {"lane_change_clearance", &o.lane_change_clearance},
        {"safety_margin", &o.safety_margin}}},
      {"av",
       {{"ttc_brake", &a.ttc_brake},
        {"ttc_evade", &a.ttc_evade},
        {"gap_required", &a.gap_required},
        {"brake_decel", &a.brake_decel},
        {"cruise_speed", &a.cruise_speed},
        {"cruise_gain", &a.cruise_gain},
        {"cruise_accel_limit", &a.cruise_accel_limit},
        {"lateral_gain", &a.lateral_gain},
        {"heading_gain", &a.heading_gain},
        {"lane_change_tolerance", &a.lane_change_tolerance}}},
      {"idm",
       {{"time_headway", &i.time_headway},
        {"min_gap", &i.min_gap},
        {"accel", &i.accel},
        {"comfortable_decel", &i.comfortable_decel},
        {"exponent", &i.exponent},
        {"lateral_gain", &i.lateral_gain},
        {"heading_gain", &i.heading_gain}}},
      {"train",
       {{"episodes", &tr.episodes},
        {"batch_size", &tr.batch_size},
        {"gamma", &tr.gamma},
        {"lr", &tr.lr},
        {"gae_lambda", &tr.gae_lambda},
        {"clip_eps", &tr.clip_eps},
        {"epochs_per_update", &tr.epochs_per_update},
        {"minibatch_size", &tr.minibatch_size},
        {"entropy_coef", &tr.entropy_coef},
        {"value_coef", &tr.value_coef},
        {"max_grad_norm", &tr.max_grad_norm},
        {"hidden", &tr.hidden},
        {"cost_limit", &tr.cost_limit},
        {"lambda_lr", &tr.lambda_lr},
        {"lambda_init", &tr.lambda_init},
        {"eps_greedy_start", &tr.eps_greedy_start},
        {"eps_greedy_end", &tr.eps_greedy_end},
        {"replay_capacity", &tr.replay_capacity},
        {"target_sync", &tr.target_sync},
        {"dqn_batch", &tr.dqn_batch},
        {"dqn_update_every", &tr.dqn_update_every},
        {"seed", &tr.seed},
        {"threads", &tr.threads}}},
      {"campaign",
       {{"eval_episodes", &c.campaign.eval_episodes},
        {"greedy_eval", &c.campaign.greedy_eval},
        {"keep_logs", &c.campaign.keep_logs}}},
  };
}

std::string where(const char* section, const std::string& key) {
  return std::string(section) + "." + key;
}

void read_field(const json& value, const Field& f, const char* section) {
  const std::string path = where(section, f.key);
  std::visit(
      [&](auto* target) {
        using T = std::remove_pointer_t<decltype(target)>;
        if constexpr (std::is_same_v<T, bool>) {
          if (!value.is_boolean()) throw ConfigError(path + ": expected a boolean");
          *target = value.get<bool>();
        } else if constexpr (std::is_same_v<T, double>) {
          if (!value.is_number()) throw ConfigError(path + ": expected a number");
          *target = value.get<double>();
          if (!std::isfinite(*target)) throw ConfigError(path + ": must be finite");
        } else if constexpr (std::is_same_v<T, int>) {
          if (!value.is_number_integer()) throw ConfigError(path + ": expected an integer");
          const auto v = value.get<std::int64_t>();
          if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
            throw ConfigError(path + ": integer out of range");
          }
          *target = static_cast<int>(v);
        } else {
          if (!value.is_number_unsigned()) {
            throw ConfigError(path + ": expected a non-negative integer");
          }
          *target = value.get<std::uint64_t>();
        }
      },
      f.ptr);
}

json field_json(const Field& f) {
  return std::visit([](auto* target) { return json(*target); }, f.ptr);
}

template <typename T, typename Parse>
std::vector<T> read_list(const json& value, const std::string& path, Parse parse) {
  if (!value.is_array()) throw ConfigError(path + ": expected an array");
  std::vector<T> out;
  for (const auto& item : value) out.push_back(parse(item));
  return out;
}

}  // namespace

Config parse_config(const json& doc) {
  if (!doc.is_object()) throw ConfigError("config: top level must be an object");
  Config cfg;
  auto table = sections(cfg);
  for (const auto& [name, body] : doc.items()) {
    const Section* section = nullptr;
    for (const auto& s : table) {
      if (name == s.name) section = &s;
    }
    if (section == nullptr) throw ConfigError("config: unknown section '" + name + "'");
    if (!body.is_object()) throw ConfigError(name + ": expected an object");
    for (const auto& [key, value] : body.items()) {
      if (name == "campaign" && key == "algos") {
        cfg.campaign.algos = read_list<algo::Algo>(value, "campaign.algos", [](const json& v) {
          if (!v.is_string()) throw ConfigError("campaign.algos: expected strings");
          try {
            return algo::algo_from_name(v.get<std::string>());
          } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("campaign.algos: ") + e.what());
          }
        });
        continue;
      }
      if (name == "campaign" && key == "scenarios") {
        cfg.campaign.scenarios =
            read_list<cgmdp::Scenario>(value, "campaign.scenarios", [](const json& v) {
              if (!v.is_string()) throw ConfigError("campaign.scenarios: expected strings");
              try {
                return cgmdp::scenario_from_name(v.get<std::string>());
              } catch (const std::invalid_argument& e) {
                throw ConfigError(std::string("campaign.scenarios: ") + e.what());
              }
            });
        continue;
      }
      if (name == "campaign" && key == "seeds") {
        cfg.campaign.seeds = read_list<std::uint64_t>(value, "campaign.seeds", [](const json& v) {
          if (!v.is_number_unsigned()) throw ConfigError("campaign.seeds: expected non-negative integers");
          return v.get<std::uint64_t>();
        });
        continue;
      }
      const Field* field = nullptr;
      for (const auto& f : section->fields) {
        if (key == f.key) field = &f;
      }
      if (field == nullptr) throw ConfigError("config: unknown key '" + where(section->name, key) + "'");
      read_field(value, *field, section->name);
    }
  }
  try {
    cfg.env.validate();
    cfg.train.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (cfg.campaign.eval_episodes <= 0) throw ConfigError("campaign.eval_episodes must be positive");
  return cfg;
}

Config parse_config_text(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  return parse_config(doc);
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  try {
    return parse_config_text(text.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

json config_to_json(const Config& cfg) {
  Config copy = cfg;
  json doc = json::object();
  for (const auto& s : sections(copy)) {
    json body = json::object();
    for (const auto& f : s.fields) body[f.key] = field_json(f);
    doc[s.name] = body;
  }
  json algos = json::array();
  for (auto a : cfg.campaign.algos) algos.push_back(std::string(algo::algo_name(a)));
  json scenarios = json::array();
  for (auto s : cfg.campaign.scenarios) scenarios.push_back(std::string(cgmdp::scenario_name(s)));
  doc["campaign"]["algos"] = algos;
  doc["campaign"]["scenarios"] = scenarios;
  doc["campaign"]["seeds"] = cfg.campaign.seeds;
  return doc;
}

std::string serialize_config(const Config& cfg) { return config_to_json(cfg).dump(2) + "\n"; }

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t config_hash(const Config& cfg) { return fnv1a(serialize_config(cfg)); }

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

}  // namespace rtmarl::harness
