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

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <system_error>

#include "rtmarl/harness.hpp"

namespace rtmarl::harness {

using json = nlohmann::json;

namespace {

// shortest text that reads back to the same double
std::string num(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, int line, const char* column) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw FormatError("line " + std::to_string(line) + ": bad " + column + " '" + s + "'");
  }
  return v;
}

long long parse_int(const std::string& s, int line, const char* column) {
  long long v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw FormatError("line " + std::to_string(line) + ": bad " + column + " '" + s + "'");
  }
  return v;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

constexpr const char* kTrajectoryHeader =
    "step,time,id,role,x,y,theta,v,a_lon,a_lat,lane,collision,goal";
constexpr const char* kCurvesHeader = "episode,reward,normalized_reward,cost,collision,lambda";

}  // namespace

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return text.str();
}

std::string trajectory_csv(const EpisodeLog& log) {
  std::string out = std::string(kTrajectoryHeader) + "\n";
  for (const auto& r : log.rows) {
    out += std::to_string(r.step) + "," + num(r.time) + "," + std::to_string(r.id) + "," +
           std::string(sim::role_name(r.role)) + "," + num(r.x) + "," + num(r.y) + "," +
           num(r.theta) + "," + num(r.v) + "," + num(r.a_lon) + "," + num(r.a_lat) + "," +
           std::to_string(r.lane) + "," + std::to_string(static_cast<int>(r.collision)) + "," +
           (r.goal ? "1" : "0") + "\n";
  }
  return out;
}

EpisodeLog parse_trajectory_csv(const std::string& text) {
  EpisodeLog log;
  const auto lines = lines_of(text);
  if (lines.empty()) return log;
  if (lines[0] != kTrajectoryHeader) throw FormatError("line 1: unexpected trajectory header");
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const int ln = static_cast<int>(i) + 1;
    if (lines[i].empty()) continue;
    const auto c = split(lines[i]);
    if (c.size() != 13) {
      throw FormatError("line " + std::to_string(ln) + ": expected 13 columns, got " +
                        std::to_string(c.size()));
    }
    TrajectoryRow r;
    r.step = static_cast<int>(parse_int(c[0], ln, "step"));
    r.time = parse_double(c[1], ln, "time");
    r.id = static_cast<int>(parse_int(c[2], ln, "id"));
    try {
      r.role = sim::role_from_name(c[3]);
    } catch (const std::invalid_argument&) {
      throw FormatError("line " + std::to_string(ln) + ": bad role '" + c[3] + "'");
    }
    r.x = parse_double(c[4], ln, "x");
    r.y = parse_double(c[5], ln, "y");
    r.theta = parse_double(c[6], ln, "theta");
    r.v = parse_double(c[7], ln, "v");
    r.a_lon = parse_double(c[8], ln, "a_lon");
    r.a_lat = parse_double(c[9], ln, "a_lat");
    r.lane = static_cast<int>(parse_int(c[10], ln, "lane"));
    const auto mark = parse_int(c[11], ln, "collision");
    if (mark < 0 || mark > 2) throw FormatError("line " + std::to_string(ln) + ": bad collision mark");
    r.collision = static_cast<CollisionMark>(mark);
    const auto goal = parse_int(c[12], ln, "goal");
    if (goal != 0 && goal != 1) throw FormatError("line " + std::to_string(ln) + ": bad goal flag");
    r.goal = goal == 1;
    log.rows.push_back(r);
  }
  return log;
}

void write_trajectory_csv(const std::filesystem::path& path, const EpisodeLog& log) {
  write_text(path, trajectory_csv(log));
}

EpisodeLog read_trajectory_csv(const std::filesystem::path& path) {
  try {
    return parse_trajectory_csv(read_text(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::string curves_csv(std::span<const algo::EpisodeRecord> curves) {
  std::string out = std::string(kCurvesHeader) + "\n";
  for (const auto& r : curves) {
    out += std::to_string(r.episode) + "," + num(r.reward) + "," + num(r.normalized_reward) + "," +
           num(r.cost) + "," + (r.collision ? "1" : "0") + "," + num(r.lambda) + "\n";
  }
  return out;
}

std::vector<algo::EpisodeRecord> parse_curves_csv(const std::string& text) {
  std::vector<algo::EpisodeRecord> out;
  const auto lines = lines_of(text);
  if (lines.empty()) return out;
  if (lines[0] != kCurvesHeader) throw FormatError("line 1: unexpected curves header");
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const int ln = static_cast<int>(i) + 1;
    if (lines[i].empty()) continue;
    const auto c = split(lines[i]);
    if (c.size() != 6) {
      throw FormatError("line " + std::to_string(ln) + ": expected 6 columns, got " +
                        std::to_string(c.size()));
    }
    algo::EpisodeRecord r;
    r.episode = static_cast<int>(parse_int(c[0], ln, "episode"));
    r.reward = parse_double(c[1], ln, "reward");
    r.normalized_reward = parse_double(c[2], ln, "normalized_reward");
    r.cost = parse_double(c[3], ln, "cost");
    r.collision = parse_int(c[4], ln, "collision") != 0;
    r.lambda = parse_double(c[5], ln, "lambda");
    out.push_back(r);
  }
  return out;
}

void write_curves_csv(const std::filesystem::path& path,
                      std::span<const algo::EpisodeRecord> curves) {
  write_text(path, curves_csv(curves));
}

std::vector<algo::EpisodeRecord> read_curves_csv(const std::filesystem::path& path) {
  try {
    return parse_curves_csv(read_text(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

json metrics_json(const EvalMetrics& m, std::uint64_t seed, std::string_view algo,
                  cgmdp::Scenario scenario) {
  json doc;
  doc["cr"] = m.collision_rate;
  doc["tt"] = m.travel_time ? json(*m.travel_time) : json(nullptr);
  doc["ala"] = m.avg_lateral_accel;
  doc["as"] = m.avg_speed;
  doc["episodes"] = m.episodes;
  doc["seed"] = seed;
  doc["algo"] = std::string(algo);
  doc["scenario"] = std::string(cgmdp::scenario_name(scenario));
  return doc;
}

// ---------------------------------------------------------------------------

namespace {

std::string encoder_name(nn::EncoderKind kind) {
  return kind == nn::EncoderKind::kGraph ? "graph" : "flat";
}

}  // namespace

json checkpoint_json(const algo::RedTeamModel& model, cgmdp::Scenario scenario,
                     const Config& cfg) {
  json doc;
  doc["format_version"] = kCheckpointFormat;
  doc["algo"] = std::string(algo::algo_name(model.algo()));
  doc["scenario"] = std::string(cgmdp::scenario_name(scenario));
  const auto& s = model.shape();
  doc["model"] = {{"encoder", encoder_name(s.encoder)},
                  {"features", s.features},
                  {"hidden", s.hidden},
                  {"actions", s.actions},
                  {"nodes", s.nodes}};
  doc["config"] = config_to_json(cfg);
  doc["lambda_lag"] = model.lambda_lag();
  json layers = json::array();
  for (const nn::LayerParams* p : model.layers()) {
    layers.push_back({{"name", p->name + ".weight"},
                      {"shape", {p->weight.rows(), p->weight.cols()}},
                      {"values", p->weight.data()}});
    layers.push_back(
        {{"name", p->name + ".bias"}, {"shape", {p->bias.size()}}, {"values", p->bias}});
  }
  doc["layers"] = layers;
  return doc;
}

void save_checkpoint(const std::filesystem::path& path, const algo::RedTeamModel& model,
                     cgmdp::Scenario scenario, const Config& cfg) {
  write_text(path, checkpoint_json(model, scenario, cfg).dump() + "\n");
}

Checkpoint parse_checkpoint(const json& doc) {
  try {
    if (!doc.is_object()) throw FormatError("checkpoint: expected an object");
    const int version = doc.at("format_version").get<int>();
    if (version != kCheckpointFormat) {
      throw FormatError("checkpoint: format_version " + std::to_string(version) +
                        " is not supported (expected " + std::to_string(kCheckpointFormat) + ")");
    }
    Checkpoint ck;
    const algo::Algo a = algo::algo_from_name(doc.at("algo").get<std::string>());
    ck.scenario = cgmdp::scenario_from_name(doc.at("scenario").get<std::string>());
    const json& m = doc.at("model");
    nn::ModelShape shape;
    const std::string enc = m.at("encoder").get<std::string>();
    if (enc != "graph" && enc != "flat") throw FormatError("checkpoint: unknown encoder " + enc);
    shape.encoder = enc == "graph" ? nn::EncoderKind::kGraph : nn::EncoderKind::kFlat;
    shape.features = m.at("features").get<int>();
    shape.hidden = m.at("hidden").get<int>();
    shape.actions = m.at("actions").get<int>();
    shape.nodes = m.at("nodes").get<int>();
    const nn::ModelShape expected = algo::model_shape(a, ck.scenario, shape.hidden);
    if (!(shape == expected)) throw FormatError("checkpoint: model header does not match algorithm");
    ck.model = std::make_unique<algo::RedTeamModel>(a, shape, 0);
    ck.model->set_lambda_lag(doc.at("lambda_lag").get<double>());
    ck.config = doc.at("config");

    const json& layers = doc.at("layers");
    auto params = ck.model->layers();
    if (layers.size() != 2 * params.size()) {
      throw FormatError("checkpoint: expected " + std::to_string(2 * params.size()) +
                        " tensors, found " + std::to_string(layers.size()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      nn::LayerParams& p = *params[i];
      const json& w = layers[2 * i];
      const json& b = layers[2 * i + 1];
      if (w.at("name") != p.name + ".weight" || b.at("name") != p.name + ".bias") {
        throw FormatError("checkpoint: tensor order mismatch at layer " + p.name);
      }
      const auto ws = w.at("shape").get<std::vector<std::size_t>>();
      const auto bs = b.at("shape").get<std::vector<std::size_t>>();
      if (ws != std::vector<std::size_t>{p.weight.rows(), p.weight.cols()} ||
          bs != std::vector<std::size_t>{p.bias.size()}) {
        throw FormatError("checkpoint: shape mismatch in layer " + p.name);
      }
      auto wv = w.at("values").get<std::vector<double>>();
      auto bv = b.at("values").get<std::vector<double>>();
      if (wv.size() != p.weight.size() || bv.size() != p.bias.size()) {
        throw FormatError("checkpoint: value count mismatch in layer " + p.name);
      }
      p.weight.data() = std::move(wv);
      p.bias = std::move(bv);
    }
    return ck;
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  }
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  json doc;
  try {
    doc = json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw FormatError(path.string() + ": invalid JSON: " + e.what());
  }
  try {
    return parse_checkpoint(doc);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace rtmarl::harness
