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

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>

#include "rtmarl/harness.hpp"

namespace py = pybind11;
using namespace rtmarl;

namespace {

py::array_t<double> to_array(const nn::Tensor2& t) {
  py::array_t<double> out({t.rows(), t.cols()});
  auto view = out.mutable_unchecked<2>();
  for (std::size_t r = 0; r < t.rows(); ++r) {
    for (std::size_t c = 0; c < t.cols(); ++c) view(r, c) = t(r, c);
  }
  return out;
}

py::dict graph_dict(const cgmdp::GraphState& g) {
  py::dict d;
  d["node_features"] = to_array(g.node_features);
  d["adjacency"] = to_array(g.adjacency);
  d["mask"] = g.mask;
  d["ids"] = g.ids;
  return d;
}

py::dict metrics_dict(const harness::EvalMetrics& m) {
  py::dict d;
  d["cr"] = m.collision_rate;
  d["tt"] = m.travel_time ? py::object(py::float_(*m.travel_time)) : py::none();
  d["ala"] = m.avg_lateral_accel;
  d["as"] = m.avg_speed;
  d["episodes"] = m.episodes;
  return d;
}

harness::Config config_from(const std::string& text) {
  return text.empty() ? harness::Config{} : harness::parse_config_text(text);
}

std::vector<std::vector<int>> masks_of(const cgmdp::Environment& env) {
  std::vector<std::vector<int>> out;
  for (const auto& m : env.legal_masks()) out.emplace_back(m.legal.begin(), m.legal.end());
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Red-team scenario generation core";

  py::register_exception<harness::ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<harness::FormatError>(m, "FormatError", PyExc_ValueError);
  py::register_exception<cgmdp::IllegalActionError>(m, "IllegalActionError", PyExc_ValueError);

  py::enum_<sim::Role>(m, "Role")
      .value("AV", sim::Role::kAv)
      .value("RED_TEAM", sim::Role::kRedTeam)
      .value("HV", sim::Role::kHv);

  py::class_<sim::VehicleState>(m, "VehicleState")
      .def(py::init<>())
      .def_readwrite("id", &sim::VehicleState::id)
      .def_readwrite("role", &sim::VehicleState::role)
      .def_readwrite("x", &sim::VehicleState::x)
      .def_readwrite("y", &sim::VehicleState::y)
      .def_readwrite("theta", &sim::VehicleState::theta)
      .def_readwrite("v", &sim::VehicleState::v)
      .def_readwrite("lane", &sim::VehicleState::lane)
      .def_readwrite("length", &sim::VehicleState::length)
      .def_readwrite("width", &sim::VehicleState::width)
      .def_readwrite("a_lon", &sim::VehicleState::a_lon)
      .def_readwrite("a_lat", &sim::VehicleState::a_lat)
      .def("__repr__", [](const sim::VehicleState& v) {
        return "<VehicleState id=" + std::to_string(v.id) + " " + std::string(sim::role_name(v.role)) +
               " x=" + std::to_string(v.x) + " y=" + std::to_string(v.y) + ">";
      });

  m.def("compute_ttc", [](const sim::VehicleState& a, const sim::VehicleState& b) {
    return sim::compute_ttc(a, b, sim::WorldConfig{});
  }, py::arg("a"), py::arg("b"), "Constant-velocity time to contact in seconds (inf if never)");

  m.def("action_table", [](const std::string& config) {
    const cgmdp::ActionTable table(config_from(config).env.world);
    std::vector<std::pair<double, double>> out;
    for (const auto& c : table.entries()) out.emplace_back(c.accel, c.steer);
    return out;
  }, py::arg("config") = "", "The 23 (acceleration, steering) pairs");

  m.def("gae", [](const std::vector<double>& rewards, const std::vector<double>& values,
                  const std::vector<int>& dones, double bootstrap, double gamma, double lam) {
    const std::vector<std::uint8_t> d(dones.begin(), dones.end());
    return algo::gae(rewards, values, d, bootstrap, gamma, lam);
  }, py::arg("rewards"), py::arg("values"), py::arg("dones"), py::arg("bootstrap"),
        py::arg("gamma") = 0.9, py::arg("lam") = 0.95);

  m.def("default_config", [] { return harness::serialize_config(harness::Config{}); },
        "Default configuration as JSON text");
  m.def("normalize_config", [](const std::string& text) {
    return harness::serialize_config(harness::parse_config_text(text));
  }, "Validates a JSON config and returns it with every default filled in");

  py::class_<cgmdp::Environment>(m, "Environment")
      .def(py::init([](const std::string& config) {
             return std::make_unique<cgmdp::Environment>(config_from(config).env);
           }),
           py::arg("config") = "")
      .def("reset", [](cgmdp::Environment& env, const std::string& scenario, std::uint64_t seed,
                       bool interference) {
             return graph_dict(env.reset(cgmdp::scenario_from_name(scenario), seed, interference));
           },
           py::arg("scenario") = "svi", py::arg("seed") = 0, py::arg("interference") = true)
      .def("step", [](cgmdp::Environment& env, const std::vector<int>& actions) {
             const auto out = env.step(actions);
             py::dict d;
             d["state"] = graph_dict(out.next_state);
             d["rewards"] = out.rewards;
             d["costs"] = out.costs;
             d["done"] = out.done;
             bool av_collision = false;
             for (const auto& a : out.info.avs) av_collision = av_collision || a.collided;
             d["av_collision"] = av_collision;
             return d;
           })
      .def_property_readonly("vehicles", &cgmdp::Environment::vehicles)
      .def_property_readonly("red_team_ids", &cgmdp::Environment::red_team_ids)
      .def_property_readonly("legal_masks", &masks_of)
      .def_property_readonly("done", &cgmdp::Environment::done)
      .def_property_readonly("step_count", &cgmdp::Environment::step_count);

  m.def("train", [](const std::string& algo_name, const std::string& scenario, std::uint64_t seed,
                    std::optional<int> episodes, const std::string& config) {
    harness::Config cfg = config_from(config);
    if (episodes) cfg.train.episodes = *episodes;
    cfg.train.seed = seed;
    const auto sc = cgmdp::scenario_from_name(scenario);
    algo::TrainResult result;
    {
      py::gil_scoped_release release;
      result = algo::train(algo::algo_from_name(algo_name), cfg.env, sc, cfg.train);
    }
    py::list curves;
    for (const auto& r : result.curves) {
      py::dict d;
      d["episode"] = r.episode;
      d["reward"] = r.reward;
      d["normalized_reward"] = r.normalized_reward;
      d["cost"] = r.cost;
      d["collision"] = r.collision;
      d["lambda"] = r.lambda;
      curves.append(d);
    }
    return py::make_tuple(curves, harness::checkpoint_json(*result.model, sc, cfg).dump());
  }, py::arg("algo"), py::arg("scenario") = "svi", py::arg("seed") = 0,
        py::arg("episodes") = py::none(), py::arg("config") = "",
        "Trains a policy; returns (curves, checkpoint JSON text)");

  m.def("evaluate", [](std::optional<std::string> checkpoint, const std::string& scenario,
                       int episodes, std::uint64_t seed, const std::string& config,
                       std::optional<bool> greedy) {
    std::optional<harness::Checkpoint> ckpt;
    harness::Config cfg;
    if (checkpoint) {
      ckpt = harness::parse_checkpoint(nlohmann::json::parse(*checkpoint));
      cfg = harness::parse_config(ckpt->config);
    } else {
      cfg = config_from(config);
    }
    harness::EvalOptions opts{episodes, seed, greedy.value_or(cfg.campaign.greedy_eval)};
    harness::EvalResult result;
    {
      py::gil_scoped_release release;
      result = harness::evaluate(ckpt ? ckpt->model.get() : nullptr, cfg.env,
                                 cgmdp::scenario_from_name(scenario), opts);
    }
    py::list logs;
    for (const auto& l : result.logs) logs.append(harness::trajectory_csv(l));
    return py::make_tuple(metrics_dict(result.metrics), logs);
  }, py::arg("checkpoint") = py::none(), py::arg("scenario") = "svi", py::arg("episodes") = 100,
        py::arg("seed") = 0, py::arg("config") = "", py::arg("greedy") = py::none(),
        "Evaluates a checkpoint (None: baseline); returns (metrics, trajectory CSV texts)");

  m.def("metrics_from_csv", [](const std::vector<std::string>& csv_texts) {
    std::vector<harness::EpisodeLog> logs;
    for (const auto& t : csv_texts) logs.push_back(harness::parse_trajectory_csv(t));
    return metrics_dict(harness::metrics_from_logs(logs));
  }, py::arg("csv_texts"));

  m.attr("__version__") = harness::code_version();
}
