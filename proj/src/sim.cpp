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

#include "rtmarl/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace rtmarl::sim {

std::string_view role_name(Role role) {
  switch (role) {
    case Role::kAv:
      return "AV";
    case Role::kRedTeam:
      return "RedTeam";
    case Role::kHv:
      return "HV";
  }
  return "HV";
}

Role role_from_name(std::string_view name) {
  if (name == "AV") return Role::kAv;
  if (name == "RedTeam") return Role::kRedTeam;
  if (name == "HV") return Role::kHv;
  throw std::invalid_argument("unknown vehicle role '" + std::string(name) + "'");
}

void WorldConfig::validate() const {
  auto positive = [](double value, const char* name) {
    if (!(value > 0.0) || !std::isfinite(value)) {
      throw std::invalid_argument(std::string("world.") + name +
                                  " must be a finite positive number");
    }
  };
  if (lane_count != 3) throw std::invalid_argument("world.lane_count must be 3");
  positive(lane_width, "lane_width");
  positive(road_length, "road_length");
  positive(goal_y, "goal_y");
  positive(dt, "dt");
  positive(v_max, "v_max");
  positive(a_max, "a_max");
  positive(delta_max, "delta_max");
  positive(theta_max, "theta_max");
  positive(wheelbase, "wheelbase");
  positive(vehicle_length, "vehicle_length");
  positive(vehicle_width, "vehicle_width");
  positive(sensing_range, "sensing_range");
  positive(ttc_threshold, "ttc_threshold");
}

int WorldConfig::lane_of(double x) const {
  const int lane = static_cast<int>(std::floor(x / lane_width));
  return std::clamp(lane, 0, lane_count - 1);
}

VehicleState step_kinematics(const VehicleState& state, Control control,
                             const WorldConfig& cfg) {
  const double values[] = {state.x, state.y, state.theta, state.v,
                           control.accel, control.steer};
  for (double value : values) {
    if (!std::isfinite(value)) {
      throw std::invalid_argument("step_kinematics: non-finite input for vehicle " +
                                  std::to_string(state.id));
    }
  }
  constexpr double kSlack = 1e-9;
  if (std::abs(control.accel) > cfg.a_max + kSlack ||
      std::abs(control.steer) > cfg.delta_max + kSlack) {
    throw std::invalid_argument("step_kinematics: control outside actuator limits for vehicle " +
                                std::to_string(state.id));
  }

  VehicleState next = state;
  next.y = state.y + state.v * std::cos(state.theta) * cfg.dt;
  next.x = state.x + state.v * std::sin(state.theta) * cfg.dt;
  next.theta = std::clamp(
      state.theta + (state.v / cfg.wheelbase) * std::tan(control.steer) * cfg.dt,
      -cfg.theta_max, cfg.theta_max);
  next.v = std::clamp(state.v + control.accel * cfg.dt, 0.0, cfg.v_max);
  next.a_lon = control.accel;
  next.a_lat = state.v * ((next.theta - state.theta) / cfg.dt);
  next.lane = cfg.lane_of(next.x);
  return next;
}

double lane_keeping_steer(const VehicleState& self, double target_x,
                          double lateral_gain, double heading_gain,
                          const WorldConfig& cfg) {
  const double steer = lateral_gain * (target_x - self.x) - heading_gain * self.theta;
  return std::clamp(steer, -cfg.delta_max, cfg.delta_max);
}

double idm_accel(double v, double gap, double closing_speed, double desired_speed,
                 const IdmParams& p, const WorldConfig& cfg) {
  double a = p.accel * (1.0 - std::pow(v / desired_speed, p.exponent));
  if (std::isfinite(gap)) {
    if (gap <= 0.0) return -cfg.a_max;
    const double desired_gap =
        p.min_gap + std::max(0.0, v * p.time_headway +
                                      v * closing_speed /
                                          (2.0 * std::sqrt(p.accel * p.comfortable_decel)));
    a -= p.accel * (desired_gap / gap) * (desired_gap / gap);
  }
  return std::clamp(a, -cfg.a_max, cfg.a_max);
}

Control hv_policy(const VehicleState& self, std::span<const VehicleState> others,
                  const WorldConfig& cfg, const IdmParams& params) {
  if (self.role != Role::kHv) {
    throw std::invalid_argument("hv_policy: vehicle " + std::to_string(self.id) +
                                " is not human-driven");
  }
  // a leader is anything whose body reaches into this lane, not just
  // vehicles centered in it
  const double center = cfg.lane_center(self.lane);
  const VehicleState* leader = nullptr;
  for (const auto& other : others) {
    if (other.id == self.id) continue;
    if (std::abs(other.x - center) >= 0.5 * cfg.lane_width + lateral_half_extent(other)) continue;
    const double dy = other.y - self.y;
    if (dy <= 0.0 || dy > cfg.sensing_range) continue;
    if (leader == nullptr || dy < leader->y - self.y) leader = &other;
  }
  double gap = std::numeric_limits<double>::infinity();
  double closing = 0.0;
  if (leader != nullptr) {
    gap = (leader->y - self.y) - 0.5 * (leader->length + self.length);
    closing = self.v - leader->v;
  }
  Control control;
  control.accel = idm_accel(self.v, gap, closing, cfg.v_max, params, cfg);
  control.steer = lane_keeping_steer(self, cfg.lane_center(self.lane), params.lateral_gain,
                                     params.heading_gain, cfg);
  return control;
}

namespace {

struct Axes {
  Point heading;  // unit vector along the body
  Point lateral;  // unit vector across the body
};

Axes body_axes(const VehicleState& v) {
  const double s = std::sin(v.theta);
  const double c = std::cos(v.theta);
  return {{s, c}, {c, -s}};
}

double dot(Point a, Point b) { return a.x * b.x + a.y * b.y; }
double cross(Point a, Point b) { return a.x * b.y - a.y * b.x; }
Point sub(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }

double signed_area(const std::vector<Point>& poly) {
  double area = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    area += cross(poly[i], poly[(i + 1) % poly.size()]);
  }
  return 0.5 * area;
}

// Sutherland-Hodgman clip of subject against a convex counter-clockwise clipper.
std::vector<Point> clip_convex(std::vector<Point> subject, const std::vector<Point>& clipper) {
  for (std::size_t e = 0; e < clipper.size() && !subject.empty(); ++e) {
    const Point a = clipper[e];
    const Point b = clipper[(e + 1) % clipper.size()];
    const Point edge = sub(b, a);
    auto inside = [&](Point p) { return cross(edge, sub(p, a)) >= 0.0; };
    std::vector<Point> output;
    for (std::size_t i = 0; i < subject.size(); ++i) {
      const Point cur = subject[i];
      const Point prev = subject[(i + subject.size() - 1) % subject.size()];
      const bool cur_in = inside(cur);
      const bool prev_in = inside(prev);
      if (cur_in != prev_in) {
        const Point d = sub(cur, prev);
        const double denom = cross(edge, d);
        const double t = denom == 0.0 ? 0.0 : cross(edge, sub(a, prev)) / denom;
        output.push_back({prev.x + t * d.x, prev.y + t * d.y});
      }
      if (cur_in) output.push_back(cur);
    }
    subject = std::move(output);
  }
  return subject;
}

double alignment(const VehicleState& v, Point contact) {
  const Point r = {contact.x - v.x, contact.y - v.y};
  const double norm = std::hypot(r.x, r.y);
  if (norm < 1e-9) return 0.0;
  return dot(r, body_axes(v).heading) / norm;
}

}  // namespace

std::vector<Point> footprint(const VehicleState& v) {
  const Axes axes = body_axes(v);
  const double hl = 0.5 * v.length;
  const double hw = 0.5 * v.width;
  std::vector<Point> corners;
  corners.reserve(4);
  for (auto [sl, sw] : {std::pair{1, 1}, {1, -1}, {-1, -1}, {-1, 1}}) {
    corners.push_back({v.x + sl * hl * axes.heading.x + sw * hw * axes.lateral.x,
                       v.y + sl * hl * axes.heading.y + sw * hw * axes.lateral.y});
  }
  if (signed_area(corners) < 0.0) std::reverse(corners.begin(), corners.end());
  return corners;
}

double lateral_half_extent(const VehicleState& v) {
  return 0.5 * v.length * std::abs(std::sin(v.theta)) +
         0.5 * v.width * std::abs(std::cos(v.theta));
}

bool footprints_overlap(const VehicleState& a, const VehicleState& b) {
  const double reach = 0.5 * (std::hypot(a.length, a.width) + std::hypot(b.length, b.width));
  if (std::hypot(a.x - b.x, a.y - b.y) > reach) return false;

  const Axes aa = body_axes(a);
  const Axes ab = body_axes(b);
  const Point center_offset = {b.x - a.x, b.y - a.y};
  for (Point axis : {aa.heading, aa.lateral, ab.heading, ab.lateral}) {
    const double ra = 0.5 * a.length * std::abs(dot(aa.heading, axis)) +
                      0.5 * a.width * std::abs(dot(aa.lateral, axis));
    const double rb = 0.5 * b.length * std::abs(dot(ab.heading, axis)) +
                      0.5 * b.width * std::abs(dot(ab.lateral, axis));
    if (std::abs(dot(center_offset, axis)) >= ra + rb) return false;
  }
  return true;
}

Point contact_point(const VehicleState& a, const VehicleState& b) {
  const auto region = clip_convex(footprint(a), footprint(b));
  if (region.empty()) return {0.5 * (a.x + b.x), 0.5 * (a.y + b.y)};
  const double area = signed_area(region);
  if (std::abs(area) < 1e-12) {
    Point mean;
    for (const auto& p : region) {
      mean.x += p.x;
      mean.y += p.y;
    }
    return {mean.x / region.size(), mean.y / region.size()};
  }
  Point centroid;
  for (std::size_t i = 0; i < region.size(); ++i) {
    const Point p = region[i];
    const Point q = region[(i + 1) % region.size()];
    const double w = cross(p, q);
    centroid.x += (p.x + q.x) * w;
    centroid.y += (p.y + q.y) * w;
  }
  return {centroid.x / (6.0 * area), centroid.y / (6.0 * area)};
}

int attribute_striker(const VehicleState& a, const VehicleState& b) {
  const Point contact = contact_point(a, b);
  const double align_a = alignment(a, contact);
  const double align_b = alignment(b, contact);
  constexpr double kTie = 1e-9;
  if (std::abs(align_a - align_b) <= kTie) return std::min(a.id, b.id);
  return align_a > align_b ? a.id : b.id;
}

std::vector<CollisionEvent> detect_collisions(std::span<const VehicleState> vehicles,
                                              int step) {
  std::vector<CollisionEvent> events;
  for (std::size_t i = 0; i < vehicles.size(); ++i) {
    for (std::size_t j = i + 1; j < vehicles.size(); ++j) {
      const auto& a = vehicles[i].id < vehicles[j].id ? vehicles[i] : vehicles[j];
      const auto& b = vehicles[i].id < vehicles[j].id ? vehicles[j] : vehicles[i];
      if (!footprints_overlap(a, b)) continue;
      const int striker = attribute_striker(a, b);
      events.push_back({step, striker, striker == a.id ? b.id : a.id, contact_point(a, b)});
    }
  }
  std::sort(events.begin(), events.end(), [](const auto& l, const auto& r) {
    const auto key = [](const CollisionEvent& e) {
      return std::pair{std::min(e.striker_id, e.struck_id), std::max(e.striker_id, e.struck_id)};
    };
    return key(l) < key(r);
  });
  return events;
}

double ttc_radius(const VehicleState& v) { return 0.5 * std::hypot(v.length, v.width); }

double compute_ttc(const VehicleState& a, const VehicleState& b, const WorldConfig&) {
  const double px = b.x - a.x;
  const double py = b.y - a.y;
  const double wx = b.v * std::sin(b.theta) - a.v * std::sin(a.theta);
  const double wy = b.v * std::cos(b.theta) - a.v * std::cos(a.theta);
  const double radius = ttc_radius(a) + ttc_radius(b);
  const double c = px * px + py * py - radius * radius;
  if (c <= 0.0) return 0.0;
  const double qa = wx * wx + wy * wy;
  const double qb = px * wx + py * wy;
  constexpr double kInf = std::numeric_limits<double>::infinity();
  if (qa <= 0.0 || qb >= 0.0) return kInf;
  const double disc = qb * qb - qa * c;
  if (disc < 0.0) return kInf;
  // Smaller root of qa t^2 + 2 qb t + c = 0, written to avoid cancellation.
  return c / (-qb + std::sqrt(disc));
}

}  // namespace rtmarl::sim
