// Copyright 2026 The cocarry Authors
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

#include "cocarry/world.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "cocarry/error.hpp"

namespace cocarry {

double wrap_angle(double radians) {
  double r = std::remainder(radians, 2.0 * std::numbers::pi);
  if (r <= -std::numbers::pi) r += 2.0 * std::numbers::pi;
  return r;
}

Pose2::Pose2(double x_, double y_, double theta_)
    : x(x_), y(y_), theta(wrap_angle(theta_)) {}

Vec2 Pose2::axis() const { return {std::cos(theta), std::sin(theta)}; }

bool is_finite(const TableState& s) {
  return std::isfinite(s.pose.x) && std::isfinite(s.pose.y) &&
         std::isfinite(s.pose.theta) && s.lin_vel.allFinite() &&
         std::isfinite(s.ang_vel);
}

void validate_map(const MapConfig& map, const TableGeometry& geom) {
  const Bounds& b = map.bounds;
  if (!(b.max_x > b.min_x && b.max_y > b.min_y)) {
    throw Error("map " + map.id + ": empty bounds");
  }
  if (!(map.goal.radius > 0.0)) {
    throw Error("map " + map.id + ": goal radius must be positive");
  }
  if (!b.contains(map.goal.center)) {
    throw Error("map " + map.id + ": goal outside bounds");
  }
  for (const Obstacle& o : map.obstacles) {
    if (!(o.half_extent > 0.0)) {
      throw Error("map " + map.id + ": obstacle half extent must be positive");
    }
    const Vec2 lo = o.center - Vec2::Constant(o.half_extent);
    const Vec2 hi = o.center + Vec2::Constant(o.half_extent);
    if (!b.contains(lo) || !b.contains(hi)) {
      throw Error("map " + map.id + ": obstacle outside bounds");
    }
  }
  if (check_collision(map.initial_pose, map, geom)) {
    throw Error("map " + map.id + ": initial pose in collision");
  }
}

std::array<double, ObservationFrame::kDim> ObservationFrame::to_array() const {
  return {dp.x(),         dp.y(),         dcos,          dsin,
          d_goal_ego.x(), d_goal_ego.y(), d_obs_ego.x(), d_obs_ego.y()};
}

ObservationFrame ObservationFrame::from_array(std::span<const double, kDim> v) {
  ObservationFrame f;
  f.dp = {v[0], v[1]};
  f.dcos = v[2];
  f.dsin = v[3];
  f.d_goal_ego = {v[4], v[5]};
  f.d_obs_ego = {v[6], v[7]};
  return f;
}

Vec2 world_to_ego(const Pose2& pose, const Vec2& point) {
  const double c = std::cos(pose.theta);
  const double s = std::sin(pose.theta);
  const Vec2 d = point - pose.position();
  return {c * d.x() + s * d.y(), -s * d.x() + c * d.y()};
}

Vec2 ego_to_world(const Pose2& pose, const Vec2& ego) {
  const double c = std::cos(pose.theta);
  const double s = std::sin(pose.theta);
  return pose.position() + Vec2(c * ego.x() - s * ego.y(), s * ego.x() + c * ego.y());
}

NearestObstacle nearest_obstacle(const Vec2& position,
                                 std::span<const Obstacle> obstacles) {
  if (obstacles.empty()) throw Error("no obstacles");
  NearestObstacle best;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < obstacles.size(); ++i) {
    const double d2 = (obstacles[i].center - position).squaredNorm();
    if (d2 < best_d2) {
      best_d2 = d2;
      best.index = i;
    }
  }
  best.heading = obstacles[best.index].center - position;
  return best;
}

ObservationFrame heading_features(const Pose2& pose, const MapConfig& map) {
  ObservationFrame f;
  f.d_goal_ego = world_to_ego(pose, map.goal.center);
  if (!map.obstacles.empty()) {
    const NearestObstacle n = nearest_obstacle(pose.position(), map.obstacles);
    f.d_obs_ego = world_to_ego(pose, map.obstacles[n.index].center);
  }
  return f;
}

ObservationFrame build_observation(const TableState& prev,
                                   const TableState& cur,
                                   const MapConfig& map) {
  ObservationFrame f = heading_features(cur.pose, map);
  f.dp = cur.pose.position() - prev.pose.position();
  f.dcos = std::cos(cur.pose.theta) - std::cos(prev.pose.theta);
  f.dsin = std::sin(cur.pose.theta) - std::sin(prev.pose.theta);
  return f;
}

std::array<Vec2, 4> table_corners(const Pose2& pose, const TableGeometry& geom) {
  const double hl = 0.5 * geom.length;
  const double hw = 0.5 * geom.width;
  return {ego_to_world(pose, {hl, -hw}), ego_to_world(pose, {hl, hw}),
          ego_to_world(pose, {-hl, hw}), ego_to_world(pose, {-hl, -hw})};
}

namespace {

struct Interval {
  double lo;
  double hi;
};

template <std::size_t N>
Interval project(const std::array<Vec2, N>& pts, const Vec2& axis) {
  Interval iv{std::numeric_limits<double>::infinity(),
              -std::numeric_limits<double>::infinity()};
  for (const Vec2& p : pts) {
    const double d = p.dot(axis);
    iv.lo = std::min(iv.lo, d);
    iv.hi = std::max(iv.hi, d);
  }
  return iv;
}

}  // namespace

bool rect_intersects_square(const Pose2& pose, const TableGeometry& geom,
                            const Obstacle& square) {
  const auto rect = table_corners(pose, geom);
  const double h = square.half_extent;
  const std::array<Vec2, 4> sq = {square.center + Vec2(h, -h), square.center + Vec2(h, h),
                                  square.center + Vec2(-h, h), square.center + Vec2(-h, -h)};
  const Vec2 u = pose.axis();
  const std::array<Vec2, 4> axes = {Vec2(1.0, 0.0), Vec2(0.0, 1.0), u, Vec2(-u.y(), u.x())};
  for (const Vec2& axis : axes) {
    const Interval a = project(rect, axis);
    const Interval b = project(sq, axis);
    // Closed intervals: touching counts as contact.
    if (a.hi < b.lo || b.hi < a.lo) return false;
  }
  return true;
}

bool check_collision(const Pose2& pose, const MapConfig& map,
                     const TableGeometry& geom) {
  for (const Vec2& c : table_corners(pose, geom)) {
    if (!map.bounds.contains(c)) return true;
  }
  return std::any_of(map.obstacles.begin(), map.obstacles.end(),
                     [&](const Obstacle& o) { return rect_intersects_square(pose, geom, o); });
}

bool check_collision(const TableState& state, const MapConfig& map,
                     const TableGeometry& geom) {
  return check_collision(state.pose, map, geom);
}

bool check_success(const Pose2& pose, const GoalRegion& goal) {
  return (pose.position() - goal.center).norm() <= goal.radius;
}

bool check_success(const TableState& state, const GoalRegion& goal) {
  return check_success(state.pose, goal);
}

// --- JSON -------------------------------------------------------------------

nlohmann::json vec2_to_json(const Vec2& v) { return nlohmann::json::array({v.x(), v.y()}); }

Vec2 vec2_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 2) throw DataError("expected a 2-element array");
  return {j.at(0).get<double>(), j.at(1).get<double>()};
}

void to_json(nlohmann::json& j, const Pose2& p) {
  j = nlohmann::json{{"x", p.x}, {"y", p.y}, {"theta", p.theta}};
}
void from_json(const nlohmann::json& j, Pose2& p) {
  // Stored angles are already wrapped; keep them bit-exact.
  p.x = j.at("x").get<double>();
  p.y = j.at("y").get<double>();
  p.theta = j.at("theta").get<double>();
}

void to_json(nlohmann::json& j, const TableState& s) {
  j = nlohmann::json{{"pose", s.pose}, {"lin_vel", vec2_to_json(s.lin_vel)}, {"ang_vel", s.ang_vel}};
}
void from_json(const nlohmann::json& j, TableState& s) {
  s.pose = j.at("pose").get<Pose2>();
  s.lin_vel = vec2_from_json(j.at("lin_vel"));
  s.ang_vel = j.at("ang_vel").get<double>();
}

void to_json(nlohmann::json& j, const Obstacle& o) {
  j = nlohmann::json{{"center", vec2_to_json(o.center)}, {"half_extent", o.half_extent}};
}
void from_json(const nlohmann::json& j, Obstacle& o) {
  o.center = vec2_from_json(j.at("center"));
  o.half_extent = j.at("half_extent").get<double>();
}

void to_json(nlohmann::json& j, const GoalRegion& g) {
  j = nlohmann::json{{"center", vec2_to_json(g.center)}, {"radius", g.radius}};
}
void from_json(const nlohmann::json& j, GoalRegion& g) {
  g.center = vec2_from_json(j.at("center"));
  g.radius = j.at("radius").get<double>();
}

void to_json(nlohmann::json& j, const Bounds& b) {
  j = nlohmann::json{{"min_x", b.min_x}, {"min_y", b.min_y}, {"max_x", b.max_x}, {"max_y", b.max_y}};
}
void from_json(const nlohmann::json& j, Bounds& b) {
  b.min_x = j.at("min_x").get<double>();
  b.min_y = j.at("min_y").get<double>();
  b.max_x = j.at("max_x").get<double>();
  b.max_y = j.at("max_y").get<double>();
}

void to_json(nlohmann::json& j, const MapConfig& m) {
  j = nlohmann::json{{"id", m.id},
                     {"initial_pose", m.initial_pose},
                     {"obstacles", m.obstacles},
                     {"goal", m.goal},
                     {"bounds", m.bounds}};
}
void from_json(const nlohmann::json& j, MapConfig& m) {
  m.id = j.at("id").get<std::string>();
  m.initial_pose = j.at("initial_pose").get<Pose2>();
  m.obstacles = j.at("obstacles").get<std::vector<Obstacle>>();
  m.goal = j.at("goal").get<GoalRegion>();
  m.bounds = j.at("bounds").get<Bounds>();
}

void to_json(nlohmann::json& j, const ObservationFrame& f) {
  const auto a = f.to_array();
  j = nlohmann::json(std::vector<double>(a.begin(), a.end()));
}
void from_json(const nlohmann::json& j, ObservationFrame& f) {
  if (!j.is_array() || j.size() != ObservationFrame::kDim) {
    throw DataError("observation must have 8 components");
  }
  std::array<double, ObservationFrame::kDim> a{};
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = j[i].get<double>();
  f = ObservationFrame::from_array(a);
}

}  // namespace cocarry
