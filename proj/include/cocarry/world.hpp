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

// Geometric world model: table poses, maps, ego-frame observations, and the
// collision / success predicates shared by the simulator and the planners.

#ifndef COCARRY_WORLD_HPP_
#define COCARRY_WORLD_HPP_

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

namespace cocarry {

using Vec2 = Eigen::Vector2d;

// Wraps an angle into (-pi, pi].
double wrap_angle(double radians);

struct Pose2 {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;

  Pose2() = default;
  Pose2(double x_, double y_, double theta_);

  Vec2 position() const { return {x, y}; }
  // Unit vector along the table's long axis.
  Vec2 axis() const;

  bool operator==(const Pose2&) const = default;
};

struct TableState {
  Pose2 pose;
  Vec2 lin_vel = Vec2::Zero();
  double ang_vel = 0.0;

  bool operator==(const TableState&) const = default;
};

bool is_finite(const TableState& s);

struct TableGeometry {
  double length = 1.0;
  double width = 0.5;
};

// Axis-aligned square.
struct Obstacle {
  Vec2 center = Vec2::Zero();
  double half_extent = 0.5;

  bool operator==(const Obstacle&) const = default;
};

struct GoalRegion {
  Vec2 center = Vec2::Zero();
  double radius = 0.5;

  bool operator==(const GoalRegion&) const = default;
};

struct Bounds {
  double min_x = 0.0;
  double min_y = 0.0;
  double max_x = 12.0;
  double max_y = 8.0;

  bool contains(const Vec2& p) const {
    return p.x() >= min_x && p.x() <= max_x && p.y() >= min_y && p.y() <= max_y;
  }
  bool operator==(const Bounds&) const = default;
};

struct MapConfig {
  std::string id;
  Pose2 initial_pose;
  std::vector<Obstacle> obstacles;
  GoalRegion goal;
  Bounds bounds;

  bool operator==(const MapConfig&) const = default;
};

// Throws Error naming the first violated map invariant.
void validate_map(const MapConfig& map, const TableGeometry& geom = {});

// Per-tick model input. Motion components are world-frame differences between
// consecutive ticks; the two heading vectors are expressed in the table frame.
struct ObservationFrame {
  static constexpr std::size_t kDim = 8;
  static constexpr std::size_t kMotionDim = 4;

  Vec2 dp = Vec2::Zero();
  double dcos = 0.0;
  double dsin = 0.0;
  Vec2 d_goal_ego = Vec2::Zero();
  Vec2 d_obs_ego = Vec2::Zero();

  std::array<double, kDim> to_array() const;
  static ObservationFrame from_array(std::span<const double, kDim> v);
  bool operator==(const ObservationFrame&) const = default;
};

Vec2 world_to_ego(const Pose2& pose, const Vec2& point);
Vec2 ego_to_world(const Pose2& pose, const Vec2& ego);

struct NearestObstacle {
  std::size_t index = 0;
  Vec2 heading = Vec2::Zero();  // world frame, from position to center
};

// Ties resolve to the lowest index. Throws Error("no obstacles") on an empty
// list.
NearestObstacle nearest_obstacle(const Vec2& position,
                                 std::span<const Obstacle> obstacles);

ObservationFrame build_observation(const TableState& prev,
                                   const TableState& cur,
                                   const MapConfig& map);

// Observation heading vectors for a pose; the motion part is left zero.
ObservationFrame heading_features(const Pose2& pose, const MapConfig& map);

// Corners of the table rectangle in world frame, counter-clockwise.
std::array<Vec2, 4> table_corners(const Pose2& pose, const TableGeometry& geom);

bool rect_intersects_square(const Pose2& pose, const TableGeometry& geom,
                            const Obstacle& square);

// True iff the table rectangle touches any obstacle or leaves the bounds.
bool check_collision(const TableState& state, const MapConfig& map,
                     const TableGeometry& geom);
bool check_collision(const Pose2& pose, const MapConfig& map,
                     const TableGeometry& geom);

// Center-in-disk, boundary inclusive.
bool check_success(const TableState& state, const GoalRegion& goal);
bool check_success(const Pose2& pose, const GoalRegion& goal);

// JSON forms used by map files, trajectory logs and the session protocol.
void to_json(nlohmann::json& j, const Pose2& p);
void from_json(const nlohmann::json& j, Pose2& p);
void to_json(nlohmann::json& j, const TableState& s);
void from_json(const nlohmann::json& j, TableState& s);
void to_json(nlohmann::json& j, const Obstacle& o);
void from_json(const nlohmann::json& j, Obstacle& o);
void to_json(nlohmann::json& j, const GoalRegion& g);
void from_json(const nlohmann::json& j, GoalRegion& g);
void to_json(nlohmann::json& j, const Bounds& b);
void from_json(const nlohmann::json& j, Bounds& b);
void to_json(nlohmann::json& j, const MapConfig& m);
void from_json(const nlohmann::json& j, MapConfig& m);
void to_json(nlohmann::json& j, const ObservationFrame& f);
void from_json(const nlohmann::json& j, ObservationFrame& f);

nlohmann::json vec2_to_json(const Vec2& v);
Vec2 vec2_from_json(const nlohmann::json& j);

}  // namespace cocarry

#endif  // COCARRY_WORLD_HPP_
