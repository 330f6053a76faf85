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

// Planners that drive the robot end of the table: RRT baselines (centralized
// and decentralized) and the receding-horizon sampling planner built on the
// learned sequence model.

#ifndef COCARRY_PLANNERS_HPP_
#define COCARRY_PLANNERS_HPP_

#include <cstdint>
#include <deque>
#include <span>
#include <vector>

#include <json.hpp>

#include "cocarry/sim.hpp"
#include "cocarry/vrnn.hpp"
#include "cocarry/world.hpp"

namespace cocarry {

struct Waypoint {
  double tick = 0.0;  // may be fractional
  Pose2 pose;
};

// Waypoint ticks are strictly increasing.
struct Plan {
  std::vector<Waypoint> waypoints;
  std::int64_t birth_tick = 0;  // tick at which the plan was computed
};

void validate(const Plan& plan);

// Pose at `tick`, linearly interpolated between waypoints (shortest-arc in
// theta) and held at the ends.
Pose2 plan_pose_at(const Plan& plan, double tick);

void to_json(nlohmann::json& j, const Plan& p);
void from_json(const nlohmann::json& j, Plan& p);

AgentAction p_controller(const TableState& state, const Pose2& target, double gain);

// --- RRT ----------------------------------------------------------------------

struct RrtParams {
  double step_size = 0.3;
  double goal_bias = 0.1;
  int max_iters = 20000;
  double angular_weight = 0.3;  // metres per radian in the SE(2) metric
  std::uint64_t seed = 0;
  double nominal_speed = 0.6;  // metric units per second when timing waypoints
  double edge_resolution = 0.01;  // collision-check spacing along edges, SE(2) metric
};

enum class RrtStatus { kFound, kExhausted };

struct RrtResult {
  RrtStatus status = RrtStatus::kExhausted;
  Plan plan;  // empty unless kFound
  int iterations = 0;
  std::size_t tree_size = 0;
};

double se2_distance(const Pose2& a, const Pose2& b, double angular_weight);

// Throws Error if `start` is in collision; running out of iterations is a
// kExhausted result, not an error.
RrtResult rrt_plan(const Pose2& start, const MapConfig& map, const RrtParams& params,
                   const TableGeometry& geom, double dt = 1.0 / 30.0,
                   std::int64_t start_tick = 0);

// True iff every pose along the plan, interpolated at `resolution`, is free.
bool plan_collision_free(const Plan& plan, const MapConfig& map, const TableGeometry& geom,
                         double angular_weight, double resolution);

// Follows the time-indexed plan toward plan_pose_at(tick); never replans.
AgentAction dec_rrt_policy(const Plan& plan, const TableState& state, std::int64_t tick,
                           double gain = 2.0);

// --- receding horizon ---------------------------------------------------------

struct CostParams {
  double w_goal = 1.0;
  double w_collision = 100.0;
  double w_progress = 0.5;
};

// w_goal * |end - goal| + w_collision * [any pose collides]
//   - w_progress * (|start - goal| - |end - goal|), with start = rollout.front().
double cost(std::span<const Pose2> rollout, const MapConfig& map, const CostParams& cp,
            const TableGeometry& geom);

struct Selection {
  std::size_t index = 0;
  std::vector<double> costs;
};

// Argmin of cost over rollouts that each start at `start`; ties go to the
// lowest index.
Selection select_rollout(const std::vector<std::vector<Pose2>>& rollouts, const Pose2& start,
                         const MapConfig& map, const CostParams& cp, const TableGeometry& geom);

struct RecedingHorizonSettings {
  int n_samples = 16;
  int horizon = 90;
  int replan_interval = 5;
  double gain = 12.0;
  CostParams cost;
  TableGeometry geometry;
};

struct PlannerState {
  std::deque<ObservationFrame> history;  // at most H frames
  Plan plan;                             // empty before the first replan
};

// Samples rollouts from the stored history and keeps the cheapest one as a
// plan whose k-th waypoint is due at tick + 1 + k.
Plan plan_with_model(const vrnn::Model& model, std::span<const ObservationFrame> history,
                     const TableState& state, const MapConfig& map,
                     const RecedingHorizonSettings& settings, std::int64_t tick,
                     std::uint64_t seed, Selection* selection = nullptr);

// P-control toward the plan's waypoint for `tick`.
AgentAction track_plan(const Plan& plan, const TableState& state, std::int64_t tick, double gain);

struct PlannerStep {
  AgentAction action;
  PlannerState state;
  bool replanned = false;
};

// Appends `obs` to the history. Emits a zero action until H frames are
// queued; afterwards replans every replan_interval ticks and tracks the
// stored plan in between. Deterministic given (state, tick, seed).
PlannerStep receding_horizon_step(PlannerState ps, const TableState& state,
                                  const ObservationFrame& obs, const vrnn::Model& model,
                                  const MapConfig& map, const RecedingHorizonSettings& settings,
                                  std::int64_t tick, std::uint64_t seed);

}  // namespace cocarry

#endif  // COCARRY_PLANNERS_HPP_
