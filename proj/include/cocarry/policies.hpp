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

// Scripted agents that stand in for human operators: route-following
// navigators with a preferred side around obstacles, per-agent noise, and an
// optional compliance term that yields to the partner.

#ifndef COCARRY_POLICIES_HPP_
#define COCARRY_POLICIES_HPP_

#include <cstdint>
#include <utility>
#include <vector>

#include "cocarry/sim.hpp"
#include "cocarry/world.hpp"

namespace cocarry {

enum class Side { kAbove, kBelow };

struct ScriptedParams {
  double cruise_min = 0.5;      // m/s
  double cruise_max = 0.75;
  double clearance = 0.7;       // table-center clearance from obstacle edges
  double side_penalty = 3.0;    // extra route length for passing on the other side
  double commit_distance = 1.0;  // straight approach ends this far from an obstacle
  double corner_jitter = 0.15;  // per-episode random offset of route corners
  double lookahead = 1.0;
  double velocity_gain = 3.0;   // 1/s
  double heading_gain = 4.0;    // 1/s^2
  double heading_damping = 3.0;  // 1/s
  double noise_sigma = 0.08;    // stationary std of the action noise
  double noise_tau = 0.6;       // s
  double compliance = 0.0;      // 0: own route only, 1: follow the table's motion
};

// Straight approach toward the goal, then the shortest route through a
// visibility graph over the obstacle squares inflated by `clearance`. Corners on the
// non-preferred side of their obstacle cost `side_penalty` extra. Throws Error
// when the goal is unreachable even after shrinking the clearance.
std::vector<Vec2> plan_route(const MapConfig& map, Side side, const ScriptedParams& params,
                             std::uint64_t seed);

// Side of the first blocking obstacle that a pose sequence passes on, from
// the sign of its cumulative lateral displacement relative to the start.
Side side_of(const std::vector<Pose2>& poses);

enum class Role { kRobot, kHuman };

// An agent that steers the table along `route` at `cruise` speed, assuming its
// partner contributes the other half of the required force and torque.
Policy make_scripted_agent(Role role, std::vector<Vec2> route, double cruise,
                           const ScriptedParams& params, const SimParams& sim, std::uint64_t seed);

// Two agents sharing one route, as in a coordinated demonstration.
std::pair<Policy, Policy> make_demonstrator_pair(const MapConfig& map, Side side,
                                                 const ScriptedParams& params,
                                                 const SimParams& sim, std::uint64_t seed);

// Stand-in for a human partner in closed-loop trials: picks its own side at
// random and partially complies with the table's motion.
ScriptedParams noisy_human_params();  // compliance 0.4
Policy make_noisy_human(const MapConfig& map, const ScriptedParams& params, const SimParams& sim,
                        std::uint64_t seed);

// Replays the logged actions of one agent; zero after the log ends.
Policy make_replay_policy(const Trajectory& traj, Role role);

}  // namespace cocarry

#endif  // COCARRY_POLICIES_HPP_
