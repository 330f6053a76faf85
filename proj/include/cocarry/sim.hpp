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

// Fixed-rate two-agent table dynamics and episode recording.
//
// Both agents push the table with world-frame forces at mount points on the
// table's long axis: the robot at +L/2 and the human at -L/2. The table is a
// damped double integrator in (x, y, theta), advanced with semi-implicit
// Euler:
//
//   v+     = v + dt * (F - b v) / m
//   omega+ = omega + dt * (tau - c omega) / I
//   p+     = p + dt * v+
//   theta+ = wrap(theta + dt * omega+)

#ifndef COCARRY_SIM_HPP_
#define COCARRY_SIM_HPP_

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "cocarry/world.hpp"

namespace cocarry {

struct AgentAction {
  double fx = 0.0;
  double fy = 0.0;

  AgentAction() = default;
  AgentAction(double fx_, double fy_);  // clips to [-1, 1]

  bool operator==(const AgentAction&) const = default;
};

struct SimParams {
  double mass = 2.0;
  double inertia = 2.0 * (1.0 * 1.0 + 0.5 * 0.5) / 12.0;
  double lin_damping = 4.0;
  double ang_damping = 1.5;
  double force_scale = 8.0;
  double table_length = 1.0;
  double table_width = 0.5;
  double dt = 1.0 / 30.0;

  TableGeometry geometry() const { return {table_length, table_width}; }
  bool operator==(const SimParams&) const = default;
};

void validate(const SimParams& p);

struct Wrench {
  Vec2 force = Vec2::Zero();
  double torque = 0.0;
};

Wrench compose_wrench(const TableState& state, const AgentAction& robot,
                      const AgentAction& human, const SimParams& params);

TableState step(const TableState& state, const AgentAction& robot,
                const AgentAction& human, const SimParams& params);

enum class Outcome { kSuccess, kCollision, kTimeout, kAborted };

std::string to_string(Outcome o);
Outcome outcome_from_string(const std::string& s);

struct StepRecord {
  std::int64_t tick = 0;
  TableState state;
  AgentAction action_robot;
  AgentAction action_human;
  ObservationFrame obs;

  bool operator==(const StepRecord&) const = default;
};

struct Trajectory {
  std::string map_id;
  SimParams params;
  std::vector<StepRecord> steps;
  Outcome outcome = Outcome::kTimeout;

  // Seconds from the first to the last recorded tick.
  double duration() const;
  std::vector<Pose2> poses() const;
  bool operator==(const Trajectory&) const = default;
};

// Throws Error if steps are empty or ticks are not consecutive.
void validate(const Trajectory& traj);

struct PolicyContext {
  std::int64_t tick = 0;
  const TableState& state;
  // Observations up to and including the current tick.
  std::span<const ObservationFrame> history;
  const MapConfig& map;
};

using Policy = std::function<AgentAction(const PolicyContext&)>;

inline constexpr std::int64_t kDefaultMaxTicks = 1200;

// Runs until success, collision, or max_ticks. The terminal record carries
// zero actions. A policy returning a non-finite action aborts with Error.
Trajectory run_episode(const Policy& robot, const Policy& human,
                       const MapConfig& map, const SimParams& params,
                       std::int64_t max_ticks = kDefaultMaxTicks);

// Steps a single tick: termination check on `state`, otherwise the next
// state. Shared by run_episode and the live session loop.
struct TickResult {
  bool terminal = false;
  Outcome outcome = Outcome::kTimeout;
};
TickResult check_terminal(const TableState& state, const MapConfig& map,
                          const SimParams& params, std::int64_t tick,
                          std::int64_t max_ticks);

// JSON-lines trajectory format: one header line, then one StepRecord per line.
inline constexpr int kTrajectoryFormatVersion = 1;

void to_json(nlohmann::json& j, const AgentAction& a);
void from_json(const nlohmann::json& j, AgentAction& a);
void to_json(nlohmann::json& j, const SimParams& p);
void from_json(const nlohmann::json& j, SimParams& p);
void to_json(nlohmann::json& j, const StepRecord& r);
void from_json(const nlohmann::json& j, StepRecord& r);

void write_trajectory_jsonl(std::ostream& out, const Trajectory& traj);
// Throws DataError naming the 1-based line number of the first bad record.
Trajectory read_trajectory_jsonl(std::istream& in);

}  // namespace cocarry

#endif  // COCARRY_SIM_HPP_
