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

#include "cocarry/sim.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "cocarry/error.hpp"

namespace cocarry {

namespace {

double clip_unit(double v) { return std::clamp(v, -1.0, 1.0); }

double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

}  // namespace

AgentAction::AgentAction(double fx_, double fy_) : fx(clip_unit(fx_)), fy(clip_unit(fy_)) {}

void validate(const SimParams& p) {
  for (double v : {p.mass, p.inertia, p.lin_damping, p.ang_damping, p.force_scale,
                   p.table_length, p.table_width, p.dt}) {
    if (!(v > 0.0) || !std::isfinite(v)) throw Error("sim params must be finite and positive");
  }
}

Wrench compose_wrench(const TableState& state, const AgentAction& robot,
                      const AgentAction& human, const SimParams& params) {
  const Vec2 arm = 0.5 * params.table_length * state.pose.axis();
  const Vec2 f_robot = params.force_scale * Vec2(robot.fx, robot.fy);
  const Vec2 f_human = params.force_scale * Vec2(human.fx, human.fy);
  Wrench w;
  w.force = f_robot + f_human;
  w.torque = cross(arm, f_robot) + cross(-arm, f_human);
  return w;
}

TableState step(const TableState& state, const AgentAction& robot,
                const AgentAction& human, const SimParams& params) {
  const Wrench w = compose_wrench(state, robot, human, params);
  TableState next;
  next.lin_vel = state.lin_vel + params.dt * (w.force - params.lin_damping * state.lin_vel) / params.mass;
  next.ang_vel = state.ang_vel +
                 params.dt * (w.torque - params.ang_damping * state.ang_vel) / params.inertia;
  next.pose.x = state.pose.x + params.dt * next.lin_vel.x();
  next.pose.y = state.pose.y + params.dt * next.lin_vel.y();
  next.pose.theta = wrap_angle(state.pose.theta + params.dt * next.ang_vel);
  return next;
}

std::string to_string(Outcome o) {
  switch (o) {
    case Outcome::kSuccess: return "success";
    case Outcome::kCollision: return "collision";
    case Outcome::kTimeout: return "timeout";
    case Outcome::kAborted: return "aborted";
  }
  return "unknown";
}

Outcome outcome_from_string(const std::string& s) {
  if (s == "success") return Outcome::kSuccess;
  if (s == "collision") return Outcome::kCollision;
  if (s == "timeout") return Outcome::kTimeout;
  if (s == "aborted") return Outcome::kAborted;
  throw DataError("unknown outcome '" + s + "'");
}

double Trajectory::duration() const {
  if (steps.empty()) return 0.0;
  return static_cast<double>(steps.back().tick - steps.front().tick) * params.dt;
}

std::vector<Pose2> Trajectory::poses() const {
  std::vector<Pose2> out;
  out.reserve(steps.size());
  for (const auto& s : steps) out.push_back(s.state.pose);
  return out;
}

void validate(const Trajectory& traj) {
  if (traj.steps.empty()) throw Error("trajectory has no steps");
  for (std::size_t i = 1; i < traj.steps.size(); ++i) {
    if (traj.steps[i].tick != traj.steps[i - 1].tick + 1) {
      throw Error("trajectory ticks are not consecutive at index " + std::to_string(i));
    }
  }
}

TickResult check_terminal(const TableState& state, const MapConfig& map,
                          const SimParams& params, std::int64_t tick,
                          std::int64_t max_ticks) {
  if (check_success(state, map.goal)) return {true, Outcome::kSuccess};
  if (check_collision(state, map, params.geometry())) return {true, Outcome::kCollision};
  if (tick >= max_ticks) return {true, Outcome::kTimeout};
  return {};
}

Trajectory run_episode(const Policy& robot, const Policy& human,
                       const MapConfig& map, const SimParams& params,
                       std::int64_t max_ticks) {
  validate(params);
  Trajectory traj;
  traj.map_id = map.id;
  traj.params = params;

  TableState state;
  state.pose = map.initial_pose;
  TableState prev = state;
  std::vector<ObservationFrame> history;

  for (std::int64_t tick = 0;; ++tick) {
    const ObservationFrame obs = build_observation(prev, state, map);
    history.push_back(obs);

    const TickResult end = check_terminal(state, map, params, tick, max_ticks);
    if (end.terminal) {
      traj.steps.push_back({tick, state, {}, {}, obs});
      traj.outcome = end.outcome;
      break;
    }

    const PolicyContext ctx{tick, state, history, map};
    const AgentAction a_robot = robot(ctx);
    const AgentAction a_human = human(ctx);
    for (double v : {a_robot.fx, a_robot.fy, a_human.fx, a_human.fy}) {
      if (!std::isfinite(v)) {
        throw Error("policy produced a non-finite action at tick " + std::to_string(tick));
      }
    }
    traj.steps.push_back({tick, state, a_robot, a_human, obs});
    prev = state;
    state = step(state, a_robot, a_human, params);
  }
  return traj;
}

// --- JSON-lines -------------------------------------------------------------

void to_json(nlohmann::json& j, const AgentAction& a) { j = nlohmann::json::array({a.fx, a.fy}); }
void from_json(const nlohmann::json& j, AgentAction& a) {
  if (!j.is_array() || j.size() != 2) throw DataError("action must have 2 components");
  a = AgentAction(j[0].get<double>(), j[1].get<double>());
}

void to_json(nlohmann::json& j, const SimParams& p) {
  j = nlohmann::json{{"mass", p.mass},
                     {"inertia", p.inertia},
                     {"lin_damping", p.lin_damping},
                     {"ang_damping", p.ang_damping},
                     {"force_scale", p.force_scale},
                     {"table_length", p.table_length},
                     {"table_width", p.table_width},
                     {"dt", p.dt}};
}
void from_json(const nlohmann::json& j, SimParams& p) {
  p.mass = j.at("mass").get<double>();
  p.inertia = j.at("inertia").get<double>();
  p.lin_damping = j.at("lin_damping").get<double>();
  p.ang_damping = j.at("ang_damping").get<double>();
  p.force_scale = j.at("force_scale").get<double>();
  p.table_length = j.at("table_length").get<double>();
  p.table_width = j.at("table_width").get<double>();
  p.dt = j.at("dt").get<double>();
}

void to_json(nlohmann::json& j, const StepRecord& r) {
  j = nlohmann::json{{"tick", r.tick},
                     {"state", r.state},
                     {"action_robot", r.action_robot},
                     {"action_human", r.action_human},
                     {"obs", r.obs}};
}
void from_json(const nlohmann::json& j, StepRecord& r) {
  r.tick = j.at("tick").get<std::int64_t>();
  r.state = j.at("state").get<TableState>();
  r.action_robot = j.at("action_robot").get<AgentAction>();
  r.action_human = j.at("action_human").get<AgentAction>();
  r.obs = j.at("obs").get<ObservationFrame>();
}

void write_trajectory_jsonl(std::ostream& out, const Trajectory& traj) {
  const nlohmann::json header{{"format", "cocarry-trajectory"},
                              {"version", kTrajectoryFormatVersion},
                              {"map_id", traj.map_id},
                              {"params", traj.params},
                              {"outcome", to_string(traj.outcome)},
                              {"num_steps", traj.steps.size()}};
  out << header.dump() << '\n';
  for (const auto& s : traj.steps) out << nlohmann::json(s).dump() << '\n';
}

Trajectory read_trajectory_jsonl(std::istream& in) {
  Trajectory traj;
  std::string line;
  std::size_t line_no = 0;
  std::size_t expected = 0;
  auto fail = [&](const std::string& what) -> DataError {
    return DataError("trajectory line " + std::to_string(line_no) + ": " + what);
  };

  if (!std::getline(in, line)) {
    line_no = 1;
    throw fail("missing header");
  }
  line_no = 1;
  try {
    const auto header = nlohmann::json::parse(line);
    if (header.at("format").get<std::string>() != "cocarry-trajectory") throw fail("not a trajectory file");
    const int version = header.at("version").get<int>();
    if (version != kTrajectoryFormatVersion) {
      throw fail("unsupported format version " + std::to_string(version));
    }
    traj.map_id = header.at("map_id").get<std::string>();
    traj.params = header.at("params").get<SimParams>();
    traj.outcome = outcome_from_string(header.at("outcome").get<std::string>());
    expected = header.at("num_steps").get<std::size_t>();
  } catch (const DataError&) {
    throw;
  } catch (const std::exception& e) {
    throw fail(e.what());
  }

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      traj.steps.push_back(nlohmann::json::parse(line).get<StepRecord>());
    } catch (const std::exception& e) {
      throw fail(std::string("malformed step record: ") + e.what());
    }
  }
  if (traj.steps.size() != expected) {
    ++line_no;
    throw fail("truncated: expected " + std::to_string(expected) + " steps, found " +
               std::to_string(traj.steps.size()));
  }
  try {
    validate(traj);
  } catch (const Error& e) {
    throw fail(e.what());
  }
  return traj;
}

}  // namespace cocarry
