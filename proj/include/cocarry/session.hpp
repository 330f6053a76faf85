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

// Real-time trial orchestration. A session owns the simulator state and runs
// a fixed-rate tick loop; inputs arrive through a latest-wins buffer and
// planner output through a latest-completed plan buffer.
//
// Wire protocol (JSON text frames, version 1). Every message is
//   {"type": <string>, "tick": <int>, "payload": <object>}
// Server to client:
//   state          pose {x, y, theta} (m, rad), lin_vel [vx, vy] (m/s),
//                  ang_vel (rad/s), actions {robot, human} as {fx, fy} in
//                  [-1, 1], obstacles, goal, bounds, plan [{x, y, theta}]
//   trial_event    {event: "start", protocol_version, map_id, tick_rate} or
//                  {event: "end", outcome, duration (s)}
//   turing_prompt  {question, choices: ["human", "robot"]}
//   turing_ack     {answer}
//   error          {message}
// Client to server:
//   input           {agent: "human" | "robot", fx, fy}
//   turing_response {answer: "human" | "robot"}

#ifndef COCARRY_SESSION_HPP_
#define COCARRY_SESSION_HPP_

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "cocarry/planners.hpp"
#include "cocarry/policies.hpp"
#include "cocarry/sim.hpp"
#include "cocarry/vrnn.hpp"
#include "cocarry/world.hpp"

namespace cocarry {

inline constexpr int kProtocolVersion = 1;
inline constexpr int kTickRate = 30;
inline constexpr const char* kTuringQuestion =
    "Do you think that the other player was controlled by a human or a robot?";

enum class SessionMode { kHumanHuman, kHumanVrnn, kHumanDecRrt, kReplay, kScripted };

std::string to_string(SessionMode m);
SessionMode session_mode_from_string(const std::string& s);

enum class PartnerType { kHuman, kRobot, kNone };
std::string to_string(PartnerType p);
PartnerType partner_from_string(const std::string& s);

enum class PlanningMode {
  kInline,  // plans are computed on the tick thread; deterministic
  kAsync,   // a worker thread computes plans; ticks use the latest completed one
};

struct SessionConfig {
  SessionMode mode = SessionMode::kScripted;
  MapConfig map;
  SimParams params;
  RecedingHorizonSettings planner;
  RrtParams rrt;
  double dec_rrt_gain = 2.0;
  PlanningMode planning = PlanningMode::kInline;
  std::int64_t max_ticks = kDefaultMaxTicks;
  int warmup_ticks = kTickRate;  // robot holds still while history accumulates
  std::uint64_t seed = 0;
  bool realtime = false;  // pace ticks at the tick rate
  ScriptedParams scripted;
  std::optional<Trajectory> replay_log;  // required in replay mode
  // Replaces buffered human input when set, e.g. with a scripted partner.
  Policy human_policy;
};

// Throws Error on an inconsistent configuration.
void validate(const SessionConfig& config);

struct Message {
  std::string type;
  std::int64_t tick = 0;
  nlohmann::json payload = nlohmann::json::object();
};

void to_json(nlohmann::json& j, const Message& m);
// Throws DataError on a malformed message.
void from_json(const nlohmann::json& j, Message& m);

// Single-writer, latest-wins mailbox for one agent's action.
class InputBuffer {
 public:
  void put(const AgentAction& a);
  // Latest action, or zero if none has arrived.
  AgentAction latest() const;

 private:
  mutable std::mutex mu_;
  std::optional<AgentAction> value_;
};

// Latest completed plan; readers never wait for a plan in progress.
class PlanBuffer {
 public:
  void publish(Plan plan);
  std::optional<Plan> latest() const;

 private:
  mutable std::mutex mu_;
  std::optional<Plan> plan_;
};

struct TrialLog {
  Trajectory trajectory;
  SessionMode mode = SessionMode::kScripted;
  PartnerType partner = PartnerType::kNone;  // ground truth
  PartnerType turing_response = PartnerType::kNone;
  double wall_seconds = 0.0;
  std::int64_t missed_deadlines = 0;
  // Per tick, (k - j) for an action at tick k from a plan born at tick j;
  // -1 when no plan was involved.
  std::vector<std::int64_t> plan_lag;
  bool valid = true;
  std::uint64_t seed = 0;
};

void to_json(nlohmann::json& j, const TrialLog& log);
void from_json(const nlohmann::json& j, TrialLog& log);
void save_trial_log(const TrialLog& log, const std::filesystem::path& path);
TrialLog load_trial_log(const std::filesystem::path& path);

// Outgoing side of a client connection.
class Channel {
 public:
  virtual ~Channel() = default;
  virtual void send(const Message& m) = 0;
  virtual bool connected() const = 0;
};

class Session {
 public:
  // `model` is required in human-vrnn mode and must outlive the session.
  Session(SessionConfig config, const vrnn::Model* model = nullptr);
  ~Session();
  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  // Thread-safe: routes `input` and `turing_response` messages. Returns an
  // error message for anything malformed or unexpected.
  std::optional<Message> handle(const Message& m);

  // Advances one tick and returns the state broadcast. Throws Error once the
  // trial has ended.
  Message tick();

  bool finished() const { return finished_.load(); }
  std::int64_t current_tick() const { return tick_; }
  const Trajectory& trajectory() const { return traj_; }
  const std::vector<std::int64_t>& plan_lag() const { return plan_lag_; }
  const SessionConfig& config() const { return config_; }

  Message start_message() const;
  Message end_message() const;

  // Blocks until a Turing response arrives or `connected` turns false.
  std::optional<PartnerType> wait_turing_response(const std::function<bool()>& connected);

 private:
  AgentAction robot_action(const PolicyContext& ctx);
  AgentAction human_action(const PolicyContext& ctx);
  void finish(Outcome outcome);
  void start_worker();
  void stop_worker();

  SessionConfig config_;
  const vrnn::Model* model_;
  TableState state_;
  Trajectory traj_;
  std::vector<ObservationFrame> history_;
  std::int64_t tick_ = 0;
  std::atomic<bool> finished_{false};

  InputBuffer human_input_;
  InputBuffer robot_input_;
  PlanBuffer plans_;
  std::vector<std::int64_t> plan_lag_;

  Policy robot_policy_;
  Policy human_policy_;
  PlannerState planner_;
  Plan rrt_plan_;

  std::mutex turing_mu_;
  std::condition_variable turing_cv_;
  std::optional<PartnerType> turing_;

  // Async planning: the tick thread posts (history, state, tick) requests.
  struct PlanRequest {
    std::vector<ObservationFrame> history;
    TableState state;
    std::int64_t tick;
  };
  std::mutex req_mu_;
  std::condition_variable req_cv_;
  std::optional<PlanRequest> request_;
  std::atomic<bool> stop_{false};
  std::thread worker_;
};

bool is_human_mode(SessionMode m);
PartnerType partner_of(SessionMode m);

// Warm-up, live loop to termination, state broadcasts, then the Turing prompt
// in human modes. A disconnect aborts the trial and marks it invalid.
TrialLog run_trial(Session& session, Channel& channel);

// Channel that records every message; always connected unless told otherwise.
class MemoryChannel : public Channel {
 public:
  void send(const Message& m) override;
  bool connected() const override { return connected_; }
  void disconnect() { connected_ = false; }
  std::vector<Message> messages() const;

  // Called synchronously for each message, e.g. to answer a Turing prompt.
  std::function<void(const Message&)> on_send;

 private:
  mutable std::mutex mu_;
  std::vector<Message> messages_;
  std::atomic<bool> connected_{true};
};

}  // namespace cocarry

#endif  // COCARRY_SESSION_HPP_
