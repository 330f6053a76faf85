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

#include "cocarry/session.hpp"

#include <chrono>
#include <cmath>
#include <random>

#include "cocarry/datasets.hpp"
#include "cocarry/error.hpp"
#include "cocarry/random.hpp"

namespace cocarry {

std::string to_string(SessionMode m) {
  switch (m) {
    case SessionMode::kHumanHuman: return "human-human";
    case SessionMode::kHumanVrnn: return "human-vrnn";
    case SessionMode::kHumanDecRrt: return "human-decrrt";
    case SessionMode::kReplay: return "replay";
    case SessionMode::kScripted: return "scripted";
  }
  return "unknown";
}

SessionMode session_mode_from_string(const std::string& s) {
  for (auto m : {SessionMode::kHumanHuman, SessionMode::kHumanVrnn, SessionMode::kHumanDecRrt,
                 SessionMode::kReplay, SessionMode::kScripted}) {
    if (to_string(m) == s) return m;
  }
  throw DataError("unknown session mode '" + s + "'");
}

std::string to_string(PartnerType p) {
  switch (p) {
    case PartnerType::kHuman: return "human";
    case PartnerType::kRobot: return "robot";
    case PartnerType::kNone: return "none";
  }
  return "none";
}

PartnerType partner_from_string(const std::string& s) {
  if (s == "human") return PartnerType::kHuman;
  if (s == "robot") return PartnerType::kRobot;
  if (s == "none") return PartnerType::kNone;
  throw DataError("unknown partner type '" + s + "'");
}

bool is_human_mode(SessionMode m) {
  return m == SessionMode::kHumanHuman || m == SessionMode::kHumanVrnn ||
         m == SessionMode::kHumanDecRrt;
}

PartnerType partner_of(SessionMode m) {
  switch (m) {
    case SessionMode::kHumanHuman: return PartnerType::kHuman;
    case SessionMode::kHumanVrnn:
    case SessionMode::kHumanDecRrt: return PartnerType::kRobot;
    default: return PartnerType::kNone;
  }
}

void validate(const SessionConfig& c) {
  validate(c.params);
  validate_map(c.map, c.params.geometry());
  if (c.max_ticks <= 0) throw Error("session max_ticks must be positive");
  if (c.warmup_ticks < 0) throw Error("session warmup_ticks must be non-negative");
  if (c.mode == SessionMode::kReplay) {
    if (!c.replay_log) throw Error("replay mode needs a trajectory log");
    validate(*c.replay_log);
  }
}

// --- messages ----------------------------------------------------------------

void to_json(nlohmann::json& j, const Message& m) {
  j = {{"type", m.type}, {"tick", m.tick}, {"payload", m.payload}};
}

void from_json(const nlohmann::json& j, Message& m) {
  if (!j.is_object()) throw DataError("message must be a JSON object");
  if (!j.contains("type") || !j["type"].is_string()) throw DataError("message lacks a string 'type'");
  if (!j.contains("tick") || !j["tick"].is_number_integer()) {
    throw DataError("message lacks an integer 'tick'");
  }
  if (!j.contains("payload") || !j["payload"].is_object()) {
    throw DataError("message lacks an object 'payload'");
  }
  m.type = j["type"].get<std::string>();
  m.tick = j["tick"].get<std::int64_t>();
  m.payload = j["payload"];
}

// --- buffers -------------------------------------------------------------------

void InputBuffer::put(const AgentAction& a) {
  std::lock_guard lock(mu_);
  value_ = a;
}

AgentAction InputBuffer::latest() const {
  std::lock_guard lock(mu_);
  return value_.value_or(AgentAction{});
}

void PlanBuffer::publish(Plan plan) {
  std::lock_guard lock(mu_);
  if (plan_ && plan.birth_tick < plan_->birth_tick) return;
  plan_ = std::move(plan);
}

std::optional<Plan> PlanBuffer::latest() const {
  std::lock_guard lock(mu_);
  return plan_;
}

// --- trial logs ---------------------------------------------------------------

void to_json(nlohmann::json& j, const TrialLog& log) {
  std::ostringstream traj;
  write_trajectory_jsonl(traj, log.trajectory);
  j = {{"format", "cocarry-trial"},
       {"version", 1},
       {"mode", to_string(log.mode)},
       {"partner", to_string(log.partner)},
       {"turing_response", to_string(log.turing_response)},
       {"wall_seconds", log.wall_seconds},
       {"missed_deadlines", log.missed_deadlines},
       {"plan_lag", log.plan_lag},
       {"valid", log.valid},
       {"seed", log.seed},
       {"trajectory_jsonl", traj.str()}};
}

void from_json(const nlohmann::json& j, TrialLog& log) {
  try {
    if (j.at("format") != "cocarry-trial") throw DataError("not a trial log");
    if (j.at("version") != 1) throw DataError("unsupported trial log version");
    log.mode = session_mode_from_string(j.at("mode").get<std::string>());
    log.partner = partner_from_string(j.at("partner").get<std::string>());
    log.turing_response = partner_from_string(j.at("turing_response").get<std::string>());
    log.wall_seconds = j.at("wall_seconds").get<double>();
    log.missed_deadlines = j.at("missed_deadlines").get<std::int64_t>();
    log.plan_lag = j.at("plan_lag").get<std::vector<std::int64_t>>();
    log.valid = j.at("valid").get<bool>();
    log.seed = j.at("seed").get<std::uint64_t>();
    std::istringstream traj(j.at("trajectory_jsonl").get<std::string>());
    log.trajectory = read_trajectory_jsonl(traj);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed trial log: ") + e.what());
  }
}

void save_trial_log(const TrialLog& log, const std::filesystem::path& path) {
  write_file_atomic(path, nlohmann::json(log).dump(1));
}

TrialLog load_trial_log(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return j.get<TrialLog>();
}

// --- session --------------------------------------------------------------------

namespace {

nlohmann::json pose_json(const Pose2& p) { return {{"x", p.x}, {"y", p.y}, {"theta", p.theta}}; }

nlohmann::json action_json(const AgentAction& a) { return {{"fx", a.fx}, {"fy", a.fy}}; }

}  // namespace

Session::Session(SessionConfig config, const vrnn::Model* model)
    : config_(std::move(config)), model_(model) {
  validate(config_);
  if (config_.mode == SessionMode::kHumanVrnn && model_ == nullptr) {
    throw Error("human-vrnn mode needs a model");
  }
  state_.pose = config_.map.initial_pose;
  traj_.map_id = config_.map.id;
  traj_.params = config_.params;

  switch (config_.mode) {
    case SessionMode::kScripted: {
      std::mt19937_64 rng(derive_seed(config_.seed, 10));
      const Side side = std::bernoulli_distribution(0.5)(rng) ? Side::kAbove : Side::kBelow;
      auto [r, h] = make_demonstrator_pair(config_.map, side, config_.scripted, config_.params,
                                           derive_seed(config_.seed, 11));
      robot_policy_ = std::move(r);
      human_policy_ = std::move(h);
      break;
    }
    case SessionMode::kReplay:
      state_ = config_.replay_log->steps.front().state;
      robot_policy_ = make_replay_policy(*config_.replay_log, Role::kRobot);
      human_policy_ = make_replay_policy(*config_.replay_log, Role::kHuman);
      break;
    case SessionMode::kHumanDecRrt: {
      RrtParams rp = config_.rrt;
      rp.seed = derive_seed(config_.seed, 12);
      const RrtResult r = rrt_plan(state_.pose, config_.map, rp, config_.params.geometry(),
                                   config_.params.dt, 0);
      if (r.status == RrtStatus::kFound) {
        rrt_plan_ = r.plan;
      } else {
        rrt_plan_.waypoints = {{0.0, state_.pose}};
      }
      break;
    }
    default: break;
  }
  if (config_.human_policy) human_policy_ = config_.human_policy;
  if (config_.mode == SessionMode::kHumanVrnn && config_.planning == PlanningMode::kAsync) start_worker();
}

Session::~Session() { stop_worker(); }

void Session::start_worker() {
  worker_ = std::thread([this] {
    const std::uint64_t seed = derive_seed(config_.seed, 13);
    for (;;) {
      PlanRequest req;
      {
        std::unique_lock lock(req_mu_);
        req_cv_.wait(lock, [&] { return stop_.load() || request_.has_value(); });
        if (stop_) return;
        req = std::move(*request_);
        request_.reset();
      }
      plans_.publish(plan_with_model(*model_, req.history, req.state, config_.map, config_.planner,
                                     req.tick, seed));
    }
  });
}

void Session::stop_worker() {
  if (!worker_.joinable()) return;
  {
    std::lock_guard lock(req_mu_);
    stop_ = true;
  }
  req_cv_.notify_all();
  worker_.join();
}

AgentAction Session::robot_action(const PolicyContext& ctx) {
  std::int64_t lag = -1;
  AgentAction a;
  switch (config_.mode) {
    case SessionMode::kHumanHuman:
      a = robot_input_.latest();
      break;
    case SessionMode::kHumanDecRrt:
      a = dec_rrt_policy(rrt_plan_, ctx.state, ctx.tick, config_.dec_rrt_gain);
      lag = ctx.tick - rrt_plan_.birth_tick;
      break;
    case SessionMode::kHumanVrnn:
      if (config_.planning == PlanningMode::kInline) {
        PlannerStep ps = receding_horizon_step(std::move(planner_), ctx.state, ctx.history.back(),
                                               *model_, config_.map, config_.planner, ctx.tick,
                                               derive_seed(config_.seed, 13));
        planner_ = std::move(ps.state);
        if (!planner_.plan.waypoints.empty()) {
          a = ps.action;
          lag = ctx.tick - planner_.plan.birth_tick;
        }
      } else {
        const auto h = static_cast<std::size_t>(model_->hyper.history);
        const auto plan = plans_.latest();
        const bool due = !plan || ctx.tick - plan->birth_tick >= config_.planner.replan_interval;
        if (ctx.history.size() >= h && due) {
          std::lock_guard lock(req_mu_);
          request_ = PlanRequest{{ctx.history.end() - static_cast<std::ptrdiff_t>(h), ctx.history.end()},
                                 ctx.state, ctx.tick};
          req_cv_.notify_one();
        }
        if (plan) {
          a = track_plan(*plan, ctx.state, ctx.tick, config_.planner.gain);
          lag = ctx.tick - plan->birth_tick;
        }
      }
      break;
    case SessionMode::kReplay:
    case SessionMode::kScripted:
      a = robot_policy_(ctx);
      break;
  }
  if (is_human_mode(config_.mode) && config_.mode != SessionMode::kHumanHuman &&
      ctx.tick < config_.warmup_ticks) {
    a = AgentAction{};
  }
  plan_lag_.push_back(lag);
  return a;
}

AgentAction Session::human_action(const PolicyContext& ctx) {
  if (human_policy_) return human_policy_(ctx);
  return human_input_.latest();
}

Message Session::tick() {
  if (finished_) throw Error("session already finished");
  const TableState prev = traj_.steps.empty() ? state_ : traj_.steps.back().state;
  const ObservationFrame obs = build_observation(prev, state_, config_.map);
  history_.push_back(obs);

  StepRecord rec{tick_, state_, {}, {}, obs};
  const TickResult end = check_terminal(state_, config_.map, config_.params, tick_, config_.max_ticks);
  if (!end.terminal) {
    const PolicyContext ctx{tick_, state_, history_, config_.map};
    rec.action_robot = robot_action(ctx);
    rec.action_human = human_action(ctx);
    for (double v : {rec.action_robot.fx, rec.action_robot.fy, rec.action_human.fx, rec.action_human.fy}) {
      if (!std::isfinite(v)) throw Error("non-finite action at tick " + std::to_string(tick_));
    }
  }
  traj_.steps.push_back(rec);

  Message m{"state", tick_, {}};
  m.payload = {{"pose", pose_json(state_.pose)},
               {"lin_vel", vec2_to_json(state_.lin_vel)},
               {"ang_vel", state_.ang_vel},
               {"actions", {{"robot", action_json(rec.action_robot)}, {"human", action_json(rec.action_human)}}},
               {"obstacles", config_.map.obstacles},
               {"goal", config_.map.goal},
               {"bounds", config_.map.bounds}};
  nlohmann::json overlay = nlohmann::json::array();
  if (config_.mode == SessionMode::kHumanVrnn) {
    std::optional<Plan> plan = config_.planning == PlanningMode::kInline
                                   ? (planner_.plan.waypoints.empty() ? std::nullopt : std::optional(planner_.plan))
                                   : plans_.latest();
    if (plan) {
      for (const auto& w : plan->waypoints) overlay.push_back(pose_json(w.pose));
    }
  } else if (config_.mode == SessionMode::kHumanDecRrt) {
    for (const auto& w : rrt_plan_.waypoints) overlay.push_back(pose_json(w.pose));
  }
  m.payload["plan"] = std::move(overlay);

  if (end.terminal) {
    finish(end.outcome);
  } else {
    state_ = step(state_, rec.action_robot, rec.action_human, config_.params);
    ++tick_;
  }
  return m;
}

void Session::finish(Outcome outcome) {
  finished_ = true;
  traj_.outcome = outcome;
  stop_worker();
}

Message Session::start_message() const {
  return {"trial_event",
          0,
          {{"event", "start"},
           {"protocol_version", kProtocolVersion},
           {"map_id", config_.map.id},
           {"tick_rate", kTickRate}}};
}

Message Session::end_message() const {
  return {"trial_event",
          tick_,
          {{"event", "end"}, {"outcome", to_string(traj_.outcome)}, {"duration", traj_.duration()}}};
}

std::optional<Message> Session::handle(const Message& m) {
  auto error = [&](const std::string& what) {
    return Message{"error", m.tick, {{"message", what}}};
  };
  if (m.type == "input") {
    const auto& p = m.payload;
    if (!p.contains("agent") || !p["agent"].is_string() || !p.contains("fx") || !p["fx"].is_number() ||
        !p.contains("fy") || !p["fy"].is_number()) {
      return error("input needs agent, fx, fy");
    }
    const double fx = p["fx"].get<double>();
    const double fy = p["fy"].get<double>();
    if (!std::isfinite(fx) || !std::isfinite(fy)) return error("input must be finite");
    const std::string agent = p["agent"].get<std::string>();
    if (agent == "human") {
      human_input_.put(AgentAction(fx, fy));
    } else if (agent == "robot" && config_.mode == SessionMode::kHumanHuman) {
      robot_input_.put(AgentAction(fx, fy));
    } else {
      return error("agent '" + agent + "' is not driven by a client in this mode");
    }
    return std::nullopt;
  }
  if (m.type == "turing_response") {
    const auto& p = m.payload;
    if (!p.contains("answer") || !p["answer"].is_string()) return error("turing_response needs an answer");
    const std::string answer = p["answer"].get<std::string>();
    if (answer != "human" && answer != "robot") return error("answer must be 'human' or 'robot'");
    if (!finished_) return error("turing_response before the trial ended");
    {
      std::lock_guard lock(turing_mu_);
      if (!turing_) turing_ = partner_from_string(answer);
    }
    turing_cv_.notify_all();
    return Message{"turing_ack", m.tick, {{"answer", answer}}};
  }
  return error("unexpected message type '" + m.type + "'");
}

std::optional<PartnerType> Session::wait_turing_response(const std::function<bool()>& connected) {
  std::unique_lock lock(turing_mu_);
  while (!turing_) {
    if (!connected()) return std::nullopt;
    turing_cv_.wait_for(lock, std::chrono::milliseconds(50));
  }
  return turing_;
}

TrialLog run_trial(Session& session, Channel& channel) {
  using Clock = std::chrono::steady_clock;
  const auto& cfg = session.config();
  const auto period = std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(cfg.params.dt));
  const auto t0 = Clock::now();

  TrialLog log;
  log.mode = cfg.mode;
  log.partner = partner_of(cfg.mode);
  log.seed = cfg.seed;

  channel.send(session.start_message());
  auto deadline = t0 + period;
  while (!session.finished()) {
    channel.send(session.tick());
    if (session.finished()) break;
    if (!channel.connected()) {
      // The aborted trial keeps the ticks played so far.
      log.valid = false;
      break;
    }
    if (cfg.realtime) {
      const auto now = Clock::now();
      if (now > deadline) {
        ++log.missed_deadlines;
        deadline = now + period;
      } else {
        std::this_thread::sleep_until(deadline);
        deadline += period;
      }
    }
  }
  log.trajectory = session.trajectory();
  if (!log.valid) log.trajectory.outcome = Outcome::kAborted;
  log.plan_lag = session.plan_lag();
  channel.send(log.valid ? session.end_message()
                         : Message{"trial_event", session.current_tick(), {{"event", "end"}, {"outcome", "aborted"}}});

  const bool live_human = is_human_mode(cfg.mode) && !cfg.human_policy;
  if (log.valid && live_human) {
    channel.send({"turing_prompt", session.current_tick(),
                  {{"question", kTuringQuestion}, {"choices", {"human", "robot"}}}});
    const auto answer = session.wait_turing_response([&] { return channel.connected(); });
    log.turing_response = answer.value_or(PartnerType::kNone);
  }
  log.wall_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  return log;
}

void MemoryChannel::send(const Message& m) {
  {
    std::lock_guard lock(mu_);
    messages_.push_back(m);
  }
  if (on_send) on_send(m);
}

std::vector<Message> MemoryChannel::messages() const {
  std::lock_guard lock(mu_);
  return messages_;
}

}  // namespace cocarry
