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

#include "cocarry/planners.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "cocarry/error.hpp"
#include "cocarry/random.hpp"

namespace cocarry {

namespace {

Pose2 interpolate(const Pose2& a, const Pose2& b, double s) {
  const double dtheta = wrap_angle(b.theta - a.theta);
  return Pose2(a.x + s * (b.x - a.x), a.y + s * (b.y - a.y), a.theta + s * dtheta);
}

}  // namespace

void validate(const Plan& plan) {
  if (plan.waypoints.empty()) throw Error("plan has no waypoints");
  for (std::size_t i = 1; i < plan.waypoints.size(); ++i) {
    if (!(plan.waypoints[i].tick > plan.waypoints[i - 1].tick)) {
      throw Error("plan timestamps are not strictly increasing at waypoint " + std::to_string(i));
    }
  }
}

Pose2 plan_pose_at(const Plan& plan, double tick) {
  const auto& w = plan.waypoints;
  if (w.empty()) throw Error("plan has no waypoints");
  if (tick <= w.front().tick) return w.front().pose;
  if (tick >= w.back().tick) return w.back().pose;
  const auto it = std::upper_bound(w.begin(), w.end(), tick,
                                   [](double t, const Waypoint& wp) { return t < wp.tick; });
  const Waypoint& b = *it;
  const Waypoint& a = *(it - 1);
  return interpolate(a.pose, b.pose, (tick - a.tick) / (b.tick - a.tick));
}

void to_json(nlohmann::json& j, const Plan& p) {
  nlohmann::json wps = nlohmann::json::array();
  for (const auto& w : p.waypoints) {
    wps.push_back({{"tick", w.tick}, {"x", w.pose.x}, {"y", w.pose.y}, {"theta", w.pose.theta}});
  }
  j = nlohmann::json{{"birth_tick", p.birth_tick}, {"waypoints", wps}};
}

void from_json(const nlohmann::json& j, Plan& p) {
  p.birth_tick = j.at("birth_tick").get<std::int64_t>();
  p.waypoints.clear();
  for (const auto& w : j.at("waypoints")) {
    Waypoint wp;
    wp.tick = w.at("tick").get<double>();
    wp.pose.x = w.at("x").get<double>();
    wp.pose.y = w.at("y").get<double>();
    wp.pose.theta = w.at("theta").get<double>();
    p.waypoints.push_back(wp);
  }
}

AgentAction p_controller(const TableState& state, const Pose2& target, double gain) {
  const Vec2 e = target.position() - state.pose.position();
  return AgentAction(gain * e.x(), gain * e.y());
}

// --- RRT ----------------------------------------------------------------------

double se2_distance(const Pose2& a, const Pose2& b, double angular_weight) {
  return std::hypot(b.x - a.x, b.y - a.y) + angular_weight * std::abs(wrap_angle(b.theta - a.theta));
}

namespace {

bool edge_free(const Pose2& a, const Pose2& b, const MapConfig& map, const TableGeometry& geom,
               double angular_weight, double resolution) {
  const double d = se2_distance(a, b, angular_weight);
  const int n = std::max(1, static_cast<int>(std::ceil(d / resolution)));
  for (int k = 1; k <= n; ++k) {
    if (check_collision(interpolate(a, b, static_cast<double>(k) / n), map, geom)) return false;
  }
  return true;
}

struct TreeNode {
  Pose2 pose;
  std::size_t parent;
};

}  // namespace

RrtResult rrt_plan(const Pose2& start, const MapConfig& map, const RrtParams& params,
                   const TableGeometry& geom, double dt, std::int64_t start_tick) {
  if (!(params.step_size > 0.0)) throw Error("rrt: step_size must be positive");
  if (!(params.edge_resolution > 0.0)) throw Error("rrt: edge_resolution must be positive");
  if (!(params.goal_bias >= 0.0 && params.goal_bias <= 1.0)) throw Error("rrt: goal_bias must be in [0, 1]");
  if (check_collision(start, map, geom)) throw Error("rrt: start pose is in collision");

  std::mt19937_64 rng(params.seed);
  std::uniform_real_distribution<double> ux(map.bounds.min_x, map.bounds.max_x);
  std::uniform_real_distribution<double> uy(map.bounds.min_y, map.bounds.max_y);
  std::uniform_real_distribution<double> ut(-std::numbers::pi, std::numbers::pi);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  const double resolution = params.edge_resolution;

  std::vector<TreeNode> tree{{start, 0}};
  RrtResult result;
  auto finish = [&](std::size_t leaf) {
    std::vector<Pose2> path;
    for (std::size_t i = leaf;; i = tree[i].parent) {
      path.push_back(tree[i].pose);
      if (i == 0) break;
    }
    std::reverse(path.begin(), path.end());
    Plan plan;
    plan.birth_tick = start_tick;
    double tick = static_cast<double>(start_tick);
    for (std::size_t i = 0; i < path.size(); ++i) {
      if (i > 0) tick += se2_distance(path[i - 1], path[i], params.angular_weight) / (params.nominal_speed * dt);
      plan.waypoints.push_back({tick, path[i]});
    }
    result.status = RrtStatus::kFound;
    result.plan = std::move(plan);
  };

  if (check_success(start, map.goal)) {
    finish(0);
    result.tree_size = 1;
    return result;
  }

  for (int iter = 1; iter <= params.max_iters; ++iter) {
    result.iterations = iter;
    const double theta = ut(rng);
    const bool to_goal = coin(rng) < params.goal_bias;
    const double x = ux(rng);
    const double y = uy(rng);
    const Pose2 sample = to_goal ? Pose2(map.goal.center.x(), map.goal.center.y(), theta) : Pose2(x, y, theta);

    std::size_t nearest = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < tree.size(); ++i) {
      const double d = se2_distance(tree[i].pose, sample, params.angular_weight);
      if (d < best) {
        best = d;
        nearest = i;
      }
    }
    const Pose2& from = tree[nearest].pose;
    const Pose2 to = best <= params.step_size ? sample : interpolate(from, sample, params.step_size / best);
    if (!edge_free(from, to, map, geom, params.angular_weight, resolution)) continue;

    tree.push_back({to, nearest});
    if (check_success(to, map.goal)) {
      finish(tree.size() - 1);
      break;
    }
  }
  result.tree_size = tree.size();
  return result;
}

bool plan_collision_free(const Plan& plan, const MapConfig& map, const TableGeometry& geom,
                         double angular_weight, double resolution) {
  const auto& w = plan.waypoints;
  if (w.empty()) return false;
  if (check_collision(w.front().pose, map, geom)) return false;
  for (std::size_t i = 1; i < w.size(); ++i) {
    if (!edge_free(w[i - 1].pose, w[i].pose, map, geom, angular_weight, resolution)) return false;
  }
  return true;
}

AgentAction dec_rrt_policy(const Plan& plan, const TableState& state, std::int64_t tick, double gain) {
  return p_controller(state, plan_pose_at(plan, static_cast<double>(tick)), gain);
}

// --- receding horizon ---------------------------------------------------------

double cost(std::span<const Pose2> rollout, const MapConfig& map, const CostParams& cp,
            const TableGeometry& geom) {
  if (rollout.empty()) return 0.0;
  const double start_dist = (rollout.front().position() - map.goal.center).norm();
  const double end_dist = (rollout.back().position() - map.goal.center).norm();
  const bool collides = std::any_of(rollout.begin(), rollout.end(),
                                    [&](const Pose2& p) { return check_collision(p, map, geom); });
  return cp.w_goal * end_dist + (collides ? cp.w_collision : 0.0) -
         cp.w_progress * (start_dist - end_dist);
}

Selection select_rollout(const std::vector<std::vector<Pose2>>& rollouts, const Pose2& start,
                         const MapConfig& map, const CostParams& cp, const TableGeometry& geom) {
  if (rollouts.empty()) throw Error("select_rollout: empty batch");
  Selection sel;
  std::vector<Pose2> path;
  for (const auto& r : rollouts) {
    path.assign(1, start);
    path.insert(path.end(), r.begin(), r.end());
    sel.costs.push_back(cost(path, map, cp, geom));
  }
  sel.index = static_cast<std::size_t>(std::min_element(sel.costs.begin(), sel.costs.end()) - sel.costs.begin());
  return sel;
}

Plan plan_with_model(const vrnn::Model& model, std::span<const ObservationFrame> history,
                     const TableState& state, const MapConfig& map,
                     const RecedingHorizonSettings& settings, std::int64_t tick,
                     std::uint64_t seed, Selection* selection) {
  vrnn::RolloutRequest req;
  req.history = history;
  req.start = state.pose;
  req.map = &map;
  req.n_samples = settings.n_samples;
  req.horizon = settings.horizon;
  req.seed = derive_seed(seed, static_cast<std::uint64_t>(tick));
  const auto rollouts = vrnn::sample_pose_rollouts(model, req);
  Selection sel = select_rollout(rollouts, state.pose, map, settings.cost, settings.geometry);

  Plan plan;
  plan.birth_tick = tick;
  const auto& best = rollouts[sel.index];
  for (std::size_t k = 0; k < best.size(); ++k) {
    plan.waypoints.push_back({static_cast<double>(tick + 1 + static_cast<std::int64_t>(k)), best[k]});
  }
  if (plan.waypoints.empty()) plan.waypoints.push_back({static_cast<double>(tick + 1), state.pose});
  if (selection != nullptr) *selection = std::move(sel);
  return plan;
}

AgentAction track_plan(const Plan& plan, const TableState& state, std::int64_t tick, double gain) {
  return p_controller(state, plan_pose_at(plan, static_cast<double>(tick + 1)), gain);
}

PlannerStep receding_horizon_step(PlannerState ps, const TableState& state,
                                  const ObservationFrame& obs, const vrnn::Model& model,
                                  const MapConfig& map, const RecedingHorizonSettings& settings,
                                  std::int64_t tick, std::uint64_t seed) {
  vrnn::check_shapes(model.params, model.hyper);
  const auto h_len = static_cast<std::size_t>(model.hyper.history);
  ps.history.push_back(obs);
  while (ps.history.size() > h_len) ps.history.pop_front();

  PlannerStep out;
  if (ps.history.size() < h_len) {
    out.state = std::move(ps);
    return out;
  }
  const bool due = ps.plan.waypoints.empty() || tick - ps.plan.birth_tick >= settings.replan_interval;
  if (due) {
    const std::vector<ObservationFrame> hist(ps.history.begin(), ps.history.end());
    ps.plan = plan_with_model(model, hist, state, map, settings, tick, seed);
    out.replanned = true;
  }
  out.action = track_plan(ps.plan, state, tick, settings.gain);
  out.state = std::move(ps);
  return out;
}

}  // namespace cocarry
