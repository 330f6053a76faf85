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

#include "cocarry/policies.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <random>

#include "cocarry/error.hpp"
#include "cocarry/random.hpp"

namespace cocarry {

namespace {

constexpr double kBoundsMargin = 0.6;

struct Box {
  Vec2 lo;
  Vec2 hi;
  Vec2 center;
};

// True if the open segment a-b passes through the interior of `box`.
bool segment_hits(const Vec2& a, const Vec2& b, const Box& box) {
  constexpr double kEps = 1e-6;
  double t0 = 0.0;
  double t1 = 1.0;
  const Vec2 d = b - a;
  for (int k = 0; k < 2; ++k) {
    const double lo = box.lo[k] + kEps;
    const double hi = box.hi[k] - kEps;
    if (std::abs(d[k]) < 1e-12) {
      if (a[k] <= lo || a[k] >= hi) return false;
      continue;
    }
    double ta = (lo - a[k]) / d[k];
    double tb = (hi - a[k]) / d[k];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 >= t1) return false;
  }
  return true;
}

bool inside(const Vec2& p, const Box& box) {
  return p.x() > box.lo.x() && p.x() < box.hi.x() && p.y() > box.lo.y() && p.y() < box.hi.y();
}

std::optional<std::vector<Vec2>> route_with(const MapConfig& map, Side side,
                                            const ScriptedParams& params,
                                            const std::vector<double>& clearance) {
  std::vector<Box> boxes;
  for (std::size_t i = 0; i < map.obstacles.size(); ++i) {
    const Obstacle& o = map.obstacles[i];
    const Vec2 r = Vec2::Constant(o.half_extent + clearance[i]);
    boxes.push_back({o.center - r, o.center + r, o.center});
  }

  // Head straight for the goal until within commit_distance of an inflated
  // obstacle, and only choose a side from there.
  const Vec2 start = map.initial_pose.position();
  Vec2 approach = start;
  {
    const Vec2 to_goal = map.goal.center - start;
    const double len = to_goal.norm();
    const Vec2 dir = to_goal / len;
    auto near_box = [&](const Vec2& p) {
      return std::any_of(boxes.begin(), boxes.end(), [&](const Box& b) {
        const Vec2 q = p.cwiseMax(b.lo).cwiseMin(b.hi);
        return (q - p).norm() <= params.commit_distance;
      });
    };
    constexpr double kStep = 0.05;
    if (std::any_of(boxes.begin(), boxes.end(),
                    [&](const Box& b) { return segment_hits(start, map.goal.center, b); })) {
      for (double s = 0.0; s < len && !near_box(start + (s + kStep) * dir); s += kStep) {
        approach = start + (s + kStep) * dir;
      }
    }
  }

  struct Node {
    Vec2 p;
    double penalty = 0.0;
  };
  std::vector<Node> nodes{{approach, 0.0}, {map.goal.center, 0.0}};
  for (const auto& b : boxes) {
    for (const Vec2& corner : {Vec2(b.lo.x(), b.lo.y()), Vec2(b.hi.x(), b.lo.y()),
                              Vec2(b.lo.x(), b.hi.y()), Vec2(b.hi.x(), b.hi.y())}) {
      const Vec2 p = corner + 1e-3 * (corner - b.center).normalized();
      if (p.x() < map.bounds.min_x + kBoundsMargin || p.x() > map.bounds.max_x - kBoundsMargin ||
          p.y() < map.bounds.min_y + kBoundsMargin || p.y() > map.bounds.max_y - kBoundsMargin) {
        continue;
      }
      if (std::any_of(boxes.begin(), boxes.end(), [&](const Box& o) { return inside(p, o); })) continue;
      const bool above = p.y() > b.center.y();
      const bool preferred = (side == Side::kAbove) == above;
      nodes.push_back({p, preferred ? 0.0 : params.side_penalty});
    }
  }

  const std::size_t n = nodes.size();
  auto visible = [&](std::size_t i, std::size_t j) {
    return std::none_of(boxes.begin(), boxes.end(),
                        [&](const Box& b) { return segment_hits(nodes[i].p, nodes[j].p, b); });
  };

  // Dijkstra on a dense graph of at most a few dozen nodes.
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  std::vector<std::size_t> prev(n, n);
  std::vector<bool> done(n, false);
  dist[0] = 0.0;
  for (std::size_t iter = 0; iter < n; ++iter) {
    std::size_t u = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (!done[i] && (u == n || dist[i] < dist[u])) u = i;
    }
    if (u == n || !std::isfinite(dist[u])) break;
    done[u] = true;
    if (u == 1) break;
    for (std::size_t v = 0; v < n; ++v) {
      if (done[v] || !visible(u, v)) continue;
      const double w = (nodes[v].p - nodes[u].p).norm() + nodes[v].penalty;
      if (dist[u] + w < dist[v]) {
        dist[v] = dist[u] + w;
        prev[v] = u;
      }
    }
  }
  if (!std::isfinite(dist[1])) return std::nullopt;

  std::vector<Vec2> route;
  for (std::size_t v = 1; v != n; v = prev[v]) route.push_back(nodes[v].p);
  if ((approach - start).norm() > 1e-9) route.push_back(start);
  std::reverse(route.begin(), route.end());
  return route;
}

}  // namespace

std::vector<Vec2> plan_route(const MapConfig& map, Side side, const ScriptedParams& params,
                             std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(-params.corner_jitter, params.corner_jitter);
  std::vector<double> clearance;
  for (std::size_t i = 0; i < map.obstacles.size(); ++i) {
    clearance.push_back(std::max(0.0, params.clearance + jitter(rng)));
  }
  // Narrow gaps: shrink the inflation until a route exists.
  for (double shrink : {1.0, 0.85, 0.7, 0.55, 0.4}) {
    std::vector<double> c = clearance;
    for (double& v : c) v *= shrink;
    if (auto route = route_with(map, side, params, c)) return *std::move(route);
  }
  throw Error("plan_route: goal unreachable on map '" + map.id + "'");
}

Side side_of(const std::vector<Pose2>& poses) {
  if (poses.size() < 2) throw Error("side_of: need at least 2 poses");
  return poses.back().y - poses.front().y >= 0.0 ? Side::kAbove : Side::kBelow;
}

namespace {

struct AgentState {
  Role role;
  std::vector<Vec2> route;
  double cruise;
  ScriptedParams params;
  SimParams sim;
  std::mt19937_64 rng;
  std::normal_distribution<double> normal{0.0, 1.0};
  std::size_t segment = 0;
  Vec2 noise = Vec2::Zero();
};

// Point `lookahead` metres further along the route than the projection of
// `p` onto the current or a later segment.
Vec2 carrot(AgentState& s, const Vec2& p) {
  const auto& r = s.route;
  double best = std::numeric_limits<double>::infinity();
  std::size_t best_seg = s.segment;
  double best_t = 0.0;
  for (std::size_t i = s.segment; i + 1 < r.size(); ++i) {
    const Vec2 d = r[i + 1] - r[i];
    const double len2 = d.squaredNorm();
    const double t = len2 > 0.0 ? std::clamp((p - r[i]).dot(d) / len2, 0.0, 1.0) : 0.0;
    const double dist = (r[i] + t * d - p).norm();
    if (dist < best) {
      best = dist;
      best_seg = i;
      best_t = t;
    }
  }
  s.segment = best_seg;
  double remaining = s.params.lookahead;
  Vec2 at = r[best_seg] + best_t * (r[best_seg + 1] - r[best_seg]);
  for (std::size_t i = best_seg; i + 1 < r.size(); ++i) {
    const double left = (r[i + 1] - at).norm();
    if (left >= remaining) return at + remaining * (r[i + 1] - at).normalized();
    remaining -= left;
    at = r[i + 1];
  }
  return r.back();
}

AgentAction act(AgentState& s, const PolicyContext& ctx) {
  const TableState& st = ctx.state;
  const Vec2 p = st.pose.position();
  const Vec2 to_carrot = carrot(s, p) - p;
  Vec2 v_des = to_carrot.norm() > 1e-9 ? Vec2(s.cruise * to_carrot.normalized()) : Vec2(Vec2::Zero());
  const double c = s.params.compliance;
  if (c > 0.0 && st.lin_vel.norm() > 0.05) {
    v_des = (1.0 - c) * v_des + c * s.cruise * st.lin_vel.normalized();
  }

  const Vec2 force = s.sim.lin_damping * v_des + s.sim.mass * s.params.velocity_gain * (v_des - st.lin_vel);
  double torque = 0.0;
  if (v_des.norm() > 1e-9) {
    const double e = wrap_angle(std::atan2(v_des.y(), v_des.x()) - st.pose.theta);
    torque = s.sim.inertia * (s.params.heading_gain * e - s.params.heading_damping * st.ang_vel);
  }
  const Vec2 normal(-std::sin(st.pose.theta), std::cos(st.pose.theta));
  const double perp = (s.role == Role::kRobot ? 1.0 : -1.0) * torque / s.sim.table_length;

  const double dt = s.sim.dt;
  const double tau = s.params.noise_tau;
  const double kick = s.params.noise_sigma * std::sqrt(2.0 * dt / tau);
  s.noise += -s.noise * dt / tau + kick * Vec2(s.normal(s.rng), s.normal(s.rng));

  const Vec2 a = (0.5 * force + perp * normal) / s.sim.force_scale + s.noise;
  return AgentAction(a.x(), a.y());
}

double draw_cruise(const ScriptedParams& params, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return std::uniform_real_distribution<double>(params.cruise_min, params.cruise_max)(rng);
}

}  // namespace

Policy make_scripted_agent(Role role, std::vector<Vec2> route, double cruise,
                           const ScriptedParams& params, const SimParams& sim, std::uint64_t seed) {
  if (route.size() < 2) throw Error("scripted agent needs a route of at least 2 points");
  auto state = std::make_shared<AgentState>(
      AgentState{role, std::move(route), cruise, params, sim, std::mt19937_64(seed)});
  return [state](const PolicyContext& ctx) { return act(*state, ctx); };
}

std::pair<Policy, Policy> make_demonstrator_pair(const MapConfig& map, Side side,
                                                 const ScriptedParams& params,
                                                 const SimParams& sim, std::uint64_t seed) {
  auto route = plan_route(map, side, params, derive_seed(seed, 0));
  const double cruise = draw_cruise(params, derive_seed(seed, 1));
  return {make_scripted_agent(Role::kRobot, route, cruise, params, sim, derive_seed(seed, 2)),
          make_scripted_agent(Role::kHuman, route, cruise, params, sim, derive_seed(seed, 3))};
}

ScriptedParams noisy_human_params() {
  ScriptedParams p;
  p.compliance = 0.4;
  return p;
}

Policy make_noisy_human(const MapConfig& map, const ScriptedParams& params, const SimParams& sim,
                        std::uint64_t seed) {
  std::mt19937_64 rng(derive_seed(seed, 0));
  const Side side = std::bernoulli_distribution(0.5)(rng) ? Side::kAbove : Side::kBelow;
  auto route = plan_route(map, side, params, derive_seed(seed, 1));
  const double cruise = draw_cruise(params, derive_seed(seed, 2));
  return make_scripted_agent(Role::kHuman, std::move(route), cruise, params, sim, derive_seed(seed, 3));
}

Policy make_replay_policy(const Trajectory& traj, Role role) {
  auto steps = std::make_shared<const std::vector<StepRecord>>(traj.steps);
  return [steps, role](const PolicyContext& ctx) {
    if (ctx.tick < 0 || ctx.tick >= static_cast<std::int64_t>(steps->size())) return AgentAction{};
    const auto& s = (*steps)[static_cast<std::size_t>(ctx.tick)];
    return role == Role::kRobot ? s.action_robot : s.action_human;
  };
}

}  // namespace cocarry
