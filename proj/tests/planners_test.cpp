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

// Tests for plan interpolation, the RRT baselines and the receding-horizon
// planner.

#include <chrono>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "cocarry/datasets.hpp"
#include "cocarry/error.hpp"
#include "cocarry/planners.hpp"

namespace cocarry {
namespace {

MapConfig OpenMap() {
  MapConfig m;
  m.id = "open";
  m.initial_pose = Pose2(2.0, 4.0, 0.0);
  m.goal = {{10.0, 4.0}, 0.5};
  return m;
}

MapConfig WallMap() {
  MapConfig m = OpenMap();
  m.id = "wall";
  m.obstacles = {{{6.0, 4.0}, 1.0}};
  return m;
}

Plan TwoPointPlan() {
  Plan p;
  p.waypoints = {{0.0, Pose2(0, 0, 0)}, {10.0, Pose2(10, 20, std::numbers::pi / 2)}};
  return p;
}

TEST(PlanPoseAt, InterpolatesAndHoldsEnds) {
  const Plan p = TwoPointPlan();
  const Pose2 mid = plan_pose_at(p, 5.0);
  EXPECT_DOUBLE_EQ(mid.x, 5.0);
  EXPECT_DOUBLE_EQ(mid.y, 10.0);
  EXPECT_DOUBLE_EQ(mid.theta, std::numbers::pi / 4);
  EXPECT_EQ(plan_pose_at(p, -3.0), p.waypoints.front().pose);
  EXPECT_EQ(plan_pose_at(p, 42.0), p.waypoints.back().pose);
  EXPECT_EQ(plan_pose_at(p, 10.0), p.waypoints.back().pose);
}

TEST(PlanPoseAt, ThetaTakesTheShortArc) {
  Plan p;
  p.waypoints = {{0.0, Pose2(0, 0, 3.0)}, {2.0, Pose2(0, 0, -3.0)}};
  // The short way across pi: 3.0 -> pi -> -3.0, midpoint at pi.
  EXPECT_NEAR(std::abs(plan_pose_at(p, 1.0).theta), std::numbers::pi, 1e-12);
}

TEST(PlanPoseAt, EmptyPlanThrows) { EXPECT_THROW(plan_pose_at(Plan{}, 0.0), Error); }

TEST(Plan, ValidateRejectsNonIncreasingTicks) {
  Plan p = TwoPointPlan();
  EXPECT_NO_THROW(validate(p));
  p.waypoints[1].tick = 0.0;
  EXPECT_THROW(validate(p), Error);
}

TEST(Plan, JsonRoundTrip) {
  Plan p = TwoPointPlan();
  p.birth_tick = 17;
  const Plan back = nlohmann::json(p).get<Plan>();
  EXPECT_EQ(back.birth_tick, 17);
  ASSERT_EQ(back.waypoints.size(), 2u);
  EXPECT_EQ(back.waypoints[1].pose, p.waypoints[1].pose);
  EXPECT_EQ(back.waypoints[1].tick, 10.0);
}

TEST(PController, ProportionalAndClipped) {
  TableState s;
  s.pose = Pose2(1.0, 1.0, 0.0);
  const AgentAction a = p_controller(s, Pose2(1.2, 0.9, 1.0), 2.0);
  EXPECT_NEAR(a.fx, 0.4, 1e-15);
  EXPECT_NEAR(a.fy, -0.2, 1e-15);
  const AgentAction big = p_controller(s, Pose2(9.0, -9.0, 0.0), 2.0);
  EXPECT_EQ(big.fx, 1.0);
  EXPECT_EQ(big.fy, -1.0);
}

TEST(DecRrtPolicy, TracksTheTimeIndexedPose) {
  const Plan p = TwoPointPlan();
  TableState s;
  const AgentAction a = dec_rrt_policy(p, s, 1, 0.1);
  // Target at tick 1 is (1, 2).
  EXPECT_NEAR(a.fx, 0.1, 1e-15);
  EXPECT_NEAR(a.fy, 0.2, 1e-15);
}

TEST(Se2Distance, WeightsWrappedAngle) {
  EXPECT_DOUBLE_EQ(se2_distance(Pose2(0, 0, 0), Pose2(3, 4, 0), 0.3), 5.0);
  EXPECT_NEAR(se2_distance(Pose2(0, 0, 3.0), Pose2(0, 0, -3.0), 1.0), 2 * std::numbers::pi - 6.0, 1e-12);
}

TEST(Rrt, FindsCollisionFreePlanAroundWall) {
  const MapConfig map = WallMap();
  RrtParams params;
  params.seed = 3;
  const TableGeometry geom;
  const RrtResult r = rrt_plan(map.initial_pose, map, params, geom, 1.0 / 30.0, 5);
  ASSERT_EQ(r.status, RrtStatus::kFound);
  EXPECT_NO_THROW(validate(r.plan));
  EXPECT_EQ(r.plan.birth_tick, 5);
  EXPECT_EQ(r.plan.waypoints.front().tick, 5.0);
  EXPECT_EQ(r.plan.waypoints.front().pose, map.initial_pose);
  EXPECT_TRUE(check_success(r.plan.waypoints.back().pose, map.goal));
  EXPECT_TRUE(plan_collision_free(r.plan, map, geom, params.angular_weight, 0.01));
  EXPECT_LE(r.iterations, params.max_iters);
}

TEST(Rrt, WaypointTimingFollowsMetricDistance) {
  const MapConfig map = OpenMap();
  RrtParams params;
  params.seed = 1;
  const double dt = 1.0 / 30.0;
  const RrtResult r = rrt_plan(map.initial_pose, map, params, {}, dt);
  ASSERT_EQ(r.status, RrtStatus::kFound);
  const auto& w = r.plan.waypoints;
  for (std::size_t i = 1; i < w.size(); ++i) {
    const double want = se2_distance(w[i - 1].pose, w[i].pose, params.angular_weight) /
                        (params.nominal_speed * dt);
    EXPECT_NEAR(w[i].tick - w[i - 1].tick, want, 1e-9);
    EXPECT_LE(se2_distance(w[i - 1].pose, w[i].pose, params.angular_weight), params.step_size + 1e-12);
  }
}

TEST(Rrt, SameSeedSamePlan) {
  const MapConfig map = WallMap();
  RrtParams params;
  params.seed = 11;
  const RrtResult a = rrt_plan(map.initial_pose, map, params, {});
  const RrtResult b = rrt_plan(map.initial_pose, map, params, {});
  ASSERT_EQ(a.plan.waypoints.size(), b.plan.waypoints.size());
  for (std::size_t i = 0; i < a.plan.waypoints.size(); ++i) {
    EXPECT_EQ(a.plan.waypoints[i].pose, b.plan.waypoints[i].pose);
  }
}

TEST(Rrt, StartInGoalIsASingleWaypoint) {
  MapConfig map = OpenMap();
  map.initial_pose = Pose2(10.0, 4.0, 0.0);
  const RrtResult r = rrt_plan(map.initial_pose, map, {}, {});
  ASSERT_EQ(r.status, RrtStatus::kFound);
  EXPECT_EQ(r.plan.waypoints.size(), 1u);
}

TEST(Rrt, ExhaustionIsAResultAndCollidingStartThrows) {
  MapConfig map = OpenMap();
  // Wall spanning the whole field height.
  for (double y = 0.5; y < 8.0; y += 1.0) map.obstacles.push_back({{6.0, y}, 0.5});
  RrtParams params;
  params.max_iters = 300;
  const RrtResult r = rrt_plan(map.initial_pose, map, params, {});
  EXPECT_EQ(r.status, RrtStatus::kExhausted);
  EXPECT_TRUE(r.plan.waypoints.empty());
  EXPECT_EQ(r.iterations, 300);
  EXPECT_THROW(rrt_plan(Pose2(6.0, 4.0, 0.0), map, params, {}), Error);
}

TEST(Rrt, CatalogSampleSucceedsQuickly) {
  const auto maps = generate_maps(default_catalog());
  RrtParams params;
  int found = 0;
  for (std::size_t i = 0; i < maps.size(); i += 9) {
    params.seed = i;
    const auto t0 = std::chrono::steady_clock::now();
    const RrtResult r = rrt_plan(maps[i].initial_pose, maps[i], params, {});
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (r.status == RrtStatus::kFound) {
      ++found;
      EXPECT_TRUE(plan_collision_free(r.plan, maps[i], {}, params.angular_weight, 0.02)) << maps[i].id;
    }
    EXPECT_LT(secs, 5.0) << maps[i].id;
  }
  EXPECT_EQ(found, 7);
}

// --- cost and selection ---------------------------------------------------------

TEST(Cost, HandComputedTerms) {
  const MapConfig map = WallMap();
  const CostParams cp{1.0, 100.0, 0.5};
  // From 8 m to 2 m from the goal, clear of the wall.
  const std::vector<Pose2> free_path = {Pose2(2.0, 1.0, 0.0), Pose2(8.0, 1.0, 0.0)};
  const double d0 = std::hypot(8.0, 3.0);
  const double d1 = std::hypot(2.0, 3.0);
  EXPECT_NEAR(cost(free_path, map, cp, {}), d1 - 0.5 * (d0 - d1), 1e-12);
  const std::vector<Pose2> hit = {Pose2(2.0, 4.0, 0.0), Pose2(6.0, 4.0, 0.0)};
  EXPECT_NEAR(cost(hit, map, cp, {}), 4.0 + 100.0 - 0.5 * (8.0 - 4.0), 1e-12);
}

TEST(SelectRollout, PicksCheapestAndBreaksTiesLow) {
  const MapConfig map = OpenMap();
  const Pose2 start(2.0, 4.0, 0.0);
  const std::vector<std::vector<Pose2>> rollouts = {
      {Pose2(3.0, 4.0, 0.0)}, {Pose2(5.0, 4.0, 0.0)}, {Pose2(5.0, 4.0, 0.0)}, {Pose2(1.0, 4.0, 0.0)}};
  const Selection s = select_rollout(rollouts, start, map, {}, {});
  EXPECT_EQ(s.index, 1u);
  ASSERT_EQ(s.costs.size(), 4u);
  EXPECT_EQ(s.costs[1], s.costs[2]);
  EXPECT_THROW(select_rollout({}, start, map, {}, {}), Error);
}

TEST(SelectRollout, CostsIncludeTheStartPose) {
  const MapConfig map = OpenMap();
  const Pose2 start(2.0, 4.0, 0.0);
  const std::vector<std::vector<Pose2>> rollouts = {{Pose2(4.0, 4.0, 0.0)}};
  const Selection s = select_rollout(rollouts, start, map, {1.0, 100.0, 0.5}, {});
  EXPECT_NEAR(s.costs[0], 6.0 - 0.5 * 2.0, 1e-12);
}

// --- receding horizon -------------------------------------------------------------

vrnn::Model TinyModel() {
  vrnn::Model m;
  m.hyper.history = 4;
  m.hyper.window = 6;
  m.hyper.latent_dim = 2;
  m.hyper.enc_hidden = 8;
  m.hyper.small_hidden = 8;
  m.hyper.gru_hidden = 8;
  m.params = vrnn::init_params(m.hyper, 5);
  m.normalization.scale = {0.02, 0.02, 0.01, 0.01, 3, 3, 3, 3};
  return m;
}

TEST(RecedingHorizon, ZeroActionUntilHistoryFillsThenReplansOnSchedule) {
  const vrnn::Model model = TinyModel();
  const MapConfig map = WallMap();
  RecedingHorizonSettings settings;
  settings.n_samples = 4;
  settings.horizon = 10;
  settings.replan_interval = 3;
  PlannerState ps;
  TableState state;
  state.pose = map.initial_pose;
  std::vector<std::int64_t> replans;
  for (std::int64_t tick = 0; tick < 12; ++tick) {
    const PlannerStep out = receding_horizon_step(ps, state, {}, model, map, settings, tick, 9);
    if (tick < 3) {
      EXPECT_EQ(out.action.fx, 0.0);
      EXPECT_EQ(out.action.fy, 0.0);
      EXPECT_TRUE(out.state.plan.waypoints.empty());
    }
    EXPECT_LE(out.state.history.size(), 4u);
    if (out.replanned) {
      replans.push_back(tick);
      EXPECT_EQ(out.state.plan.birth_tick, tick);
      EXPECT_EQ(out.state.plan.waypoints.front().tick, static_cast<double>(tick + 1));
      EXPECT_EQ(out.state.plan.waypoints.size(), 10u);
    }
    ps = out.state;
  }
  EXPECT_EQ(replans, (std::vector<std::int64_t>{3, 6, 9}));
}

TEST(RecedingHorizon, DeterministicGivenSeed) {
  const vrnn::Model model = TinyModel();
  const MapConfig map = WallMap();
  RecedingHorizonSettings settings;
  settings.n_samples = 4;
  settings.horizon = 10;
  PlannerState ps;
  for (int i = 0; i < 4; ++i) ps.history.push_back({});
  TableState state;
  state.pose = map.initial_pose;
  const PlannerStep a = receding_horizon_step(ps, state, {}, model, map, settings, 30, 1);
  const PlannerStep b = receding_horizon_step(ps, state, {}, model, map, settings, 30, 1);
  const PlannerStep c = receding_horizon_step(ps, state, {}, model, map, settings, 30, 2);
  EXPECT_EQ(a.action.fx, b.action.fx);
  EXPECT_EQ(a.action.fy, b.action.fy);
  EXPECT_EQ(a.state.plan.waypoints.back().pose, b.state.plan.waypoints.back().pose);
  EXPECT_NE(a.state.plan.waypoints.back().pose, c.state.plan.waypoints.back().pose);
}

TEST(RecedingHorizon, PlanIsTheCheapestRollout) {
  const vrnn::Model model = TinyModel();
  const MapConfig map = WallMap();
  RecedingHorizonSettings settings;
  settings.n_samples = 6;
  settings.horizon = 8;
  const std::vector<ObservationFrame> hist(4);
  TableState state;
  state.pose = map.initial_pose;
  Selection sel;
  const Plan plan = plan_with_model(model, hist, state, map, settings, 0, 4, &sel);
  ASSERT_EQ(sel.costs.size(), 6u);
  for (double c : sel.costs) EXPECT_GE(c, sel.costs[sel.index]);
  std::vector<Pose2> path{state.pose};
  for (const auto& w : plan.waypoints) path.push_back(w.pose);
  EXPECT_DOUBLE_EQ(cost(path, map, settings.cost, settings.geometry), sel.costs[sel.index]);
}

TEST(TrackPlan, AimsOneTickAhead) {
  Plan p;
  p.waypoints = {{1.0, Pose2(0.1, 0.0, 0.0)}, {2.0, Pose2(0.2, 0.0, 0.0)}};
  TableState s;
  const AgentAction a = track_plan(p, s, 1, 2.0);
  EXPECT_NEAR(a.fx, 0.4, 1e-15);
}

}  // namespace
}  // namespace cocarry
