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

// Tests for world geometry, observations, and collision checks.

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "cocarry/error.hpp"
#include "cocarry/world.hpp"

namespace cocarry {
namespace {

constexpr double kPi = std::numbers::pi;

MapConfig EmptyMap() {
  MapConfig m;
  m.id = "empty";
  m.initial_pose = Pose2(2.0, 4.0, 0.0);
  m.goal = {{10.0, 4.0}, 0.5};
  return m;
}

TEST(WrapAngle, RangeIsHalfOpen) {
  EXPECT_DOUBLE_EQ(wrap_angle(kPi), kPi);
  EXPECT_DOUBLE_EQ(wrap_angle(-kPi), kPi);
  EXPECT_NEAR(wrap_angle(3 * kPi / 2), -kPi / 2, 1e-15);
  EXPECT_NEAR(wrap_angle(-5 * kPi / 2), -kPi / 2, 1e-15);
  EXPECT_DOUBLE_EQ(wrap_angle(0.25), 0.25);
}

TEST(EgoFrame, SpecExamples) {
  Vec2 v = world_to_ego(Pose2(0, 0, 0), {1, 2});
  EXPECT_NEAR(v.x(), 1, 1e-15);
  EXPECT_NEAR(v.y(), 2, 1e-15);
  v = world_to_ego(Pose2(0, 0, kPi / 2), {0, 1});
  EXPECT_NEAR(v.x(), 1, 1e-15);
  EXPECT_NEAR(v.y(), 0, 1e-15);
  v = world_to_ego(Pose2(1, 1, kPi), {2, 1});
  EXPECT_NEAR(v.x(), -1, 1e-15);
  EXPECT_NEAR(v.y(), 0, 1e-15);
}

TEST(EgoFrame, RoundTripOnRandomPoses) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-10, 10);
  for (int i = 0; i < 1000; ++i) {
    const Pose2 pose(u(rng), u(rng), u(rng));
    const Vec2 v(u(rng), u(rng));
    const Vec2 back = world_to_ego(pose, ego_to_world(pose, v));
    EXPECT_NEAR(back.x(), v.x(), 1e-12);
    EXPECT_NEAR(back.y(), v.y(), 1e-12);
  }
}

TEST(NearestObstacle, SingleCandidate) {
  const std::vector<Obstacle> obs = {{{3, 0}, 0.5}};
  const auto n = nearest_obstacle({0, 0}, obs);
  EXPECT_EQ(n.index, 0u);
  EXPECT_EQ(n.heading, Vec2(3, 0));
}

TEST(NearestObstacle, PicksNearer) {
  const std::vector<Obstacle> obs = {{{2, 0}, 0.5}, {{0, 1}, 0.5}};
  EXPECT_EQ(nearest_obstacle({0, 0}, obs).index, 1u);
}

TEST(NearestObstacle, TieGoesToLowestIndex) {
  const std::vector<Obstacle> obs = {{{5, 5}, 0.5}, {{0, 2}, 0.5}, {{2, 0}, 0.5}, {{-2, 0}, 0.5}};
  EXPECT_EQ(nearest_obstacle({0, 0}, obs).index, 1u);
}

TEST(NearestObstacle, EmptyListThrows) {
  const std::vector<Obstacle> none;
  EXPECT_THROW(nearest_obstacle({0, 0}, none), Error);
}

TEST(NearestObstacle, NoCloserObstacleExists) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0, 10);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Obstacle> obs;
    for (int k = 0; k < 6; ++k) obs.push_back({{u(rng), u(rng)}, 0.3});
    const Vec2 p(u(rng), u(rng));
    const auto n = nearest_obstacle(p, obs);
    for (const auto& o : obs) EXPECT_LE(n.heading.norm(), (o.center - p).norm());
  }
}

TEST(Observation, HasEightScalars) {
  EXPECT_EQ(ObservationFrame::kDim, 8u);
  EXPECT_EQ(ObservationFrame{}.to_array().size(), 8u);
}

TEST(Observation, NoMotionGivesZeroDifferences) {
  MapConfig m = EmptyMap();
  m.obstacles = {{{6, 4}, 0.5}};
  TableState s;
  s.pose = Pose2(3, 2, 0.7);
  const auto f = build_observation(s, s, m);
  EXPECT_EQ(f.dp, Vec2::Zero());
  EXPECT_EQ(f.dcos, 0.0);
  EXPECT_EQ(f.dsin, 0.0);
}

TEST(Observation, QuarterTurnDifferences) {
  TableState a;
  TableState b;
  b.pose = Pose2(0, 0, kPi / 2);
  const auto f = build_observation(a, b, EmptyMap());
  EXPECT_NEAR(f.dcos, -1.0, 1e-15);
  EXPECT_NEAR(f.dsin, 1.0, 1e-15);
}

TEST(Observation, EmptyMapGivesZeroObstacleHeading) {
  TableState s;
  s.pose = Pose2(3, 3, 0.2);
  EXPECT_EQ(build_observation(s, s, EmptyMap()).d_obs_ego, Vec2::Zero());
}

TEST(Observation, MatchesHandComputation) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.5, 7.5);
  std::uniform_real_distribution<double> ang(-kPi, kPi);
  MapConfig m = EmptyMap();
  m.obstacles = {{{6, 4}, 0.5}, {{3, 6}, 0.4}};
  for (int i = 0; i < 200; ++i) {
    TableState a;
    TableState b;
    a.pose = Pose2(u(rng), u(rng), ang(rng));
    b.pose = Pose2(a.pose.x + 0.01 * ang(rng), a.pose.y + 0.01 * ang(rng), a.pose.theta + 0.05 * ang(rng));
    const auto f = build_observation(a, b, m);

    const double c = std::cos(b.pose.theta);
    const double s = std::sin(b.pose.theta);
    auto rotate_in = [&](double wx, double wy) { return Vec2(c * wx + s * wy, -s * wx + c * wy); };
    const Vec2 goal = rotate_in(m.goal.center.x() - b.pose.x, m.goal.center.y() - b.pose.y);
    const double d0 = std::hypot(6 - b.pose.x, 4 - b.pose.y);
    const double d1 = std::hypot(3 - b.pose.x, 6 - b.pose.y);
    const Vec2 oc = d0 <= d1 ? Vec2(6, 4) : Vec2(3, 6);
    const Vec2 obs = rotate_in(oc.x() - b.pose.x, oc.y() - b.pose.y);

    EXPECT_NEAR(f.dp.x(), b.pose.x - a.pose.x, 1e-15);
    EXPECT_NEAR(f.dp.y(), b.pose.y - a.pose.y, 1e-15);
    EXPECT_NEAR(f.dcos, std::cos(b.pose.theta) - std::cos(a.pose.theta), 1e-15);
    EXPECT_NEAR(f.dsin, std::sin(b.pose.theta) - std::sin(a.pose.theta), 1e-15);
    EXPECT_NEAR(f.d_goal_ego.x(), goal.x(), 1e-12);
    EXPECT_NEAR(f.d_goal_ego.y(), goal.y(), 1e-12);
    EXPECT_NEAR(f.d_obs_ego.x(), obs.x(), 1e-12);
    EXPECT_NEAR(f.d_obs_ego.y(), obs.y(), 1e-12);
  }
}

// Samples the table boundary densely and tests every point against the
// closed squares and the bounds.
bool SampledCollision(const Pose2& pose, const TableGeometry& g, const MapConfig& m) {
  const Vec2 u(std::cos(pose.theta), std::sin(pose.theta));
  const Vec2 n(-u.y(), u.x());
  const double hl = g.length / 2;
  const double hw = g.width / 2;
  const int per_side = 2500;
  for (int side = 0; side < 4; ++side) {
    for (int k = 0; k <= per_side; ++k) {
      const double t = -1.0 + 2.0 * k / per_side;
      Vec2 local;
      switch (side) {
        case 0: local = {t * hl, -hw}; break;
        case 1: local = {hl, t * hw}; break;
        case 2: local = {t * hl, hw}; break;
        default: local = {-hl, t * hw}; break;
      }
      const Vec2 p = pose.position() + local.x() * u + local.y() * n;
      if (!m.bounds.contains(p)) return true;
      for (const auto& o : m.obstacles) {
        if (std::abs(p.x() - o.center.x()) <= o.half_extent && std::abs(p.y() - o.center.y()) <= o.half_extent) {
          return true;
        }
      }
    }
  }
  // A square strictly inside the table touches no boundary point.
  for (const auto& o : m.obstacles) {
    const Vec2 d = o.center - pose.position();
    if (std::abs(d.dot(u)) <= hl && std::abs(d.dot(n)) <= hw) return true;
  }
  return false;
}

TEST(Collision, SimpleCases) {
  MapConfig m = EmptyMap();
  m.obstacles = {{{6, 4}, 0.5}};
  const TableGeometry g;
  EXPECT_FALSE(check_collision(Pose2(2, 2, 0.3), m, g));
  EXPECT_TRUE(check_collision(Pose2(6, 4, 1.0), m, g));
  EXPECT_TRUE(check_collision(Pose2(0.2, 4, 0), m, g));
  // Edge contact counts: closed intervals.
  EXPECT_TRUE(check_collision(Pose2(5.0, 4, 0), m, g));
  EXPECT_FALSE(check_collision(Pose2(4.999, 4, 0), m, g));
}

TEST(Collision, AgreesWithPointSamplingOracle) {
  std::mt19937_64 rng(4);
  MapConfig m = EmptyMap();
  m.obstacles = {{{6, 4}, 0.8}, {{3, 2}, 0.4}, {{9, 6}, 0.6}};
  const TableGeometry g;
  std::uniform_real_distribution<double> ux(0.0, 12.0);
  std::uniform_real_distribution<double> uy(0.0, 8.0);
  std::uniform_real_distribution<double> ang(-kPi, kPi);
  int hits = 0;
  for (int i = 0; i < 1000; ++i) {
    const Pose2 pose(ux(rng), uy(rng), ang(rng));
    const bool expected = SampledCollision(pose, g, m);
    EXPECT_EQ(check_collision(pose, m, g), expected) << pose.x << ' ' << pose.y << ' ' << pose.theta;
    hits += expected;
  }
  EXPECT_GT(hits, 100);
  EXPECT_LT(hits, 900);
}

TEST(Collision, NearTangentCases) {
  MapConfig m = EmptyMap();
  m.obstacles = {{{6, 4}, 0.5}};
  const TableGeometry g;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> ang(-kPi, kPi);
  std::uniform_real_distribution<double> jitter(-0.01, 0.01);
  for (int i = 0; i < 300; ++i) {
    // Place the table so its support in a random direction just meets the square.
    const double theta = ang(rng);
    const double phi = ang(rng);
    const Vec2 dir(std::cos(phi), std::sin(phi));
    const Vec2 u(std::cos(theta), std::sin(theta));
    const Vec2 n(-u.y(), u.x());
    const double table_support = 0.5 * std::abs(dir.dot(u)) + 0.25 * std::abs(dir.dot(n));
    const double square_support = 0.5 * (std::abs(dir.x()) + std::abs(dir.y()));
    const Vec2 c = Vec2(6, 4) + (table_support + square_support + jitter(rng)) * dir;
    const Pose2 pose(c.x(), c.y(), theta);
    EXPECT_EQ(check_collision(pose, m, g), SampledCollision(pose, g, m)) << i;
  }
}

TEST(Success, BoundaryInclusive) {
  const GoalRegion goal{{10, 4}, 0.5};
  EXPECT_TRUE(check_success(Pose2(10, 4, 0), goal));
  EXPECT_TRUE(check_success(Pose2(10.5, 4, 1), goal));
  EXPECT_FALSE(check_success(Pose2(11, 4, 0), goal));
}

TEST(MapValidation, RejectsBadMaps) {
  MapConfig m = EmptyMap();
  EXPECT_NO_THROW(validate_map(m));
  MapConfig bad_goal = m;
  bad_goal.goal.radius = 0;
  EXPECT_THROW(validate_map(bad_goal), Error);
  MapConfig blocked = m;
  blocked.obstacles = {{{2, 4}, 0.5}};
  EXPECT_THROW(validate_map(blocked), Error);
}

TEST(MapJson, RoundTrip) {
  MapConfig m = EmptyMap();
  m.obstacles = {{{6, 4}, 0.8}, {{0.1 + 0.2, 3}, 1.0 / 3}};
  const nlohmann::json j = m;
  EXPECT_EQ(j.get<MapConfig>(), m);
  for (const char* key : {"id", "initial_pose", "obstacles", "goal", "bounds"}) EXPECT_TRUE(j.contains(key)) << key;
}

}  // namespace
}  // namespace cocarry
