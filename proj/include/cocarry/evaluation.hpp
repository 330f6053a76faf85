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

// Experiment drivers shared by the command-line tool and the test suites:
// scripted data collection, plan comparison against held-out demonstrations,
// and closed-loop trials with a scripted partner.

#ifndef COCARRY_EVALUATION_HPP_
#define COCARRY_EVALUATION_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cocarry/metrics.hpp"
#include "cocarry/planners.hpp"
#include "cocarry/policies.hpp"
#include "cocarry/session.hpp"
#include "cocarry/vrnn.hpp"

namespace cocarry {

// The 63 catalog maps, the unseen-style maps, and the fork map.
std::vector<MapConfig> builtin_maps();
// Throws DataError for an unknown id.
MapConfig find_map(const std::string& id);

// Windows of every listed trajectory, in index order.
std::vector<Window> dataset_windows(const Dataset& dataset, const std::vector<std::size_t>& indices,
                                    std::size_t length, std::size_t stride);

struct CollectOptions {
  int count = 339;
  ScriptedParams scripted;
  SimParams params;
  std::int64_t max_ticks = kDefaultMaxTicks;
  // Sides alternate below/above by demonstration index when true; otherwise
  // each demonstration picks one at random.
  bool alternate_sides = false;
  std::uint64_t seed = 0;
  int max_attempts_per_demo = 20;
};

// Successful scripted demonstrations, cycling through `maps`. Throws Error
// if a map keeps failing.
std::vector<Trajectory> collect_scripted(const std::vector<MapConfig>& maps, const CollectOptions& options);

struct EvalPlansOptions {
  int horizon = 90;
  int samples = 8;          // generated sequences per anchor and method
  int anchor_stride = 60;   // ticks between anchors along a demonstration
  RrtParams rrt;
  std::uint64_t seed = 0;
};

struct EvalSet {
  metrics::TrajBatch gt;         // one segment per anchor
  metrics::TrajBatch generated;  // `samples` sequences per anchor
  std::vector<std::size_t> anchor_of;  // generated index -> gt index
};

// Scores a generated set against ground-truth segments. Each generated
// sequence is compared with its own anchor's segment for L2.
metrics::MetricReport score_plans(const EvalSet& set);

struct EvalPlansResult {
  EvalSet vrnn;
  EvalSet rrt;
  metrics::MetricReport vrnn_report;
  metrics::MetricReport rrt_report;
};

// At anchors along each demonstration, compares VRNN rollouts and centralized
// RRT plans with the demonstrated continuation.
EvalPlansResult eval_plans(const vrnn::Model& model, const std::vector<Trajectory>& demos,
                           const EvalPlansOptions& options);

struct HilOptions {
  int trials = 50;
  ScriptedParams human = noisy_human_params();
  RecedingHorizonSettings planner;
  RrtParams rrt;
  double dec_rrt_gain = 2.0;
  SimParams params;
  std::uint64_t seed = 0;
};

// Trials of `mode` (human-vrnn or human-decrrt) with a scripted noisy human.
// Trial i uses the same human seed whatever the mode.
std::vector<TrialLog> run_hil_trials(const MapConfig& map, SessionMode mode, const vrnn::Model* model,
                                     const HilOptions& options);

}  // namespace cocarry

#endif  // COCARRY_EVALUATION_HPP_
