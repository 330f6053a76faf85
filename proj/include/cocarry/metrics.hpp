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

// Evaluation metrics for generated plans and closed-loop trials: distance to
// ground truth, Frechet distribution distance, temporal variance, interaction
// forces, and task statistics.

#ifndef COCARRY_METRICS_HPP_
#define COCARRY_METRICS_HPP_

#include <array>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "cocarry/sim.hpp"
#include "cocarry/world.hpp"

namespace cocarry::metrics {

using PoseSeq = std::vector<Pose2>;
using TrajBatch = std::vector<PoseSeq>;

// Sum over time of the (x, y) distance, truncated to the shorter sequence.
double l2_to_gt(std::span<const Pose2> traj, std::span<const Pose2> gt);

// Mean of l2_to_gt over paired sequences.
double mean_l2_to_gt(const TrajBatch& generated, const TrajBatch& gt);

// Per-step (dx, dy, dtheta) rows pooled over every sequence in the batch.
Eigen::MatrixXd delta_features(const TrajBatch& batch);

// ||mu_a - mu_b||^2 + tr(S_a + S_b - 2 (S_a S_b)^(1/2)) over row samples with
// unbiased covariances. Throws Error for fewer than 2 samples or when the
// matrix square root cannot be computed to tolerance.
double frechet_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

// (mu_a - mu_b)^2 + (sigma_a - sigma_b)^2 for each column.
std::vector<double> frechet_per_dimension(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

// Population variance over time of (x, y, theta) per sequence, averaged over
// the batch. Theta is unwrapped along each sequence first. Throws Error for a
// sequence shorter than 2.
std::array<double, 3> temporal_variance(const TrajBatch& batch);

// Axial internal force (N): positive stretches the table, negative
// compresses it.
double interaction_force(const AgentAction& robot, const AgentAction& human, double theta,
                         double force_scale);

std::vector<double> interaction_series(const Trajectory& traj);

// Positive values divided by the global max, negative values by |global min|,
// so zero stays zero and the extremes land on +/-1. Throws Error when every
// value is equal.
std::vector<std::vector<double>> scale_interaction_series(const std::vector<std::vector<double>>& series);

struct TaskStats {
  double success_rate = 0.0;
  std::optional<double> mean_time;  // seconds, successful trials only
  std::optional<double> time_std;   // population standard deviation
};

// Throws Error on an empty list.
TaskStats task_stats(std::span<const Trajectory> trials);

struct MetricReport {
  std::optional<double> l2;
  std::optional<double> fd;
  std::optional<double> fd_x;
  std::optional<double> fd_y;
  std::optional<double> fd_theta;
  std::optional<std::array<double, 3>> var;
  std::optional<double> success_rate;
  std::optional<double> mean_time;
  std::optional<double> time_std;
};

void to_json(nlohmann::json& j, const MetricReport& r);

// Aligned plain-text table, one row per named report.
std::string format_table(const std::vector<std::pair<std::string, MetricReport>>& rows);

}  // namespace cocarry::metrics

#endif  // COCARRY_METRICS_HPP_
