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

#include "cocarry/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include <unsupported/Eigen/MatrixFunctions>

#include "cocarry/error.hpp"

namespace cocarry::metrics {

double l2_to_gt(std::span<const Pose2> traj, std::span<const Pose2> gt) {
  if (traj.empty() || gt.empty()) throw Error("l2_to_gt: empty sequence");
  const std::size_t n = std::min(traj.size(), gt.size());
  double total = 0.0;
  for (std::size_t t = 0; t < n; ++t) total += (traj[t].position() - gt[t].position()).norm();
  return total;
}

double mean_l2_to_gt(const TrajBatch& generated, const TrajBatch& gt) {
  if (generated.empty() || generated.size() != gt.size()) {
    throw Error("mean_l2_to_gt: batches must be non-empty and paired");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < generated.size(); ++i) total += l2_to_gt(generated[i], gt[i]);
  return total / static_cast<double>(generated.size());
}

Eigen::MatrixXd delta_features(const TrajBatch& batch) {
  Eigen::Index rows = 0;
  for (const auto& s : batch) rows += s.size() > 1 ? static_cast<Eigen::Index>(s.size() - 1) : 0;
  Eigen::MatrixXd f(rows, 3);
  Eigen::Index r = 0;
  for (const auto& s : batch) {
    for (std::size_t t = 1; t < s.size(); ++t, ++r) {
      f(r, 0) = s[t].x - s[t - 1].x;
      f(r, 1) = s[t].y - s[t - 1].y;
      f(r, 2) = wrap_angle(s[t].theta - s[t - 1].theta);
    }
  }
  return f;
}

namespace {

struct Moments {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

Moments fit(const Eigen::MatrixXd& x) {
  if (x.rows() < 2) throw Error("frechet_distance: need at least 2 samples per set");
  Moments m;
  m.mean = x.colwise().mean().transpose();
  const Eigen::MatrixXd centered = x.rowwise() - m.mean.transpose();
  m.cov = centered.transpose() * centered / static_cast<double>(x.rows() - 1);
  return m;
}

// Principal square root of a product of PSD matrices via real Schur form.
bool product_sqrt(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, Eigen::MatrixXd& root) {
  const Eigen::MatrixXd prod = a * b;
  root = prod.sqrt();
  if (!root.allFinite()) return false;
  const double residual = (root * root - prod).norm();
  return residual <= 1e-6 * std::max(1.0, prod.norm());
}

}  // namespace

double frechet_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.cols() != b.cols()) throw Error("frechet_distance: feature dimensions differ");
  const Moments ma = fit(a);
  const Moments mb = fit(b);
  Eigen::MatrixXd root;
  if (!product_sqrt(ma.cov, mb.cov, root)) {
    // Near-singular covariances: retry with a small diagonal offset.
    const Eigen::MatrixXd offset = 1e-6 * Eigen::MatrixXd::Identity(a.cols(), a.cols());
    if (!product_sqrt(ma.cov + offset, mb.cov + offset, root)) {
      throw Error("frechet_distance: covariance product square root did not converge");
    }
  }
  return (ma.mean - mb.mean).squaredNorm() + ma.cov.trace() + mb.cov.trace() - 2.0 * root.trace();
}

std::vector<double> frechet_per_dimension(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.cols() != b.cols()) throw Error("frechet_per_dimension: feature dimensions differ");
  const Moments ma = fit(a);
  const Moments mb = fit(b);
  std::vector<double> out;
  for (Eigen::Index k = 0; k < a.cols(); ++k) {
    const double dm = ma.mean(k) - mb.mean(k);
    const double ds = std::sqrt(ma.cov(k, k)) - std::sqrt(mb.cov(k, k));
    out.push_back(dm * dm + ds * ds);
  }
  return out;
}

std::array<double, 3> temporal_variance(const TrajBatch& batch) {
  if (batch.empty()) throw Error("temporal_variance: empty batch");
  std::array<double, 3> total{};
  for (const auto& s : batch) {
    if (s.size() < 2) throw Error("temporal_variance: sequences need at least 2 poses");
    const auto n = static_cast<double>(s.size());
    std::array<double, 3> mean{};
    std::vector<std::array<double, 3>> v(s.size());
    double theta = s.front().theta;
    for (std::size_t t = 0; t < s.size(); ++t) {
      if (t > 0) theta += wrap_angle(s[t].theta - s[t - 1].theta);
      v[t] = {s[t].x, s[t].y, theta};
      for (int k = 0; k < 3; ++k) mean[k] += v[t][k] / n;
    }
    for (int k = 0; k < 3; ++k) {
      double acc = 0.0;
      for (const auto& row : v) acc += (row[k] - mean[k]) * (row[k] - mean[k]);
      total[k] += acc / n;
    }
  }
  for (double& t : total) t /= static_cast<double>(batch.size());
  return total;
}

double interaction_force(const AgentAction& robot, const AgentAction& human, double theta,
                         double force_scale) {
  const Vec2 axis(std::cos(theta), std::sin(theta));
  const double robot_axial = force_scale * Vec2(robot.fx, robot.fy).dot(axis);
  const double human_axial = force_scale * Vec2(human.fx, human.fy).dot(axis);
  return 0.5 * (robot_axial - human_axial);
}

std::vector<double> interaction_series(const Trajectory& traj) {
  std::vector<double> out;
  out.reserve(traj.steps.size());
  for (const auto& s : traj.steps) {
    out.push_back(interaction_force(s.action_robot, s.action_human, s.state.pose.theta,
                                    traj.params.force_scale));
  }
  return out;
}

std::vector<std::vector<double>> scale_interaction_series(const std::vector<std::vector<double>>& series) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const auto& s : series) {
    for (double v : s) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (!(hi > lo)) throw Error("scale_interaction_series: global min equals max");
  auto out = series;
  for (auto& s : out) {
    for (double& v : s) {
      if (v > 0.0) {
        v /= hi;
      } else if (v < 0.0) {
        v /= -lo;
      }
    }
  }
  return out;
}

TaskStats task_stats(std::span<const Trajectory> trials) {
  if (trials.empty()) throw Error("task_stats: no trials");
  std::vector<double> times;
  for (const auto& t : trials) {
    if (t.outcome == Outcome::kSuccess) times.push_back(t.duration());
  }
  TaskStats s;
  s.success_rate = static_cast<double>(times.size()) / static_cast<double>(trials.size());
  if (!times.empty()) {
    double mean = 0.0;
    for (double t : times) mean += t;
    mean /= static_cast<double>(times.size());
    double var = 0.0;
    for (double t : times) var += (t - mean) * (t - mean);
    s.mean_time = mean;
    s.time_std = std::sqrt(var / static_cast<double>(times.size()));
  }
  return s;
}

void to_json(nlohmann::json& j, const MetricReport& r) {
  j = nlohmann::json::object();
  auto put = [&](const char* key, const std::optional<double>& v) {
    if (v) j[key] = *v;
  };
  put("L2", r.l2);
  put("FD", r.fd);
  put("FD_x", r.fd_x);
  put("FD_y", r.fd_y);
  put("FD_theta", r.fd_theta);
  if (r.var) {
    j["Var_x"] = (*r.var)[0];
    j["Var_y"] = (*r.var)[1];
    j["Var_theta"] = (*r.var)[2];
  }
  put("Success", r.success_rate);
  put("Time", r.mean_time);
  put("Time_std", r.time_std);
}

std::string format_table(const std::vector<std::pair<std::string, MetricReport>>& rows) {
  struct Column {
    const char* title;
    std::optional<double> (*get)(const MetricReport&);
  };
  static const Column kColumns[] = {
      {"L2", [](const MetricReport& r) { return r.l2; }},
      {"FD", [](const MetricReport& r) { return r.fd; }},
      {"FD x", [](const MetricReport& r) { return r.fd_x; }},
      {"FD y", [](const MetricReport& r) { return r.fd_y; }},
      {"FD theta", [](const MetricReport& r) { return r.fd_theta; }},
      {"Var x", [](const MetricReport& r) { return r.var ? std::optional((*r.var)[0]) : std::nullopt; }},
      {"Var y", [](const MetricReport& r) { return r.var ? std::optional((*r.var)[1]) : std::nullopt; }},
      {"Var theta", [](const MetricReport& r) { return r.var ? std::optional((*r.var)[2]) : std::nullopt; }},
      {"Success (%)", [](const MetricReport& r) {
         return r.success_rate ? std::optional(100.0 * *r.success_rate) : std::nullopt;
       }},
      {"Time (s)", [](const MetricReport& r) { return r.mean_time; }},
      {"Time std", [](const MetricReport& r) { return r.time_std; }},
  };

  std::vector<const Column*> used;
  for (const auto& c : kColumns) {
    if (std::any_of(rows.begin(), rows.end(), [&](const auto& row) { return c.get(row.second).has_value(); })) {
      used.push_back(&c);
    }
  }
  std::size_t name_w = 4;
  for (const auto& row : rows) name_w = std::max(name_w, row.first.size());

  std::ostringstream os;
  os << std::left << std::setw(static_cast<int>(name_w)) << "" << std::right;
  for (const Column* c : used) os << "  " << std::setw(12) << c->title;
  os << '\n';
  for (const auto& [name, report] : rows) {
    os << std::left << std::setw(static_cast<int>(name_w)) << name << std::right;
    for (const Column* c : used) {
      const auto v = c->get(report);
      os << "  " << std::setw(12);
      if (v) {
        os << std::fixed << std::setprecision(4) << *v;
      } else {
        os << "--";
      }
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace cocarry::metrics
