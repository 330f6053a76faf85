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

#include "cocarry/evaluation.hpp"

#include <random>

#include "cocarry/datasets.hpp"
#include "cocarry/error.hpp"
#include "cocarry/random.hpp"

namespace cocarry {

std::vector<MapConfig> builtin_maps() {
  auto maps = generate_maps(default_catalog(), TableGeometry{});
  for (auto& m : unseen_maps()) maps.push_back(std::move(m));
  maps.push_back(fork_map());
  return maps;
}

MapConfig find_map(const std::string& id) {
  for (auto& m : builtin_maps()) {
    if (m.id == id) return m;
  }
  throw DataError("unknown map id '" + id + "'");
}

std::vector<Window> dataset_windows(const Dataset& dataset, const std::vector<std::size_t>& indices,
                                    std::size_t length, std::size_t stride) {
  std::vector<Window> out;
  for (std::size_t i : indices) {
    auto w = extract_windows(dataset.trajectories.at(i), i, length, stride);
    out.insert(out.end(), std::make_move_iterator(w.begin()), std::make_move_iterator(w.end()));
  }
  return out;
}

std::vector<Trajectory> collect_scripted(const std::vector<MapConfig>& maps, const CollectOptions& o) {
  if (maps.empty()) throw Error("collect_scripted: no maps");
  std::vector<Trajectory> out;
  std::mt19937_64 rng(derive_seed(o.seed, 0));
  std::uint64_t attempt = 0;
  for (int i = 0; i < o.count; ++i) {
    const MapConfig& map = maps[static_cast<std::size_t>(i) % maps.size()];
    Side side = std::bernoulli_distribution(0.5)(rng) ? Side::kAbove : Side::kBelow;
    if (o.alternate_sides) side = i % 2 == 0 ? Side::kBelow : Side::kAbove;
    bool done = false;
    for (int k = 0; k < o.max_attempts_per_demo && !done; ++k) {
      auto [robot, human] = make_demonstrator_pair(map, side, o.scripted, o.params, derive_seed(o.seed, 1, attempt++));
      Trajectory t = run_episode(robot, human, map, o.params, o.max_ticks);
      if (t.outcome == Outcome::kSuccess) {
        out.push_back(std::move(t));
        done = true;
      }
    }
    if (!done) throw Error("collect_scripted: no successful demonstration on map '" + map.id + "'");
  }
  return out;
}

metrics::MetricReport score_plans(const EvalSet& set) {
  if (set.generated.empty() || set.gt.empty()) throw Error("score_plans: empty evaluation set");
  metrics::TrajBatch paired_gt;
  for (std::size_t i = 0; i < set.generated.size(); ++i) paired_gt.push_back(set.gt.at(set.anchor_of.at(i)));
  metrics::MetricReport r;
  r.l2 = metrics::mean_l2_to_gt(set.generated, paired_gt);
  const Eigen::MatrixXd fa = metrics::delta_features(set.generated);
  const Eigen::MatrixXd fb = metrics::delta_features(set.gt);
  r.fd = metrics::frechet_distance(fa, fb);
  const auto per_dim = metrics::frechet_per_dimension(fa, fb);
  r.fd_x = per_dim[0];
  r.fd_y = per_dim[1];
  r.fd_theta = per_dim[2];
  r.var = metrics::temporal_variance(set.generated);
  return r;
}

EvalPlansResult eval_plans(const vrnn::Model& model, const std::vector<Trajectory>& demos,
                           const EvalPlansOptions& o) {
  if (o.horizon <= 0 || o.samples <= 0 || o.anchor_stride <= 0) throw Error("eval_plans: invalid options");
  const auto h = static_cast<std::size_t>(model.hyper.history);
  const auto horizon = static_cast<std::size_t>(o.horizon);
  EvalPlansResult res;
  std::uint64_t anchor_id = 0;
  for (const Trajectory& demo : demos) {
    const MapConfig map = find_map(demo.map_id);
    const auto poses = demo.poses();
    std::vector<ObservationFrame> frames;
    for (const auto& s : demo.steps) frames.push_back(s.obs);
    for (std::size_t a = h - 1; a + horizon < poses.size(); a += static_cast<std::size_t>(o.anchor_stride)) {
      const std::vector<Pose2> gt(poses.begin() + static_cast<std::ptrdiff_t>(a),
                                  poses.begin() + static_cast<std::ptrdiff_t>(a + horizon + 1));
      const Pose2 start = poses[a];
      const std::size_t gi = res.vrnn.gt.size();
      res.vrnn.gt.push_back(gt);
      res.rrt.gt.push_back(gt);

      const vrnn::RolloutRequest req{std::span(frames).subspan(a + 1 - h, h), start, &map, o.samples,
                                     o.horizon, derive_seed(o.seed, 0, anchor_id)};
      for (auto& r : vrnn::sample_pose_rollouts(model, req)) {
        r.insert(r.begin(), start);
        res.vrnn.generated.push_back(std::move(r));
        res.vrnn.anchor_of.push_back(gi);
      }

      for (int s = 0; s < o.samples; ++s) {
        RrtParams rp = o.rrt;
        rp.seed = derive_seed(o.seed, 1, anchor_id * 1000 + static_cast<std::uint64_t>(s));
        const RrtResult rr = rrt_plan(start, map, rp, demo.params.geometry(), demo.params.dt, 0);
        if (rr.status != RrtStatus::kFound) continue;
        std::vector<Pose2> seq;
        for (std::size_t k = 0; k <= horizon; ++k) seq.push_back(plan_pose_at(rr.plan, static_cast<double>(k)));
        res.rrt.generated.push_back(std::move(seq));
        res.rrt.anchor_of.push_back(gi);
      }
      ++anchor_id;
    }
  }
  if (res.vrnn.gt.empty()) throw Error("eval_plans: demonstrations too short for the horizon");
  res.vrnn_report = score_plans(res.vrnn);
  res.rrt_report = score_plans(res.rrt);
  return res;
}

std::vector<TrialLog> run_hil_trials(const MapConfig& map, SessionMode mode, const vrnn::Model* model,
                                     const HilOptions& o) {
  if (mode != SessionMode::kHumanVrnn && mode != SessionMode::kHumanDecRrt) {
    throw Error("run_hil_trials: mode must be human-vrnn or human-decrrt");
  }
  std::vector<TrialLog> logs;
  for (int i = 0; i < o.trials; ++i) {
    SessionConfig cfg;
    cfg.mode = mode;
    cfg.map = map;
    cfg.params = o.params;
    cfg.planner = o.planner;
    cfg.rrt = o.rrt;
    cfg.dec_rrt_gain = o.dec_rrt_gain;
    cfg.seed = derive_seed(o.seed, static_cast<std::uint64_t>(i));
    cfg.human_policy = make_noisy_human(map, o.human, o.params, derive_seed(o.seed, static_cast<std::uint64_t>(i), 1));
    Session session(std::move(cfg), model);
    MemoryChannel channel;
    logs.push_back(run_trial(session, channel));
  }
  return logs;
}

}  // namespace cocarry
