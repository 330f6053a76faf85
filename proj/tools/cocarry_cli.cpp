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

// Command-line entry points. Exit codes: 0 success, 1 usage, 2 data error,
// 3 runtime failure.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cocarry/datasets.hpp"
#include "cocarry/error.hpp"
#include "cocarry/evaluation.hpp"
#include "cocarry/metrics.hpp"
#include "cocarry/random.hpp"
#include "cocarry/session.hpp"
#include "cocarry/vrnn.hpp"
#include "cocarry/ws_server.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace cocarry;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitRuntime = 3;

json pose_json(const Pose2& p) { return {{"x", p.x}, {"y", p.y}, {"theta", p.theta}}; }

Pose2 pose_from(const json& j) {
  return Pose2(j.at("x").get<double>(), j.at("y").get<double>(), j.at("theta").get<double>());
}

json parse_json_file(const fs::path& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

// A map id from the built-in set or a path to a map JSON file.
MapConfig resolve_map(const std::string& ref) {
  if (fs::exists(ref)) {
    try {
      return parse_json_file(ref).get<MapConfig>();
    } catch (const json::exception& e) {
      throw DataError(ref + ": " + e.what());
    }
  }
  return find_map(ref);
}

std::vector<std::vector<Pose2>> read_pose_sequences(const fs::path& path) {
  const json j = parse_json_file(path);
  std::vector<std::vector<Pose2>> out;
  try {
    for (const auto& seq : j.at("samples")) {
      std::vector<Pose2> s;
      for (const auto& p : seq) s.push_back(pose_from(p));
      out.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return out;
}

void write_pose_sequences(const fs::path& path, const std::string& map_id,
                          const std::vector<std::vector<Pose2>>& seqs) {
  json samples = json::array();
  for (const auto& s : seqs) {
    json seq = json::array();
    for (const auto& p : s) seq.push_back(pose_json(p));
    samples.push_back(std::move(seq));
  }
  write_file_atomic(path, json{{"map_id", map_id}, {"samples", samples}}.dump());
}

// Top-down overlay: obstacles, goal, history, and sampled futures.
std::string render_svg(const MapConfig& map, const std::vector<Pose2>& history,
                       const std::vector<std::vector<Pose2>>& samples) {
  constexpr double kScale = 60.0;
  const double w = (map.bounds.max_x - map.bounds.min_x) * kScale;
  const double h = (map.bounds.max_y - map.bounds.min_y) * kScale;
  auto sx = [&](double x) { return (x - map.bounds.min_x) * kScale; };
  auto sy = [&](double y) { return h - (y - map.bounds.min_y) * kScale; };
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
  os << "<rect x=\"0\" y=\"0\" width=\"" << w << "\" height=\"" << h << "\" fill=\"white\" stroke=\"black\"/>\n";
  for (const auto& o : map.obstacles) {
    os << "<rect x=\"" << sx(o.center.x() - o.half_extent) << "\" y=\"" << sy(o.center.y() + o.half_extent)
       << "\" width=\"" << 2 * o.half_extent * kScale << "\" height=\"" << 2 * o.half_extent * kScale
       << "\" fill=\"red\"/>\n";
  }
  const double gx = sx(map.goal.center.x());
  const double gy = sy(map.goal.center.y());
  os << "<circle cx=\"" << gx << "\" cy=\"" << gy << "\" r=\"" << map.goal.radius * kScale
     << "\" fill=\"none\" stroke=\"green\"/>\n";
  os << "<path d=\"M" << gx - 8 << ' ' << gy - 8 << " L" << gx + 8 << ' ' << gy + 8 << " M" << gx - 8 << ' '
     << gy + 8 << " L" << gx + 8 << ' ' << gy - 8 << "\" stroke=\"green\" stroke-width=\"3\"/>\n";
  auto polyline = [&](const std::vector<Pose2>& poses, const char* style) {
    os << "<polyline fill=\"none\" " << style << " points=\"";
    for (const auto& p : poses) os << sx(p.x) << ',' << sy(p.y) << ' ';
    os << "\"/>\n";
  };
  for (const auto& s : samples) polyline(s, "stroke=\"orange\" stroke-dasharray=\"3,3\"");
  if (!history.empty()) polyline(history, "stroke=\"black\" stroke-width=\"2\"");
  os << "</svg>\n";
  return os.str();
}

// --- subcommands ------------------------------------------------------------------

int cmd_maps_generate(const fs::path& out) {
  fs::create_directories(out);
  const MapCatalog catalog = default_catalog();
  const auto maps = generate_maps(catalog, TableGeometry{});
  json ids = json::array();
  for (const auto& m : maps) {
    write_file_atomic(out / (m.id + ".json"), json(m).dump(1));
    ids.push_back(m.id);
  }
  write_file_atomic(out / "manifest.json",
                    json{{"count", maps.size()}, {"catalog_hash", catalog_hash(catalog)}, {"maps", ids}}.dump(1));
  std::cout << "wrote " << maps.size() << " maps to " << out << '\n';
  return 0;
}

struct CollectArgs {
  std::string policy = "scripted";
  fs::path out;
  int count = 339;
  double ratio = 0.8;
  std::vector<std::string> maps;
  bool alternate = false;
  std::uint16_t port = 8765;
};

int cmd_collect(const CollectArgs& a, std::uint64_t seed) {
  std::vector<MapConfig> maps;
  for (const auto& ref : a.maps) maps.push_back(resolve_map(ref));
  const bool catalog = maps.empty();
  if (catalog) maps = generate_maps(default_catalog(), TableGeometry{});

  std::vector<Trajectory> demos;
  if (a.policy == "scripted") {
    CollectOptions o;
    o.count = a.count;
    o.alternate_sides = a.alternate;
    o.seed = seed;
    demos = collect_scripted(maps, o);
  } else {
    // Human-human trials over the socket; only successful ones are kept.
    ServeOptions so;
    so.port = a.port;
    so.trials = a.count;
    so.log_dir = a.out / "logs";
    fs::create_directories(so.log_dir);
    so.make_config = [&](int i) {
      SessionConfig c;
      c.mode = SessionMode::kHumanHuman;
      c.map = maps[static_cast<std::size_t>(i) % maps.size()];
      c.seed = derive_seed(seed, static_cast<std::uint64_t>(i));
      return c;
    };
    so.on_listening = [](std::uint16_t p) { std::cout << "listening on port " << p << std::endl; };
    serve(so);
    std::vector<fs::path> logs;
    for (const auto& e : fs::directory_iterator(so.log_dir)) logs.push_back(e.path());
    std::sort(logs.begin(), logs.end());
    for (const auto& path : logs) {
      const TrialLog log = load_trial_log(path);
      if (log.valid && log.trajectory.outcome == Outcome::kSuccess) demos.push_back(log.trajectory);
    }
    if (demos.size() < 2) throw Error("collect: fewer than 2 successful remote demonstrations");
  }
  const Dataset ds = make_dataset(std::move(demos), a.ratio, derive_seed(seed, 7),
                                  catalog ? catalog_hash(default_catalog()) : std::string{});
  save_dataset(ds, a.out);
  std::cout << "wrote " << ds.trajectories.size() << " trajectories (" << ds.split.train.size() << " train, "
            << ds.split.val.size() << " val) to " << a.out << '\n';
  return 0;
}

// Config schema:
//   {"dataset": <dir>, "output": <checkpoint path>, "stride": 10, "mirror": false,
//    "hyper": {history, window, latent_dim, enc_hidden, small_hidden,
//              gru_hidden, kl_weight, learning_rate, batch_size, epochs,
//              grad_clip, seed}}
int cmd_train(const fs::path& config_path, std::uint64_t seed, bool seed_given) {
  const json cfg = parse_json_file(config_path);
  fs::path dataset_dir;
  fs::path output;
  std::size_t stride = kDefaultWindowStride;
  bool mirror = false;
  vrnn::HyperParams hyper;
  try {
    dataset_dir = cfg.at("dataset").get<std::string>();
    output = cfg.at("output").get<std::string>();
    stride = cfg.value("stride", stride);
    mirror = cfg.value("mirror", mirror);
    if (cfg.contains("hyper")) hyper = cfg["hyper"].get<vrnn::HyperParams>();
  } catch (const json::exception& e) {
    throw DataError(config_path.string() + ": " + e.what());
  }
  if (dataset_dir.is_relative()) dataset_dir = config_path.parent_path() / dataset_dir;
  if (output.is_relative()) output = config_path.parent_path() / output;
  if (seed_given) hyper.seed = seed;
  hyper.validate();

  const Dataset ds = load_dataset(dataset_dir);
  const auto len = static_cast<std::size_t>(hyper.window);
  auto train_w = dataset_windows(ds, ds.split.train, len, stride);
  auto val_w = dataset_windows(ds, ds.split.val, len, stride);
  const Normalization norm = mirror ? mirror_symmetric(ds.normalization) : ds.normalization;
  if (mirror) {
    append_mirrored(train_w);
    append_mirrored(val_w);
  }
  std::cout << train_w.size() << " training windows, " << val_w.size() << " validation windows\n";
  vrnn::TrainOptions opts;
  opts.on_epoch = [](int e, double tl, double vl) {
    std::printf("epoch %3d  train %.5f  val %.5f\n", e, tl, vl);
    std::fflush(stdout);
  };
  const auto result = vrnn::train(train_w, val_w, hyper, norm, opts);
  vrnn::save_checkpoint({hyper, norm, result.params}, output);
  std::printf("best val %.5f at epoch %d; checkpoint %s\n", result.best_val_loss, result.best_epoch,
              output.c_str());
  return 0;
}

struct RolloutArgs {
  fs::path checkpoint;
  std::vector<std::string> maps;
  int samples = 16;
  int horizon = 90;
  fs::path history;
  long at = -1;
  fs::path out = "rollouts";
};

int cmd_rollout(const RolloutArgs& a, std::uint64_t seed) {
  const vrnn::Model model = vrnn::load_checkpoint(a.checkpoint);
  fs::create_directories(a.out);
  const auto h = static_cast<std::size_t>(model.hyper.history);
  for (const auto& ref : a.maps) {
    const MapConfig map = resolve_map(ref);
    Trajectory source;
    std::size_t at = 0;
    if (!a.history.empty()) {
      source = load_trajectory(a.history);
      at = a.at < 0 ? h - 1 : static_cast<std::size_t>(a.at);
    } else {
      // Conditioning history from a scripted team on this map.
      auto [r, hu] = make_demonstrator_pair(map, Side::kAbove, ScriptedParams{}, SimParams{}, derive_seed(seed, 5));
      source = run_episode(r, hu, map, SimParams{}, static_cast<std::int64_t>(h) - 1);
      at = a.at < 0 ? h - 1 : static_cast<std::size_t>(a.at);
    }
    if (at >= source.steps.size() || at + 1 < h) throw DataError("rollout: history too short for tick " + std::to_string(at));
    std::vector<ObservationFrame> frames;
    std::vector<Pose2> past;
    for (std::size_t i = at + 1 - h; i <= at; ++i) {
      frames.push_back(source.steps[i].obs);
      past.push_back(source.steps[i].state.pose);
    }
    const vrnn::RolloutRequest req{frames, past.back(), &map, a.samples, a.horizon, derive_seed(seed, 6)};
    auto seqs = vrnn::sample_pose_rollouts(model, req);
    for (auto& s : seqs) s.insert(s.begin(), past.back());

    const std::string stem = map.id;
    write_pose_sequences(a.out / (stem + ".poses.json"), map.id, seqs);
    std::ostringstream csv;
    csv << "sample,step,x,y,theta\n";
    csv.precision(17);
    for (std::size_t i = 0; i < seqs.size(); ++i) {
      for (std::size_t k = 0; k < seqs[i].size(); ++k) {
        csv << i << ',' << k << ',' << seqs[i][k].x << ',' << seqs[i][k].y << ',' << seqs[i][k].theta << '\n';
      }
    }
    write_file_atomic(a.out / (stem + ".csv"), csv.str());
    write_file_atomic(a.out / (stem + ".svg"), render_svg(map, past, seqs));
    std::cout << map.id << ": " << seqs.size() << " samples\n";
  }
  return 0;
}

struct EvalPlansArgs {
  fs::path checkpoint;
  fs::path generated;
  fs::path gt;
  std::string split = "val";
  int samples = 8;
  int anchor_stride = 60;
  int horizon = 90;
  fs::path out;
};

void print_report(const std::vector<std::pair<std::string, metrics::MetricReport>>& rows, const fs::path& out) {
  std::cout << metrics::format_table(rows);
  if (!out.empty()) {
    json j = json::object();
    for (const auto& [name, r] : rows) j[name] = r;
    write_file_atomic(out, j.dump(1));
  }
}

int cmd_eval_plans(const EvalPlansArgs& a, std::uint64_t seed) {
  if (!a.generated.empty()) {
    EvalSet set;
    set.gt = read_pose_sequences(a.gt);
    set.generated = read_pose_sequences(a.generated);
    if (set.gt.empty()) throw DataError("eval-plans: empty ground truth");
    for (std::size_t i = 0; i < set.generated.size(); ++i) set.anchor_of.push_back(i % set.gt.size());
    print_report({{"generated", score_plans(set)}}, a.out);
    return 0;
  }
  if (a.checkpoint.empty()) throw Error("eval-plans needs --checkpoint or --generated");
  const vrnn::Model model = vrnn::load_checkpoint(a.checkpoint);
  const Dataset ds = load_dataset(a.gt);
  std::vector<Trajectory> demos;
  if (a.split == "val" || a.split == "train") {
    for (std::size_t i : a.split == "val" ? ds.split.val : ds.split.train) demos.push_back(ds.trajectories[i]);
  } else {
    demos = ds.trajectories;
  }
  EvalPlansOptions o;
  o.samples = a.samples;
  o.anchor_stride = a.anchor_stride;
  o.horizon = a.horizon;
  o.seed = seed;
  const auto res = eval_plans(model, demos, o);
  print_report({{"VRNN", res.vrnn_report}, {"RRT", res.rrt_report}}, a.out);
  return 0;
}

struct EvalHilArgs {
  fs::path logs;
  std::vector<std::string> simulate;
  fs::path checkpoint;
  int trials = 50;
  fs::path out;
};

int cmd_eval_hil(const EvalHilArgs& a, std::uint64_t seed) {
  if (!a.simulate.empty()) {
    if (a.checkpoint.empty()) throw Error("eval-hil --simulate needs --checkpoint");
    const vrnn::Model model = vrnn::load_checkpoint(a.checkpoint);
    fs::create_directories(a.logs);
    HilOptions o;
    o.trials = a.trials;
    o.seed = seed;
    for (const auto& ref : a.simulate) {
      const MapConfig map = resolve_map(ref);
      for (const SessionMode mode : {SessionMode::kHumanVrnn, SessionMode::kHumanDecRrt}) {
        const auto logs = run_hil_trials(map, mode, &model, o);
        for (std::size_t i = 0; i < logs.size(); ++i) {
          char name[128];
          std::snprintf(name, sizeof(name), "%s-%s-%03zu.json", map.id.c_str(), to_string(mode).c_str(), i);
          save_trial_log(logs[i], a.logs / name);
        }
      }
    }
  }

  std::map<std::string, std::vector<TrialLog>> by_mode;
  for (const auto& e : fs::directory_iterator(a.logs)) {
    if (e.path().extension() != ".json") continue;
    TrialLog log = load_trial_log(e.path());
    if (!log.valid) continue;
    by_mode[to_string(log.mode)].push_back(std::move(log));
  }
  if (by_mode.empty()) throw DataError("eval-hil: no valid trial logs in " + a.logs.string());

  std::vector<std::pair<std::string, metrics::MetricReport>> rows;
  json extra = json::object();
  for (const auto& [mode, logs] : by_mode) {
    std::vector<Trajectory> trajs;
    int answered = 0;
    int said_human = 0;
    for (const auto& l : logs) {
      trajs.push_back(l.trajectory);
      if (l.turing_response != PartnerType::kNone) {
        ++answered;
        said_human += l.turing_response == PartnerType::kHuman;
      }
    }
    const auto st = metrics::task_stats(trajs);
    metrics::MetricReport r;
    r.success_rate = st.success_rate;
    r.mean_time = st.mean_time;
    r.time_std = st.time_std;
    rows.emplace_back(mode, r);
    extra[mode] = {{"trials", logs.size()}, {"turing_answered", answered}, {"perceived_human", said_human}};
  }
  std::cout << metrics::format_table(rows);
  for (const auto& [mode, e] : extra.items()) {
    std::cout << mode << ": " << e["trials"] << " trials, perceived human " << e["perceived_human"] << " of "
              << e["turing_answered"] << " answered\n";
  }
  if (!a.out.empty()) {
    json j = json::object();
    for (const auto& [name, r] : rows) j[name] = r;
    j["turing"] = extra;
    write_file_atomic(a.out, j.dump(1));
  }
  return 0;
}

struct ServeArgs {
  std::uint16_t port = 8765;
  std::string mode = "human-vrnn";
  std::string map = "unseen-offset";
  int trials = 1;
  fs::path checkpoint;
  fs::path log_dir;
  fs::path replay_log;
};

int cmd_serve(const ServeArgs& a, std::uint64_t seed) {
  const SessionMode mode = session_mode_from_string(a.mode);
  std::optional<vrnn::Model> model;
  if (mode == SessionMode::kHumanVrnn) {
    if (a.checkpoint.empty()) throw Error("human-vrnn mode needs --checkpoint");
    model = vrnn::load_checkpoint(a.checkpoint);
  }
  std::optional<Trajectory> replay;
  if (mode == SessionMode::kReplay) {
    if (a.replay_log.empty()) throw Error("replay mode needs --replay-log");
    replay = load_trial_log(a.replay_log).trajectory;
  }
  const MapConfig map = resolve_map(a.map);
  if (!a.log_dir.empty()) fs::create_directories(a.log_dir);
  ServeOptions so;
  so.port = a.port;
  so.trials = a.trials;
  so.log_dir = a.log_dir;
  so.model = model ? &*model : nullptr;
  so.make_config = [&](int i) {
    SessionConfig c;
    c.mode = mode;
    c.map = map;
    c.planning = PlanningMode::kAsync;
    c.replay_log = replay;
    c.seed = derive_seed(seed, static_cast<std::uint64_t>(i));
    return c;
  };
  so.on_listening = [](std::uint16_t p) { std::cout << "listening on port " << p << std::endl; };
  const int done = serve(so);
  std::cout << done << " trial(s) completed\n";
  return 0;
}

int cmd_replay(const fs::path& log_path, const fs::path& out) {
  Trajectory logged;
  if (log_path.extension() == ".jsonl") {
    logged = load_trajectory(log_path);
  } else {
    logged = load_trial_log(log_path).trajectory;
  }
  SessionConfig c;
  c.mode = SessionMode::kReplay;
  c.map = find_map(logged.map_id);
  c.params = logged.params;
  c.replay_log = logged;
  c.max_ticks = logged.steps.back().tick + 1;
  Session session(std::move(c));
  std::ostringstream states;
  std::size_t k = 0;
  while (!session.finished() && k < logged.steps.size()) {
    const Message m = session.tick();
    states << json(m).dump() << '\n';
    const auto& got = session.trajectory().steps.back();
    if (!(got.state == logged.steps[k].state)) {
      throw DataError("replay diverged from the log at tick " + std::to_string(logged.steps[k].tick));
    }
    ++k;
  }
  if (k != logged.steps.size()) throw DataError("replay ended after " + std::to_string(k) + " of " +
                                                std::to_string(logged.steps.size()) + " logged ticks");
  if (!out.empty()) write_file_atomic(out, states.str());
  std::cout << "replayed " << k << " ticks bit-exactly; outcome " << to_string(logged.outcome) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cooperative table-carrying toolkit"};
  app.require_subcommand(1);
  std::uint64_t seed = 0;
  app.add_option("--seed", seed, "Base seed for every random choice");

  auto* maps = app.add_subcommand("maps", "Map utilities");
  maps->require_subcommand(1);
  fs::path maps_out = "maps";
  auto* maps_gen = maps->add_subcommand("generate", "Write the 63 catalog maps and a manifest");
  maps_gen->add_option("--out", maps_out);

  CollectArgs collect;
  auto* collect_cmd = app.add_subcommand("collect", "Record demonstrations into a dataset");
  collect_cmd->add_option("--policy", collect.policy)->check(CLI::IsMember({"scripted", "remote"}));
  collect_cmd->add_option("--out", collect.out)->required();
  collect_cmd->add_option("--count", collect.count)->check(CLI::PositiveNumber);
  collect_cmd->add_option("--ratio", collect.ratio);
  collect_cmd->add_option("--map", collect.maps, "Map id or JSON file; default all catalog maps");
  collect_cmd->add_flag("--alternate-sides", collect.alternate);
  collect_cmd->add_option("--port", collect.port);

  fs::path train_config;
  auto* train_cmd = app.add_subcommand("train", "Train a VRNN from a dataset");
  train_cmd->add_option("--config", train_config)->required()->check(CLI::ExistingFile);

  RolloutArgs rollout;
  auto* rollout_cmd = app.add_subcommand("rollout", "Sample future trajectories from a checkpoint");
  rollout_cmd->add_option("--checkpoint", rollout.checkpoint)->required();
  rollout_cmd->add_option("--map", rollout.maps)->required();
  rollout_cmd->add_option("--samples", rollout.samples)->check(CLI::PositiveNumber);
  rollout_cmd->add_option("--horizon", rollout.horizon)->check(CLI::PositiveNumber);
  rollout_cmd->add_option("--history", rollout.history, "Trajectory JSONL to condition on");
  rollout_cmd->add_option("--at", rollout.at, "Last history tick");
  rollout_cmd->add_option("--out", rollout.out);

  EvalPlansArgs ep;
  auto* ep_cmd = app.add_subcommand("eval-plans", "Compare generated plans with demonstrations");
  ep_cmd->add_option("--checkpoint", ep.checkpoint);
  ep_cmd->add_option("--generated", ep.generated, "Pose-sequence file instead of a checkpoint");
  ep_cmd->add_option("--gt", ep.gt)->required();
  ep_cmd->add_option("--split", ep.split)->check(CLI::IsMember({"val", "train", "all"}));
  ep_cmd->add_option("--samples", ep.samples)->check(CLI::PositiveNumber);
  ep_cmd->add_option("--anchor-stride", ep.anchor_stride)->check(CLI::PositiveNumber);
  ep_cmd->add_option("--horizon", ep.horizon)->check(CLI::PositiveNumber);
  ep_cmd->add_option("--out", ep.out);

  EvalHilArgs eh;
  auto* eh_cmd = app.add_subcommand("eval-hil", "Task metrics over trial logs");
  eh_cmd->add_option("--logs", eh.logs)->required();
  eh_cmd->add_option("--simulate", eh.simulate, "Run scripted-partner trials on these maps first");
  eh_cmd->add_option("--checkpoint", eh.checkpoint);
  eh_cmd->add_option("--trials", eh.trials)->check(CLI::PositiveNumber);
  eh_cmd->add_option("--out", eh.out);

  ServeArgs sv;
  auto* serve_cmd = app.add_subcommand("serve", "Run live trials over a WebSocket");
  serve_cmd->add_option("--port", sv.port);
  serve_cmd->add_option("--mode", sv.mode);
  serve_cmd->add_option("--map", sv.map);
  serve_cmd->add_option("--trials", sv.trials)->check(CLI::PositiveNumber);
  serve_cmd->add_option("--checkpoint", sv.checkpoint);
  serve_cmd->add_option("--log-dir", sv.log_dir);
  serve_cmd->add_option("--replay-log", sv.replay_log);

  fs::path replay_log;
  fs::path replay_out;
  auto* replay_cmd = app.add_subcommand("replay", "Re-simulate a logged trial and verify it");
  replay_cmd->add_option("--log", replay_log)->required()->check(CLI::ExistingFile);
  replay_cmd->add_option("--out", replay_out, "State messages as JSON lines");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (maps_gen->parsed()) return cmd_maps_generate(maps_out);
    if (collect_cmd->parsed()) return cmd_collect(collect, seed);
    if (train_cmd->parsed()) return cmd_train(train_config, seed, app.count("--seed") > 0);
    if (rollout_cmd->parsed()) return cmd_rollout(rollout, seed);
    if (ep_cmd->parsed()) return cmd_eval_plans(ep, seed);
    if (eh_cmd->parsed()) return cmd_eval_hil(eh, seed);
    if (serve_cmd->parsed()) return cmd_serve(sv, seed);
    if (replay_cmd->parsed()) return cmd_replay(replay_log, replay_out);
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}
