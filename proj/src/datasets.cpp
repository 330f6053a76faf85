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

#include "cocarry/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>

#include <openssl/evp.h>

#include "cocarry/error.hpp"

namespace cocarry {

namespace fs = std::filesystem;

MapCatalog default_catalog() {
  MapCatalog c;
  c.bounds = Bounds{0.0, 0.0, 12.0, 8.0};
  c.initial_poses = {Pose2(1.5, 2.5, 0.0), Pose2(1.5, 4.0, 0.0), Pose2(1.5, 5.5, 0.0)};
  c.goals = {GoalRegion{{10.5, 2.0}, 0.5}, GoalRegion{{10.5, 4.0}, 0.5},
             GoalRegion{{10.5, 6.0}, 0.5}};
  c.layouts = {
      {"center", {{{6.0, 4.0}, 0.8}}},
      {"gate", {{{6.0, 2.0}, 0.7}, {{6.0, 6.0}, 0.7}}},
      {"diagonal-up", {{{4.8, 5.0}, 0.6}, {{7.2, 3.0}, 0.6}}},
      {"diagonal-down", {{{4.8, 3.0}, 0.6}, {{7.2, 5.0}, 0.6}}},
      {"triangle", {{{4.6, 4.0}, 0.6}, {{7.4, 2.2}, 0.6}, {{7.4, 5.8}, 0.6}}},
      {"wall", {{{6.0, 1.3}, 0.6}, {{6.0, 4.0}, 0.6}, {{6.0, 6.7}, 0.6}}},
      {"column", {{{4.8, 4.0}, 0.6}, {{7.4, 4.0}, 0.6}}},
  };
  return c;
}

std::vector<MapConfig> unseen_maps() {
  const Bounds bounds{0.0, 0.0, 12.0, 8.0};
  std::vector<MapConfig> maps;
  maps.push_back({"unseen-offset", Pose2(1.5, 4.6, 0.0), {{{6.0, 4.3}, 0.9}},
                  GoalRegion{{10.5, 3.6}, 0.5}, bounds});
  maps.push_back({"unseen-staggered", Pose2(1.5, 3.2, 0.0),
                  {{{4.6, 3.3}, 0.6}, {{7.6, 4.9}, 0.6}}, GoalRegion{{10.5, 5.0}, 0.5}, bounds});
  maps.push_back({"unseen-pinch", Pose2(1.5, 5.0, 0.0),
                  {{{5.6, 2.4}, 0.8}, {{6.4, 6.3}, 0.8}, {{6.0, 4.4}, 0.35}},
                  GoalRegion{{10.5, 3.0}, 0.5}, bounds});
  return maps;
}

MapConfig fork_map() {
  return {"fork", Pose2(1.5, 4.0, 0.0), {{{6.0, 4.0}, 0.8}}, GoalRegion{{10.5, 4.0}, 0.5},
          Bounds{0.0, 0.0, 12.0, 8.0}};
}

std::vector<MapConfig> generate_maps(const MapCatalog& catalog, const TableGeometry& geom) {
  std::vector<MapConfig> maps;
  for (std::size_t p = 0; p < catalog.initial_poses.size(); ++p) {
    for (std::size_t o = 0; o < catalog.layouts.size(); ++o) {
      for (std::size_t g = 0; g < catalog.goals.size(); ++g) {
        MapConfig m;
        m.id = "p" + std::to_string(p) + "-o" + std::to_string(o) + "-g" + std::to_string(g);
        m.initial_pose = catalog.initial_poses[p];
        m.obstacles = catalog.layouts[o].obstacles;
        m.goal = catalog.goals[g];
        m.bounds = catalog.bounds;
        validate_map(m, geom);
        maps.push_back(std::move(m));
      }
    }
  }
  return maps;
}

std::string catalog_hash(const MapCatalog& catalog) {
  nlohmann::json j;
  j["initial_poses"] = catalog.initial_poses;
  j["goals"] = catalog.goals;
  j["bounds"] = catalog.bounds;
  for (const auto& l : catalog.layouts) j["layouts"].push_back({{"name", l.name}, {"obstacles", l.obstacles}});
  const std::string s = j.dump();
  return sha256_hex(s);
}

Split split_indices(std::size_t n, double ratio, std::uint64_t seed) {
  if (n < 2) throw Error("split needs at least 2 trajectories");
  if (!(ratio > 0.0 && ratio < 1.0)) throw Error("split ratio must be in (0, 1)");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_train = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n)));
  Split s;
  s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.val.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  return s;
}

std::array<double, ObservationFrame::kMotionDim> Window::target(std::size_t i) const {
  const ObservationFrame& f = frames.at(i);
  return {f.dp.x(), f.dp.y(), f.dcos, f.dsin};
}

std::vector<Window> extract_windows(const Trajectory& traj, std::size_t source,
                                    std::size_t length, std::size_t stride) {
  if (length == 0 || stride == 0) throw Error("window length and stride must be positive");
  std::vector<Window> out;
  const std::size_t n = traj.steps.size();
  if (n < length) return out;
  for (std::size_t start = 0; start + length <= n; start += stride) {
    Window w;
    w.source = source;
    w.start_tick = traj.steps[start].tick;
    w.frames.reserve(length);
    for (std::size_t i = start; i < start + length; ++i) w.frames.push_back(traj.steps[i].obs);
    out.push_back(std::move(w));
  }
  return out;
}

ObservationFrame mirror_frame(const ObservationFrame& f) {
  ObservationFrame m = f;
  m.dp.y() = -f.dp.y();
  m.dsin = -f.dsin;
  m.d_goal_ego.y() = -f.d_goal_ego.y();
  m.d_obs_ego.y() = -f.d_obs_ego.y();
  return m;
}

Window mirror_window(const Window& w) {
  Window m = w;
  for (auto& f : m.frames) f = mirror_frame(f);
  return m;
}

void append_mirrored(std::vector<Window>& windows) {
  const std::size_t n = windows.size();
  windows.reserve(2 * n);
  for (std::size_t i = 0; i < n; ++i) windows.push_back(mirror_window(windows[i]));
}

std::array<double, ObservationFrame::kDim> Normalization::apply(const ObservationFrame& f) const {
  auto v = f.to_array();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = (v[i] - mean[i]) / scale[i];
  return v;
}

std::array<double, ObservationFrame::kMotionDim> Normalization::restore_motion(
    std::span<const double, ObservationFrame::kMotionDim> normalized) const {
  std::array<double, ObservationFrame::kMotionDim> out{};
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = normalized[i] * scale[i] + mean[i];
  return out;
}

Normalization fit_normalization(std::span<const Trajectory> trajectories,
                                std::span<const std::size_t> indices) {
  std::array<double, ObservationFrame::kDim> sum{};
  std::array<double, ObservationFrame::kDim> sum_sq{};
  double count = 0.0;
  for (std::size_t idx : indices) {
    for (const auto& s : trajectories[idx].steps) {
      const auto v = s.obs.to_array();
      for (std::size_t i = 0; i < v.size(); ++i) {
        sum[i] += v[i];
        sum_sq[i] += v[i] * v[i];
      }
      count += 1.0;
    }
  }
  Normalization n;
  if (count == 0.0) return n;
  for (std::size_t i = 0; i < n.mean.size(); ++i) {
    n.mean[i] = sum[i] / count;
    const double var = std::max(sum_sq[i] / count - n.mean[i] * n.mean[i], 0.0);
    n.scale[i] = std::max(std::sqrt(var), 1e-6);
  }
  return n;
}

Normalization mirror_symmetric(const Normalization& n) {
  Normalization m = n;
  for (std::size_t i : {1, 3, 5, 7}) {
    m.mean[i] = 0.0;
    m.scale[i] = std::hypot(n.scale[i], n.mean[i]);
  }
  return m;
}

void to_json(nlohmann::json& j, const Normalization& n) {
  j = nlohmann::json{{"mean", n.mean}, {"scale", n.scale}};
}

void from_json(const nlohmann::json& j, Normalization& n) {
  n.mean = j.at("mean").get<std::array<double, ObservationFrame::kDim>>();
  n.scale = j.at("scale").get<std::array<double, ObservationFrame::kDim>>();
}

Dataset make_dataset(std::vector<Trajectory> trajectories, double ratio, std::uint64_t seed,
                     std::string hash) {
  Dataset d;
  d.split = split_indices(trajectories.size(), ratio, seed);
  d.normalization = fit_normalization(trajectories, d.split.train);
  d.trajectories = std::move(trajectories);
  d.catalog_hash = std::move(hash);
  return d;
}

// --- storage ----------------------------------------------------------------

std::string sha256_hex(std::span<const char> bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("sha256 failed");
  }
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) {
    os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return os.str();
}

void write_file_atomic(const fs::path& path, const std::string& contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << contents;
    if (!out) throw Error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void save_trajectory(const Trajectory& traj, const fs::path& path) {
  std::ostringstream os;
  write_trajectory_jsonl(os, traj);
  write_file_atomic(path, os.str());
}

Trajectory load_trajectory(const fs::path& path) {
  std::istringstream in(read_file(path));
  try {
    return read_trajectory_jsonl(in);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

namespace {

std::string trajectory_file_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%05zu.jsonl", i);
  return buf;
}

}  // namespace

void save_dataset(const Dataset& dataset, const fs::path& dir) {
  fs::create_directories(dir / "trajectories");
  nlohmann::json files = nlohmann::json::array();
  for (std::size_t i = 0; i < dataset.trajectories.size(); ++i) {
    std::ostringstream os;
    write_trajectory_jsonl(os, dataset.trajectories[i]);
    const std::string body = os.str();
    const std::string name = "trajectories/" + trajectory_file_name(i);
    write_file_atomic(dir / name, body);
    files.push_back({{"path", name}, {"sha256", sha256_hex(body)},
                     {"map_id", dataset.trajectories[i].map_id}});
  }
  const nlohmann::json manifest{{"format", "cocarry-dataset"},
                                {"version", dataset.format_version},
                                {"count", dataset.trajectories.size()},
                                {"train", dataset.split.train},
                                {"val", dataset.split.val},
                                {"normalization", dataset.normalization},
                                {"catalog_hash", dataset.catalog_hash},
                                {"files", files}};
  write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
}

Dataset load_dataset(const fs::path& dir) {
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_file(dir / "manifest.json"));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("manifest.json: " + std::string(e.what()));
  }
  Dataset d;
  try {
    if (manifest.at("format").get<std::string>() != "cocarry-dataset") {
      throw DataError("manifest.json: not a dataset manifest");
    }
    d.format_version = manifest.at("version").get<int>();
    if (d.format_version != kDatasetFormatVersion) {
      throw DataError("manifest.json: unsupported dataset version " + std::to_string(d.format_version));
    }
    d.split.train = manifest.at("train").get<std::vector<std::size_t>>();
    d.split.val = manifest.at("val").get<std::vector<std::size_t>>();
    d.normalization = manifest.at("normalization").get<Normalization>();
    d.catalog_hash = manifest.at("catalog_hash").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError("manifest.json: " + std::string(e.what()));
  }

  const auto& files = manifest.at("files");
  if (files.size() != manifest.at("count").get<std::size_t>()) {
    throw DataError("manifest.json: file list does not match count");
  }
  for (const auto& f : files) {
    const fs::path path = dir / f.at("path").get<std::string>();
    const std::string body = read_file(path);
    if (sha256_hex(body) != f.at("sha256").get<std::string>()) {
      throw DataError(path.string() + ": checksum mismatch");
    }
    std::istringstream in(body);
    try {
      d.trajectories.push_back(read_trajectory_jsonl(in));
    } catch (const DataError& e) {
      throw DataError(path.string() + ": " + e.what());
    }
  }

  std::vector<std::size_t> all = d.split.train;
  all.insert(all.end(), d.split.val.begin(), d.split.val.end());
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (all[i] != i || all.size() != d.trajectories.size()) {
      throw DataError("manifest.json: split indices are not a partition of the trajectories");
    }
  }
  if (all.size() != d.trajectories.size()) {
    throw DataError("manifest.json: split indices are not a partition of the trajectories");
  }
  return d;
}

}  // namespace cocarry
