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

// Demonstration storage, the map catalog, train/validation splits, and
// training-window extraction.

#ifndef COCARRY_DATASETS_HPP_
#define COCARRY_DATASETS_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "cocarry/sim.hpp"
#include "cocarry/world.hpp"

namespace cocarry {

// --- map catalog ------------------------------------------------------------

struct ObstacleLayout {
  std::string name;
  std::vector<Obstacle> obstacles;
};

struct MapCatalog {
  std::vector<Pose2> initial_poses;
  std::vector<ObstacleLayout> layouts;
  std::vector<GoalRegion> goals;
  Bounds bounds;
};

// 3 start poses on the left, 7 obstacle layouts in the middle band, and 3
// goals on the right of a 12 m x 8 m field.
MapCatalog default_catalog();

// Held-out layouts whose obstacles sit on the routes the catalog maps favour.
std::vector<MapConfig> unseen_maps();

// Single central obstacle between a centred start and goal; demonstrations on
// it split into passing above or below.
MapConfig fork_map();

// Cross product in (pose, layout, goal) order with ids "p{i}-o{j}-g{k}".
// Throws Error if any map violates the world invariants.
std::vector<MapConfig> generate_maps(const MapCatalog& catalog, const TableGeometry& geom = {});

std::string catalog_hash(const MapCatalog& catalog);

// --- splitting and windows --------------------------------------------------

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
};

// Seeded shuffle of 0..n-1, then floor(ratio * n) indices into train.
Split split_indices(std::size_t n, double ratio, std::uint64_t seed);

struct Window {
  std::size_t source = 0;  // trajectory index within its dataset
  std::int64_t start_tick = 0;
  std::vector<ObservationFrame> frames;

  // Motion part (dp, dcos, dsin) of frame i, the prediction target.
  std::array<double, ObservationFrame::kMotionDim> target(std::size_t i) const;
};

inline constexpr std::size_t kDefaultWindowStride = 10;

// Windows of exactly `length` frames starting every `stride` ticks.
std::vector<Window> extract_windows(const Trajectory& traj, std::size_t source,
                                    std::size_t length, std::size_t stride);

// Reflection across the world x axis: y, theta and every lateral component
// change sign.
ObservationFrame mirror_frame(const ObservationFrame& f);
Window mirror_window(const Window& w);
// Appends the mirror image of every window.
void append_mirrored(std::vector<Window>& windows);

// Per-dimension standardization of observation frames. The motion targets
// share the statistics of the first four input dimensions.
struct Normalization {
  std::array<double, ObservationFrame::kDim> mean{};
  std::array<double, ObservationFrame::kDim> scale{1, 1, 1, 1, 1, 1, 1, 1};

  std::array<double, ObservationFrame::kDim> apply(const ObservationFrame& f) const;
  std::array<double, ObservationFrame::kMotionDim> restore_motion(
      std::span<const double, ObservationFrame::kMotionDim> normalized) const;

  bool operator==(const Normalization&) const = default;
};

Normalization fit_normalization(std::span<const Trajectory> trajectories,
                                std::span<const std::size_t> indices);
// Statistics of the data unioned with its mirror image: lateral means become
// zero and their scales absorb the old means.
Normalization mirror_symmetric(const Normalization& n);

void to_json(nlohmann::json& j, const Normalization& n);
void from_json(const nlohmann::json& j, Normalization& n);

// --- storage ------------------------------------------------------------------

inline constexpr int kDatasetFormatVersion = 1;

struct Dataset {
  std::vector<Trajectory> trajectories;
  Split split;
  Normalization normalization;
  std::string catalog_hash;
  int format_version = kDatasetFormatVersion;
};

// Splits with the given ratio/seed and fits normalization on the train part.
Dataset make_dataset(std::vector<Trajectory> trajectories, double ratio, std::uint64_t seed,
                     std::string catalog_hash = {});

// Writes trajectories/NNNNN.jsonl plus manifest.json (counts, split,
// normalization, catalog hash, per-file SHA-256).
void save_dataset(const Dataset& dataset, const std::filesystem::path& dir);

// Throws DataError on version mismatch, checksum mismatch, or a malformed
// record (naming the file and line).
Dataset load_dataset(const std::filesystem::path& dir);

std::string sha256_hex(std::span<const char> bytes);

void save_trajectory(const Trajectory& traj, const std::filesystem::path& path);
Trajectory load_trajectory(const std::filesystem::path& path);

// Writes to a sibling temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);
std::string read_file(const std::filesystem::path& path);

}  // namespace cocarry

#endif  // COCARRY_DATASETS_HPP_
