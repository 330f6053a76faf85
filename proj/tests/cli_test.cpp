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

// End-to-end tests of the command-line tool.

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <gtest/gtest.h>
#include <json.hpp>

#include "cocarry/datasets.hpp"
#include "cocarry/session.hpp"

namespace cocarry {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = fs::temp_directory_path() / "cocarry_cli_test";
    fs::remove_all(root_);
    fs::create_directories(root_);
  }
  static void TearDownTestSuite() { fs::remove_all(root_); }

  // Runs the tool and returns its exit status; output goes to `log`.
  static int Run(const std::string& args, const std::string& log = "last.log") {
    const std::string cmd =
        std::string(COCARRY_CLI_PATH) + " " + args + " > " + (root_ / log).string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }
  static std::string Output(const std::string& log = "last.log") { return read_file(root_ / log); }

  // Small dataset and checkpoint shared by the model-dependent tests.
  static void EnsureCheckpoint() {
    if (fs::exists(root_ / "model.json")) return;
    ASSERT_EQ(Run("--seed 4 collect --policy scripted --map fork --count 6 --alternate-sides --out " +
                  (root_ / "ds").string()),
              0)
        << Output();
    const json cfg = {{"dataset", "ds"},
                      {"output", "model.json"},
                      {"stride", 40},
                      {"hyper",
                       {{"history", 30}, {"window", 60}, {"latent_dim", 2}, {"enc_hidden", 16},
                        {"small_hidden", 16}, {"gru_hidden", 16}, {"epochs", 1}, {"batch_size", 8}}}};
    std::ofstream(root_ / "train.json") << cfg.dump();
    ASSERT_EQ(Run("train --config " + (root_ / "train.json").string()), 0) << Output();
  }

  static fs::path root_;
};

fs::path Cli::root_;

TEST_F(Cli, NoArgumentsAndUnknownFlagsAreUsageErrors) {
  EXPECT_EQ(Run(""), 1);
  EXPECT_EQ(Run("--bogus"), 1);
  EXPECT_EQ(Run("rollout --checkpoint x --map fork --samples 0"), 1);
  EXPECT_EQ(Run("--help"), 0);
}

TEST_F(Cli, MapsGenerateWritesTheCatalog) {
  const fs::path out = root_ / "maps";
  ASSERT_EQ(Run("maps generate --out " + out.string()), 0) << Output();
  int files = 0;
  for (const auto& e : fs::directory_iterator(out)) files += e.path().filename() != "manifest.json";
  EXPECT_EQ(files, 63);
  const json manifest = json::parse(read_file(out / "manifest.json"));
  EXPECT_EQ(manifest["count"], 63);
  EXPECT_EQ(manifest["catalog_hash"], catalog_hash(default_catalog()));
  const MapConfig m = json::parse(read_file(out / "p1-o3-g2.json")).get<MapConfig>();
  EXPECT_EQ(m.id, "p1-o3-g2");
}

TEST_F(Cli, MissingDatasetIsADataError) {
  const json cfg = {{"dataset", "nowhere"}, {"output", "m.json"}};
  std::ofstream(root_ / "bad_train.json") << cfg.dump();
  EXPECT_EQ(Run("train --config " + (root_ / "bad_train.json").string()), 2);
}

TEST_F(Cli, UnknownMapIsADataError) {
  EXPECT_EQ(Run("collect --map no-such-map --count 2 --out " + (root_ / "nomap").string()), 2);
}

TEST_F(Cli, CollectWritesALoadableDataset) {
  EnsureCheckpoint();
  const Dataset ds = load_dataset(root_ / "ds");
  EXPECT_EQ(ds.trajectories.size(), 6u);
  EXPECT_EQ(ds.split.train.size(), 4u);
  for (const auto& t : ds.trajectories) EXPECT_EQ(t.outcome, Outcome::kSuccess);
}

TEST_F(Cli, RolloutWritesSamplesAndIsSeedDeterministic) {
  EnsureCheckpoint();
  const std::string base = "rollout --checkpoint " + (root_ / "model.json").string() +
                           " --map fork --samples 16 --horizon 20 --out ";
  ASSERT_EQ(Run("--seed 1 " + base + (root_ / "r1").string()), 0) << Output();
  ASSERT_EQ(Run("--seed 1 " + base + (root_ / "r2").string()), 0) << Output();
  ASSERT_EQ(Run("--seed 2 " + base + (root_ / "r3").string()), 0) << Output();
  const json poses = json::parse(read_file(root_ / "r1" / "fork.poses.json"));
  ASSERT_EQ(poses["samples"].size(), 16u);
  EXPECT_EQ(poses["samples"][0].size(), 21u);  // start pose plus horizon
  EXPECT_TRUE(fs::exists(root_ / "r1" / "fork.csv"));
  EXPECT_NE(read_file(root_ / "r1" / "fork.svg").find("<svg"), std::string::npos);
  EXPECT_EQ(read_file(root_ / "r1" / "fork.poses.json"), read_file(root_ / "r2" / "fork.poses.json"));
  EXPECT_NE(read_file(root_ / "r1" / "fork.poses.json"), read_file(root_ / "r3" / "fork.poses.json"));
}

TEST_F(Cli, EvalPlansOnIdenticalSetsGivesZeroDistance) {
  EnsureCheckpoint();
  ASSERT_EQ(Run("rollout --checkpoint " + (root_ / "model.json").string() +
                " --map fork --samples 16 --horizon 20 --out " + (root_ / "same").string()),
            0);
  const fs::path p = root_ / "same" / "fork.poses.json";
  ASSERT_EQ(Run("eval-plans --gt " + p.string() + " --generated " + p.string() + " --out " +
                (root_ / "same.json").string()),
            0)
      << Output();
  const json r = json::parse(read_file(root_ / "same.json"));
  EXPECT_NEAR(r["generated"]["L2"].get<double>(), 0.0, 1e-12);
  EXPECT_NEAR(r["generated"]["FD"].get<double>(), 0.0, 1e-6);
}

TEST_F(Cli, EvalPlansFromCheckpointReportsBothPlanners) {
  EnsureCheckpoint();
  ASSERT_EQ(Run("eval-plans --checkpoint " + (root_ / "model.json").string() + " --gt " + (root_ / "ds").string() +
                " --split all --samples 2 --anchor-stride 200 --horizon 30 --out " + (root_ / "ep.json").string()),
            0)
      << Output();
  const json r = json::parse(read_file(root_ / "ep.json"));
  EXPECT_TRUE(r.contains("VRNN"));
  EXPECT_TRUE(r.contains("RRT"));
  EXPECT_TRUE(r["VRNN"]["FD"].is_number());
}

TEST_F(Cli, ReplayVerifiesADemonstration) {
  EnsureCheckpoint();
  const fs::path traj = root_ / "ds" / "trajectories" / "00000.jsonl";
  EXPECT_EQ(Run("replay --log " + traj.string() + " --out " + (root_ / "replay.jsonl").string()), 0) << Output();
  EXPECT_NE(Output().find("bit-exactly"), std::string::npos);

  // Tamper with one action: the replay must diverge.
  Trajectory t = load_trajectory(traj);
  t.steps[5].action_robot = AgentAction(-1.0, 1.0);
  save_trajectory(t, root_ / "tampered.jsonl");
  EXPECT_EQ(Run("replay --log " + (root_ / "tampered.jsonl").string()), 2);
}

TEST_F(Cli, EvalHilSummarizesTrialLogs) {
  const fs::path logs = root_ / "hil";
  fs::create_directories(logs);
  for (int i = 0; i < 3; ++i) {
    SessionConfig c;
    c.mode = SessionMode::kScripted;
    c.map = fork_map();
    c.seed = static_cast<std::uint64_t>(i);
    Session s(c);
    MemoryChannel ch;
    TrialLog log = run_trial(s, ch);
    save_trial_log(log, logs / ("t" + std::to_string(i) + ".json"));
  }
  ASSERT_EQ(Run("eval-hil --logs " + logs.string() + " --out " + (root_ / "hil.json").string()), 0) << Output();
  const json r = json::parse(read_file(root_ / "hil.json"));
  EXPECT_TRUE(r["scripted"]["Success"].is_number());
  EXPECT_EQ(r["turing"]["scripted"]["trials"], 3);
}

}  // namespace
}  // namespace cocarry
