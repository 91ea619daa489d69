// Copyright 2026 The gradleak Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "gradleak/sweep.h"

#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "gtest/gtest.h"

namespace gradleak {
namespace {

namespace fs = std::filesystem;

std::string ReadFile(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int CountLines(const std::string& text) {
  int n = 0;
  for (char c : text) n += c == '\n';
  return n;
}

class SweepTest : public ::testing::Test {
 protected:
  void SetUp() override {
    root_ = fs::path(::testing::TempDir()) /
            ::testing::UnitTest::GetInstance()->current_test_info()->name();
    fs::remove_all(root_);
    fs::create_directories(root_);
  }
  void TearDown() override { fs::remove_all(root_); }

  static GridConfig SmallGrid(int trials) {
    GridConfig grid;
    grid.base.d = 4;
    grid.base.m = 64;
    grid.base.B = 1;
    grid.base.trials = trials;
    grid.base.base_seed = 3;
    grid.base.utility.steps = 5;
    grid.m_values = {64, 96};
    grid.defense_values = {{}, {DefenseConfig{NoiseDefense{0.01}, 0}}};
    return grid;
  }

  SweepOptions Options(const std::string& name) const {
    SweepOptions options;
    options.output_dir = (root_ / name).string();
    options.workers = 1;
    return options;
  }

  fs::path root_;
};

TEST_F(SweepTest, SinglePointSingleTrial) {
  GridConfig grid;
  grid.base.d = 4;
  grid.base.m = 64;
  grid.base.B = 1;
  grid.base.utility.steps = 5;
  auto summary = RunSweep(grid, Options("one"));
  ASSERT_TRUE(summary.ok()) << summary.status();
  EXPECT_TRUE(summary->complete);
  EXPECT_EQ(summary->trials_run, 1);
  const std::string csv = ReadFile(root_ / "one" / "results.csv");
  EXPECT_EQ(CountLines(csv), 2);
  EXPECT_EQ(csv.substr(0, CsvHeader().size()), CsvHeader());
  EXPECT_TRUE(fs::exists(root_ / "one" / "manifest.json"));
  EXPECT_TRUE(fs::exists(root_ / "one" / "results.json"));
}

TEST_F(SweepTest, RowCountIsPointsTimesTrialsTimesAttacks) {
  GridConfig grid = SmallGrid(2);
  grid.base.attacks.gradmatch = true;
  grid.base.attacks.gradmatch_config.optimizer.max_iters = 10;
  auto summary = RunSweep(grid, Options("rows"));
  ASSERT_TRUE(summary.ok()) << summary.status();
  EXPECT_EQ(summary->points, 4);
  EXPECT_EQ(CountLines(ReadFile(root_ / "rows" / "results.csv")),
            1 + 4 * 2 * 2);
}

TEST_F(SweepTest, RepeatedRunsGiveIdenticalBytes) {
  const GridConfig grid = SmallGrid(2);
  ASSERT_TRUE(RunSweep(grid, Options("a")).ok());
  SweepOptions threaded = Options("b");
  threaded.workers = 3;
  ASSERT_TRUE(RunSweep(grid, threaded).ok());
  EXPECT_EQ(ReadFile(root_ / "a" / "results.csv"),
            ReadFile(root_ / "b" / "results.csv"));
  EXPECT_EQ(ReadFile(root_ / "a" / "results.json"),
            ReadFile(root_ / "b" / "results.json"));
}

TEST_F(SweepTest, InterruptedRunResumesToIdenticalResults) {
  const GridConfig grid = SmallGrid(2);
  ASSERT_TRUE(RunSweep(grid, Options("full")).ok());

  SweepOptions partial = Options("resumed");
  partial.max_new_trials = 3;
  auto first = RunSweep(grid, partial);
  ASSERT_TRUE(first.ok()) << first.status();
  EXPECT_FALSE(first->complete);
  EXPECT_EQ(first->trials_run, 3);
  EXPECT_FALSE(fs::exists(root_ / "resumed" / "results.csv"));
  EXPECT_NE(ReadFile(root_ / "resumed" / "manifest.json").find("partial"),
            std::string::npos);
  // A torn final line, as left by a kill during a write, is ignored.
  {
    std::ofstream torn(root_ / "resumed" / "checkpoint.jsonl", std::ios::app);
    torn << "{\"config_hash\": \"abc";
  }
  partial.max_new_trials = 0;
  auto second = RunSweep(grid, partial);
  ASSERT_TRUE(second.ok()) << second.status();
  EXPECT_TRUE(second->complete);
  EXPECT_EQ(second->trials_resumed, 3);
  EXPECT_EQ(second->trials_run, 5);
  EXPECT_EQ(ReadFile(root_ / "full" / "results.csv"),
            ReadFile(root_ / "resumed" / "results.csv"));
  EXPECT_EQ(ReadFile(root_ / "full" / "results.json"),
            ReadFile(root_ / "resumed" / "results.json"));
}

TEST_F(SweepTest, CompleteRunIsNotRedone) {
  const GridConfig grid = SmallGrid(1);
  ASSERT_TRUE(RunSweep(grid, Options("x")).ok());
  const std::string manifest = ReadFile(root_ / "x" / "manifest.json");
  auto again = RunSweep(grid, Options("x"));
  ASSERT_TRUE(again.ok());
  EXPECT_TRUE(again->up_to_date);
  EXPECT_EQ(again->trials_run, 0);
  EXPECT_EQ(ReadFile(root_ / "x" / "manifest.json"), manifest);
}

TEST_F(SweepTest, MoreTrialsExtendAnExistingRun) {
  ASSERT_TRUE(RunSweep(SmallGrid(1), Options("grow")).ok());
  auto grown = RunSweep(SmallGrid(2), Options("grow"));
  ASSERT_TRUE(grown.ok()) << grown.status();
  EXPECT_EQ(grown->trials_resumed, 4);
  EXPECT_EQ(grown->trials_run, 4);
  ASSERT_TRUE(RunSweep(SmallGrid(2), Options("fresh")).ok());
  EXPECT_EQ(ReadFile(root_ / "grow" / "results.csv"),
            ReadFile(root_ / "fresh" / "results.csv"));
}

TEST_F(SweepTest, DifferentConfigNeedsForce) {
  ASSERT_TRUE(RunSweep(SmallGrid(1), Options("y")).ok());
  GridConfig other = SmallGrid(1);
  other.base.d = 5;
  auto refused = RunSweep(other, Options("y"));
  EXPECT_EQ(refused.status().code(), absl::StatusCode::kFailedPrecondition);
  SweepOptions force = Options("y");
  force.force = true;
  auto forced = RunSweep(other, force);
  ASSERT_TRUE(forced.ok()) << forced.status();
  EXPECT_EQ(forced->trials_run, 4);
  EXPECT_EQ(forced->trials_resumed, 0);
  auto records = ReadResultsCsv((root_ / "y" / "results.csv").string());
  ASSERT_TRUE(records.ok());
  for (const TrialRecord& r : *records) EXPECT_EQ(r.d, 5);
}

TEST_F(SweepTest, SeedOverrideChangesResults) {
  SweepOptions a = Options("s1");
  SweepOptions b = Options("s2");
  b.seed_override = 99;
  ASSERT_TRUE(RunSweep(SmallGrid(1), a).ok());
  ASSERT_TRUE(RunSweep(SmallGrid(1), b).ok());
  EXPECT_NE(ReadFile(root_ / "s1" / "results.csv"),
            ReadFile(root_ / "s2" / "results.csv"));
}

TEST_F(SweepTest, UnwritableDestinationFails) {
  { std::ofstream file(root_ / "plain_file"); }
  SweepOptions options = Options("plain_file/sub");
  auto result = RunSweep(SmallGrid(1), options);
  EXPECT_FALSE(result.ok());
  GridConfig grid = SmallGrid(1);
  EXPECT_FALSE(RunSweep(grid, SweepOptions{}).ok());
}

TEST_F(SweepTest, CsvRoundTripsThroughReader) {
  SweepOptions options = Options("csv");
  options.record_wall_time = true;
  ASSERT_TRUE(RunSweep(SmallGrid(1), options).ok());
  const std::string csv = ReadFile(root_ / "csv" / "results.csv");
  auto records = ReadResultsCsv((root_ / "csv" / "results.csv").string());
  ASSERT_TRUE(records.ok()) << records.status();
  ASSERT_EQ(records->size(), 4u);
  std::string rebuilt = CsvHeader();
  for (const TrialRecord& r : *records) rebuilt += CsvRows(r, true);
  EXPECT_EQ(rebuilt, csv);
  EXPECT_FALSE(ReadResultsCsv((root_ / "missing.csv").string()).ok());
}

TEST(FormatDoubleTest, RoundTripsExactly) {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, 12345.678901234567}) {
    EXPECT_EQ(std::stod(FormatDouble(v)), v);
  }
  EXPECT_EQ(FormatDouble(std::numeric_limits<double>::infinity()), "inf");
  EXPECT_EQ(FormatDouble(std::numeric_limits<double>::quiet_NaN()), "nan");
}

TrialRecord Row(const std::string& defense, double param, double rmse,
                double utility) {
  TrialRecord r;
  r.d = 4;
  r.m = 64;
  r.B = 1;
  r.defense = defense;
  r.defense_param = param;
  r.utility_loss = utility;
  AttackOutcome a;
  a.attack = "tensor";
  a.rmse = rmse;
  r.attacks = {a};
  return r;
}

TEST(BuildReportTest, GroupsClassesAndRanks) {
  const std::vector<TrialRecord> records = {
      Row("none", 0, 0.1, 1.00), Row("none", 0, 0.3, 1.00),
      Row("noise", 0.1, 0.6, 1.02), Row("clip", 1, 0.4, 1.03),
      Row("prune_ratio", 0.9, 0.9, 3.0)};
  auto rows = BuildReport(records, ReportOptions{});
  ASSERT_TRUE(rows.ok()) << rows.status();
  ASSERT_EQ(rows->size(), 4u);
  EXPECT_EQ((*rows)[0].defense, "noise");
  EXPECT_EQ((*rows)[0].utility_class, 0);
  EXPECT_EQ((*rows)[1].defense, "clip");
  EXPECT_EQ((*rows)[2].defense, "none");
  EXPECT_EQ((*rows)[2].trials, 2);
  EXPECT_DOUBLE_EQ((*rows)[2].score.score, 0.2);
  EXPECT_EQ((*rows)[3].defense, "prune_ratio");
  EXPECT_EQ((*rows)[3].utility_class, 1);

  ReportOptions strict;
  strict.utility_tolerance = 0.0;
  auto split = BuildReport(records, strict);
  ASSERT_TRUE(split.ok());
  EXPECT_EQ(split->back().utility_class, 3);
  EXPECT_NE(FormatReport(*rows, ReportOptions{}).find("prune_ratio"),
            std::string::npos);
  EXPECT_EQ(ReportToJson(*rows, ReportOptions{})["rows"].size(), 4u);
  EXPECT_FALSE(BuildReport({}, ReportOptions{}).ok());
}

}  // namespace
}  // namespace gradleak
