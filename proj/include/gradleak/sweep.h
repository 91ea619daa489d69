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

#ifndef GRADLEAK_SWEEP_H_
#define GRADLEAK_SWEEP_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "absl/types/span.h"
#include "gradleak/config.h"
#include "gradleak/experiment.h"

namespace gradleak {

inline constexpr char kGradleakVersion[] = "0.1.0";

struct SweepOptions {
  // Overrides the config's output_dir when non-empty.
  std::string output_dir;
  // Discard existing results in the output directory and start over.
  bool force = false;
  // 0 reads GRADLEAK_WORKERS, falling back to 1.
  int workers = 0;
  // Write measured wall times into the CSV. Off by default so that the CSV
  // is a pure function of the config; times always go to the manifest.
  bool record_wall_time = false;
  // Stop after this many newly finished trials (0 = no limit), leaving a
  // resumable partial run behind.
  int max_new_trials = 0;
  std::optional<uint64_t> seed_override;
};

struct SweepSummary {
  std::string output_dir;
  int points = 0;
  int trials_total = 0;
  int trials_run = 0;
  int trials_resumed = 0;
  bool complete = false;
  // The directory already held the complete results of this config.
  bool up_to_date = false;
};

// Runs every (grid point, trial) pair. Finished trials are appended to
// checkpoint.jsonl as they complete; once all are done results.csv,
// results.json and manifest.json are written in (grid index, trial) order.
// A partial run of the same config resumes; a different config in the same
// directory needs `force`.
absl::StatusOr<SweepSummary> RunSweep(const GridConfig& grid,
                                      const SweepOptions& options);

int WorkersFromEnvironment();

// %.17g, with nan/inf spelled out.
std::string FormatDouble(double value);

std::string CsvHeader();
// One line per attack outcome, each ending in '\n'.
std::string CsvRows(const TrialRecord& record, bool include_wall_time);

// Inverse of CsvRows over a whole file: one record per (config_hash, trial)
// in first-seen order. Only the CSV columns are filled in.
absl::StatusOr<std::vector<TrialRecord>> ReadResultsCsv(
    const std::string& path);

struct ReportOptions {
  ScoreMode mode = ScoreMode::kStrongestAttackMin;
  // Defenses whose mean utility losses differ by at most this fraction of
  // the larger one land in the same utility class.
  double utility_tolerance = 0.05;
};

struct ReportRow {
  int d = 0, m = 0, B = 0;
  std::string defense;
  double defense_param = 0.0;
  int trials = 0;
  DefenseScoreResult score;
  double mean_utility_loss = 0.0;
  double mean_rl_exact = 0.0;
  // Rows of equal (d, m, B) and utility class are compared directly; the
  // class index counts up in order of increasing utility loss.
  int utility_class = 0;
};

// Groups records by (d, m, B, defense, defense_param). Rows come out sorted
// by (d, m, B, utility class, score descending).
absl::StatusOr<std::vector<ReportRow>> BuildReport(
    absl::Span<const TrialRecord> records, const ReportOptions& options);

std::string FormatReport(absl::Span<const ReportRow> rows,
                         const ReportOptions& options);
Json ReportToJson(absl::Span<const ReportRow> rows,
                  const ReportOptions& options);

}  // namespace gradleak

#endif  // GRADLEAK_SWEEP_H_
