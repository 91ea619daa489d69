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

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>
#include <utility>

#include "absl/strings/numbers.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "absl/strings/str_split.h"
#include "gradleak/status_macros.h"

namespace gradleak {
namespace {

namespace fs = std::filesystem;

constexpr char kCheckpoint[] = "checkpoint.jsonl";
constexpr char kManifest[] = "manifest.json";
constexpr char kResultsCsv[] = "results.csv";
constexpr char kResultsJson[] = "results.json";

std::string UtcTimestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

absl::Status WriteFileAtomically(const fs::path& path,
                                 const std::string& contents) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      return absl::PermissionDeniedError(
          absl::StrCat("cannot write '", tmp.string(), "'"));
    }
    out << contents;
    if (!out.flush()) {
      return absl::DataLossError(
          absl::StrCat("short write to '", tmp.string(), "'"));
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    return absl::PermissionDeniedError(absl::StrCat(
        "cannot rename '", tmp.string(), "': ", ec.message()));
  }
  return absl::OkStatus();
}

absl::StatusOr<Json> ReadJsonFile(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    return absl::NotFoundError(
        absl::StrCat("cannot open '", path.string(), "'"));
  }
  Json j = Json::parse(in, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) {
    return absl::DataLossError(
        absl::StrCat("'", path.string(), "' is not valid JSON"));
  }
  return j;
}

// Checkpointed records keyed by (grid index, trial). A torn final line from
// an interrupted write is ignored.
std::map<std::pair<int, int>, TrialRecord> LoadCheckpoint(
    const fs::path& path) {
  std::map<std::pair<int, int>, TrialRecord> out;
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    Json j = Json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded()) continue;
    absl::StatusOr<TrialRecord> record = TrialRecordFromJson(j);
    if (!record.ok()) continue;
    out[{record->grid_index, record->trial}] = *std::move(record);
  }
  return out;
}

// Everything that determines row contents. The trial count is left out so
// that raising it extends an existing run.
Json ComparableConfig(const GridConfig& grid) {
  Json j = GridToJson(grid);
  j.erase("output_dir");
  j.erase("trials");
  return j;
}

struct Job {
  int point;
  int trial;
};

}  // namespace

int WorkersFromEnvironment() {
  const char* env = std::getenv("GRADLEAK_WORKERS");
  int workers = 0;
  if (env != nullptr && absl::SimpleAtoi(env, &workers) && workers >= 1) {
    return workers;
  }
  return 1;
}

std::string FormatDouble(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  return absl::StrFormat("%.17g", value);
}

std::string CsvHeader() {
  return "config_hash,trial,d,m,B,defense,defense_param,attack,rmse,"
         "rl_exact,rl_loose,utility_loss,wall_ms\n";
}

std::string CsvRows(const TrialRecord& r, bool include_wall_time) {
  std::string out;
  for (const AttackOutcome& a : r.attacks) {
    absl::StrAppend(&out, r.config_hash, ",", r.trial, ",", r.d, ",", r.m, ",",
                    r.B, ",", r.defense, ",", FormatDouble(r.defense_param),
                    ",", a.attack, ",", FormatDouble(a.rmse), ",",
                    FormatDouble(r.rl_exact), ",", FormatDouble(r.rl_loose),
                    ",", FormatDouble(r.utility_loss), ",",
                    include_wall_time ? FormatDouble(r.wall_ms) : "0", "\n");
  }
  return out;
}

absl::StatusOr<std::vector<TrialRecord>> ReadResultsCsv(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    return absl::NotFoundError(absl::StrCat("cannot open '", path, "'"));
  }
  std::string line;
  if (!std::getline(in, line) || line + "\n" != CsvHeader()) {
    return absl::InvalidArgumentError(
        absl::StrCat("'", path, "': missing or unexpected CSV header"));
  }
  std::vector<TrialRecord> records;
  std::map<std::pair<std::string, int>, size_t> index;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::vector<std::string> f = absl::StrSplit(line, ',');
    auto bad = [&](const std::string& what) {
      return absl::InvalidArgumentError(
          absl::StrCat(path, ":", line_no, ": ", what));
    };
    if (f.size() != 13) return bad("expected 13 fields");
    TrialRecord r;
    AttackOutcome a;
    r.config_hash = f[0];
    r.defense = f[5];
    a.attack = f[7];
    if (!absl::SimpleAtoi(f[1], &r.trial) || !absl::SimpleAtoi(f[2], &r.d) ||
        !absl::SimpleAtoi(f[3], &r.m) || !absl::SimpleAtoi(f[4], &r.B)) {
      return bad("bad integer field");
    }
    if (!absl::SimpleAtod(f[6], &r.defense_param) ||
        !absl::SimpleAtod(f[8], &a.rmse) ||
        !absl::SimpleAtod(f[9], &r.rl_exact) ||
        !absl::SimpleAtod(f[10], &r.rl_loose) ||
        !absl::SimpleAtod(f[11], &r.utility_loss) ||
        !absl::SimpleAtod(f[12], &r.wall_ms)) {
      return bad("bad numeric field");
    }
    const auto key = std::make_pair(r.config_hash, r.trial);
    auto it = index.find(key);
    if (it == index.end()) {
      index[key] = records.size();
      r.attacks.push_back(std::move(a));
      records.push_back(std::move(r));
    } else {
      records[it->second].attacks.push_back(std::move(a));
    }
  }
  return records;
}

absl::StatusOr<SweepSummary> RunSweep(const GridConfig& input,
                                      const SweepOptions& options) {
  GridConfig grid = input;
  if (options.seed_override.has_value()) {
    grid.base.base_seed = *options.seed_override;
  }
  if (!options.output_dir.empty()) grid.base.output_dir = options.output_dir;
  if (grid.base.output_dir.empty()) {
    return absl::InvalidArgumentError("sweep: no output directory");
  }
  const std::vector<ExperimentConfig> points = grid.Points();
  if (points.empty()) return absl::InvalidArgumentError("sweep: empty grid");
  std::vector<std::string> hashes;
  for (size_t k = 0; k < points.size(); ++k) {
    RETURN_IF_ERROR(WithStage(absl::StrCat("grid point ", k),
                              points[k].Validate()));
    hashes.push_back(ConfigHash(points[k]));
  }
  const int trials = grid.base.trials;

  const fs::path dir(grid.base.output_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    return absl::PermissionDeniedError(absl::StrCat(
        "sweep: cannot create output directory '", dir.string(), "'"));
  }
  const Json comparable = ComparableConfig(grid);

  SweepSummary summary;
  summary.output_dir = dir.string();
  summary.points = static_cast<int>(points.size());
  summary.trials_total = summary.points * trials;

  std::map<std::pair<int, int>, TrialRecord> done;
  Json manifest;
  if (fs::exists(dir / kManifest) && !options.force) {
    ASSIGN_OR_RETURN(manifest, ReadJsonFile(dir / kManifest));
    if (!manifest.contains("config") || manifest["config"] != comparable) {
      return absl::FailedPreconditionError(absl::StrCat(
          "sweep: '", dir.string(),
          "' holds results of a different config; rerun with --force"));
    }
    if (manifest.value("status", "") == "complete" &&
        manifest.value("trials", -1) == trials) {
      summary.complete = true;
      summary.up_to_date = true;
      summary.trials_resumed = summary.trials_total;
      return summary;
    }
    for (auto& [key, record] : LoadCheckpoint(dir / kCheckpoint)) {
      if (key.first < summary.points && key.second < trials &&
          record.config_hash == hashes[key.first]) {
        done.emplace(key, std::move(record));
      }
    }
  } else {
    for (const char* name : {kCheckpoint, kManifest, kResultsCsv,
                             kResultsJson}) {
      fs::remove(dir / name, ec);
    }
    manifest = Json::object();
    manifest["started_at"] = UtcTimestamp();
  }
  summary.trials_resumed = static_cast<int>(done.size());

  manifest["config"] = comparable;
  manifest["config_hashes"] = hashes;
  manifest["code_version"] = kGradleakVersion;
  manifest["base_seed"] = grid.base.base_seed;
  manifest["trials"] = trials;
  manifest["points"] = summary.points;
  manifest["status"] = "partial";
  RETURN_IF_ERROR(WriteFileAtomically(dir / kManifest, manifest.dump(2)));

  std::vector<Job> jobs;
  for (int p = 0; p < summary.points; ++p) {
    for (int t = 0; t < trials; ++t) {
      if (done.count({p, t}) == 0) jobs.push_back({p, t});
    }
  }
  if (options.max_new_trials > 0 &&
      static_cast<int>(jobs.size()) > options.max_new_trials) {
    jobs.resize(options.max_new_trials);
  }

  std::ofstream checkpoint(dir / kCheckpoint, std::ios::app);
  if (!checkpoint) {
    return absl::PermissionDeniedError("sweep: cannot append to checkpoint");
  }
  std::mutex mu;
  std::atomic<size_t> next{0};
  absl::Status first_error;
  auto worker = [&]() {
    for (size_t k = next++; k < jobs.size(); k = next++) {
      const Job job = jobs[k];
      absl::StatusOr<TrialRecord> record = RunTrial(points[job.point],
                                                    job.trial);
      std::lock_guard<std::mutex> lock(mu);
      if (!record.ok()) {
        if (first_error.ok()) {
          first_error = WithStage(
              absl::StrCat("point ", job.point, " trial ", job.trial),
              record.status());
        }
        continue;
      }
      record->grid_index = job.point;
      record->config_hash = hashes[job.point];
      checkpoint << TrialRecordToJson(*record).dump() << "\n";
      checkpoint.flush();
      done[{job.point, job.trial}] = *std::move(record);
      ++summary.trials_run;
    }
  };
  const int workers =
      std::max(1, options.workers > 0 ? options.workers
                                      : WorkersFromEnvironment());
  std::vector<std::thread> pool;
  for (int w = 1; w < std::min<int>(workers, jobs.size()); ++w) {
    pool.emplace_back(worker);
  }
  worker();
  for (std::thread& t : pool) t.join();
  checkpoint.close();
  RETURN_IF_ERROR(first_error);

  Json timings = Json::object();
  for (const auto& [key, record] : done) {
    timings[absl::StrCat(key.first, ":", key.second)] =
        NumberToJson(record.wall_ms);
  }
  manifest["wall_ms"] = timings;
  manifest["workers"] = workers;
  summary.complete = static_cast<int>(done.size()) == summary.trials_total;
  if (!summary.complete) {
    RETURN_IF_ERROR(WriteFileAtomically(dir / kManifest, manifest.dump(2)));
    return summary;
  }

  std::string csv = CsvHeader();
  Json results = Json::array();
  for (const auto& [key, record] : done) {
    csv += CsvRows(record, options.record_wall_time);
    Json j = TrialRecordToJson(record);
    if (!options.record_wall_time) j.erase("wall_ms");
    results.push_back(std::move(j));
  }
  RETURN_IF_ERROR(WriteFileAtomically(dir / kResultsCsv, csv));
  RETURN_IF_ERROR(WriteFileAtomically(dir / kResultsJson, results.dump(2)));
  manifest["status"] = "complete";
  manifest["finished_at"] = UtcTimestamp();
  RETURN_IF_ERROR(WriteFileAtomically(dir / kManifest, manifest.dump(2)));
  return summary;
}

absl::StatusOr<std::vector<ReportRow>> BuildReport(
    absl::Span<const TrialRecord> records, const ReportOptions& options) {
  if (records.empty()) return absl::InvalidArgumentError("report: no records");
  if (!(options.utility_tolerance >= 0.0)) {
    return absl::InvalidArgumentError("report: utility_tolerance must be >= 0");
  }
  using Key = std::tuple<int, int, int, std::string, double>;
  std::map<Key, std::vector<TrialRecord>> groups;
  for (const TrialRecord& r : records) {
    groups[{r.d, r.m, r.B, r.defense, r.defense_param}].push_back(r);
  }
  std::vector<ReportRow> rows;
  for (const auto& [key, group] : groups) {
    ReportRow row;
    std::tie(row.d, row.m, row.B, row.defense, row.defense_param) = key;
    row.trials = static_cast<int>(group.size());
    ASSIGN_OR_RETURN(row.score, DefenseScore(group, options.mode));
    double utility = 0.0, bound = 0.0;
    for (const TrialRecord& r : group) {
      utility += r.utility_loss;
      bound += r.rl_exact;
    }
    row.mean_utility_loss = utility / group.size();
    row.mean_rl_exact = bound / group.size();
    rows.push_back(std::move(row));
  }
  // Utility classes per (d, m, B): walk rows by increasing utility and open a
  // new class when the gap to the class's first member exceeds the tolerance.
  std::sort(rows.begin(), rows.end(), [](const ReportRow& a,
                                         const ReportRow& b) {
    return std::tie(a.d, a.m, a.B, a.mean_utility_loss, a.defense,
                    a.defense_param) < std::tie(b.d, b.m, b.B,
                                                b.mean_utility_loss, b.defense,
                                                b.defense_param);
  });
  double anchor = 0.0;
  for (size_t k = 0; k < rows.size(); ++k) {
    const double here = rows[k].mean_utility_loss;
    const bool same_shape = k > 0 && rows[k].d == rows[k - 1].d &&
                            rows[k].m == rows[k - 1].m &&
                            rows[k].B == rows[k - 1].B;
    if (!same_shape) {
      rows[k].utility_class = 0;
      anchor = here;
      continue;
    }
    const double scale = std::max(std::abs(anchor), std::abs(here));
    if (std::abs(here - anchor) <= options.utility_tolerance * scale) {
      rows[k].utility_class = rows[k - 1].utility_class;
    } else {
      rows[k].utility_class = rows[k - 1].utility_class + 1;
      anchor = here;
    }
  }
  std::stable_sort(rows.begin(), rows.end(), [](const ReportRow& a,
                                                const ReportRow& b) {
    return std::tie(a.d, a.m, a.B, a.utility_class) <
               std::tie(b.d, b.m, b.B, b.utility_class) ||
           (std::tie(a.d, a.m, a.B, a.utility_class) ==
                std::tie(b.d, b.m, b.B, b.utility_class) &&
            a.score.score > b.score.score);
  });
  return rows;
}

std::string FormatReport(absl::Span<const ReportRow> rows,
                         const ReportOptions& options) {
  std::string out = absl::StrFormat(
      "score mode: %s, utility tolerance: %g\n", ScoreModeName(options.mode),
      options.utility_tolerance);
  absl::StrAppend(&out,
                  absl::StrFormat("%4s %7s %3s  %-28s %10s %6s %5s %11s "
                                  "%-10s %12s %12s\n",
                                  "d", "m", "B", "defense", "param", "trials",
                                  "class", "S_D", "attack", "utility",
                                  "rl_exact"));
  for (const ReportRow& r : rows) {
    absl::StrAppend(
        &out, absl::StrFormat("%4d %7d %3d  %-28s %10.4g %6d %5d %11.5g "
                              "%-10s %12.5g %12.5g\n",
                              r.d, r.m, r.B, r.defense, r.defense_param,
                              r.trials, r.utility_class, r.score.score,
                              r.score.selected_attack, r.mean_utility_loss,
                              r.mean_rl_exact));
  }
  return out;
}

Json ReportToJson(absl::Span<const ReportRow> rows,
                  const ReportOptions& options) {
  Json list = Json::array();
  for (const ReportRow& r : rows) {
    Json per_attack = Json::object();
    for (const auto& [name, value] : r.score.per_attack) {
      per_attack[name] = NumberToJson(value);
    }
    list.push_back(Json{{"d", r.d},
                        {"m", r.m},
                        {"B", r.B},
                        {"defense", r.defense},
                        {"defense_param", NumberToJson(r.defense_param)},
                        {"trials", r.trials},
                        {"utility_class", r.utility_class},
                        {"score", NumberToJson(r.score.score)},
                        {"selected_attack", r.score.selected_attack},
                        {"per_attack", per_attack},
                        {"mean_utility_loss", NumberToJson(r.mean_utility_loss)},
                        {"mean_rl_exact", NumberToJson(r.mean_rl_exact)}});
  }
  return Json{{"mode", ScoreModeName(options.mode)},
              {"utility_tolerance", options.utility_tolerance},
              {"rows", list}};
}

}  // namespace gradleak
