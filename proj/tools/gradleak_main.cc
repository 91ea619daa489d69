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

// Command-line front end: single attacks, bounds, privacy accounting,
// resumable sweeps and defense reports.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/strings/str_cat.h"
#include "gradleak/bounds.h"
#include "gradleak/config.h"
#include "gradleak/experiment.h"
#include "gradleak/network.h"
#include "gradleak/random.h"
#include "gradleak/status_macros.h"
#include "gradleak/sweep.h"

namespace gradleak {
namespace {

namespace fs = std::filesystem;

struct CommonFlags {
  std::optional<uint64_t> seed;
  std::string out;
  bool force = false;
};

void AddCommonFlags(CLI::App* app, CommonFlags& flags) {
  app->add_option("--seed", flags.seed, "Base seed");
  app->add_option("--out", flags.out, "Output path (stdout when omitted)");
  app->add_flag("--force", flags.force, "Overwrite existing output");
}

absl::Status Emit(const std::string& text, const CommonFlags& flags) {
  if (flags.out.empty()) {
    std::cout << text;
    return absl::OkStatus();
  }
  if (fs::exists(flags.out) && !flags.force) {
    return absl::AlreadyExistsError(
        absl::StrCat("'", flags.out, "' exists; pass --force to overwrite"));
  }
  std::ofstream out(flags.out, std::ios::binary | std::ios::trunc);
  out << text;
  out.close();
  if (!out) {
    return absl::PermissionDeniedError(
        absl::StrCat("cannot write '", flags.out, "'"));
  }
  return absl::OkStatus();
}

// Experiment settings shared by attack and bound: a config file plus
// per-field overrides.
struct TrialFlags {
  std::string config;
  std::optional<int> d, m, B;
  std::optional<double> sigma;
  std::string attack = "tensor";
  int trial = 0;
};

void AddTrialFlags(CLI::App* app, TrialFlags& flags) {
  app->add_option("--config", flags.config, "Experiment JSON");
  app->add_option("--d", flags.d, "Input dimension");
  app->add_option("--m", flags.m, "Hidden width");
  app->add_option("--B", flags.B, "Batch size");
  app->add_option("--trial", flags.trial, "Trial index")->check(
      CLI::NonNegativeNumber);
}

absl::StatusOr<ExperimentConfig> BuildExperiment(const TrialFlags& flags,
                                                 const CommonFlags& common) {
  ExperimentConfig config;
  if (!flags.config.empty()) {
    ASSIGN_OR_RETURN(const GridConfig grid, LoadGridConfig(flags.config));
    config = grid.base;
  }
  if (flags.d) config.d = *flags.d;
  if (flags.m) config.m = *flags.m;
  if (flags.B) config.B = *flags.B;
  if (flags.sigma) config.bound_sigma = *flags.sigma;
  if (common.seed) config.base_seed = *common.seed;
  if (flags.attack == "tensor" || flags.attack == "both") {
    config.attacks.tensor = true;
  } else if (flags.attack == "gradmatch") {
    config.attacks.tensor = false;
  }
  if (flags.attack == "gradmatch" || flags.attack == "both") {
    config.attacks.gradmatch = true;
  } else if (flags.attack == "tensor") {
    config.attacks.gradmatch = false;
  }
  RETURN_IF_ERROR(config.Validate());
  return config;
}

absl::Status RunAttackCommand(const TrialFlags& flags,
                              const CommonFlags& common) {
  ASSIGN_OR_RETURN(const ExperimentConfig config,
                   BuildExperiment(flags, common));
  ASSIGN_OR_RETURN(const TrialInputs inputs,
                   PrepareTrial(config, flags.trial));
  Json out = {{"config_hash", ConfigHash(config)},
              {"trial", flags.trial},
              {"trial_seed", inputs.seed},
              {"defense", config.DefenseLabel()}};
  Json attacks = Json::array();
  for (const auto& result : RunAttacks(config, inputs)) {
    if (result.ok()) {
      attacks.push_back(ReconstructionToJson(*result));
    } else {
      attacks.push_back({{"error", result.status().ToString()}});
    }
  }
  out["attacks"] = attacks;
  return Emit(out.dump(2) + "\n", common);
}

absl::Status RunBoundCommand(const TrialFlags& flags,
                             const CommonFlags& common) {
  ASSIGN_OR_RETURN(const ExperimentConfig config,
                   BuildExperiment(flags, common));
  ASSIGN_OR_RETURN(const TrialInputs inputs,
                   PrepareTrial(config, flags.trial));
  ASSIGN_OR_RETURN(const Eigen::MatrixXd J,
                   InputJacobian(inputs.params, inputs.batch));
  ASSIGN_OR_RETURN(const BoundReport report,
                   BoundUnderDefense(J, config.bound_sigma, config.B,
                                     inputs.obs));
  Json out = {{"config_hash", ConfigHash(config)},
              {"trial", flags.trial},
              {"defense", config.DefenseLabel()},
              {"bound", BoundReportToJson(report)}};
  return Emit(out.dump(2) + "\n", common);
}

struct DpFlags {
  double epsilon = 0.0;
  std::optional<double> sigma_sq;
  std::optional<double> delta;
  std::optional<double> sensitivity;
  int d = 16;
  int m = 0;
  int trials = 200;
};

absl::Status RunDpCommand(const DpFlags& flags, const CommonFlags& common) {
  if (flags.sigma_sq.has_value() == flags.delta.has_value()) {
    return absl::InvalidArgumentError(
        "dp-calc: pass exactly one of --sigma-sq and --delta");
  }
  Json out = {{"epsilon", flags.epsilon}};
  double sensitivity = 0.0;
  if (flags.sensitivity) {
    sensitivity = *flags.sensitivity;
  } else if (flags.m > 0) {
    const uint64_t seed = common.seed.value_or(0);
    ASSIGN_OR_RETURN(const NetworkParams params,
                     SampleParams(flags.d, flags.m,
                                  DeriveSeed(seed, SeedStream::kParams)));
    ASSIGN_OR_RETURN(const SensitivityEstimate estimate,
                     EstimateSensitivity(
                         params, flags.trials,
                         DeriveSeed(seed, SeedStream::kSensitivity)));
    sensitivity = estimate.delta_hat;
    out["sensitivity_estimate"] = {{"d", flags.d},
                                   {"m", flags.m},
                                   {"trials", estimate.trials},
                                   {"delta_hat", estimate.delta_hat}};
  } else {
    return absl::InvalidArgumentError(
        "dp-calc: pass --sensitivity or --m to estimate it");
  }
  out["sensitivity"] = sensitivity;
  if (flags.sigma_sq) {
    const DpDeltaResult r = DpDelta(flags.epsilon, *flags.sigma_sq, sensitivity);
    out["sigma_sq"] = *flags.sigma_sq;
    out["delta"] = r.delta;
    out["optimal_lambda"] = r.optimal_lambda;
    out["lambda_below_one"] = r.lambda_below_one;
  } else {
    ASSIGN_OR_RETURN(const double sigma_sq,
                     RequiredSigmaSq(flags.epsilon, *flags.delta, sensitivity));
    out["delta"] = *flags.delta;
    out["sigma_sq"] = sigma_sq;
  }
  return Emit(out.dump(2) + "\n", common);
}

struct SweepFlags {
  std::string config;
  int workers = 0;
  bool timing = false;
  int max_trials = 0;
};

absl::Status RunSweepCommand(const SweepFlags& flags,
                             const CommonFlags& common) {
  ASSIGN_OR_RETURN(const GridConfig grid, LoadGridConfig(flags.config));
  SweepOptions options;
  options.output_dir = common.out;
  options.force = common.force;
  options.workers = flags.workers;
  options.record_wall_time = flags.timing;
  options.max_new_trials = flags.max_trials;
  options.seed_override = common.seed;
  ASSIGN_OR_RETURN(const SweepSummary summary, RunSweep(grid, options));
  std::cout << absl::StrCat(
      summary.output_dir, ": ", summary.points, " points, ",
      summary.trials_total, " trials; ran ", summary.trials_run, ", resumed ",
      summary.trials_resumed, "; ",
      summary.up_to_date ? "already complete"
                         : (summary.complete ? "complete" : "partial"),
      "\n");
  return absl::OkStatus();
}

struct ReportFlags {
  std::string csv;
  std::string mode = "strongest-attack-min";
  double utility_tol = 0.05;
  bool json = false;
};

absl::Status RunReportCommand(const ReportFlags& flags,
                              const CommonFlags& common) {
  ReportOptions options;
  ASSIGN_OR_RETURN(options.mode, ParseScoreMode(flags.mode));
  options.utility_tolerance = flags.utility_tol;
  std::string path = flags.csv;
  if (fs::is_directory(path)) path = (fs::path(path) / "results.csv").string();
  ASSIGN_OR_RETURN(const std::vector<TrialRecord> records,
                   ReadResultsCsv(path));
  ASSIGN_OR_RETURN(const std::vector<ReportRow> rows,
                   BuildReport(records, options));
  return Emit(flags.json ? ReportToJson(rows, options).dump(2) + "\n"
                         : FormatReport(rows, options),
              common);
}

int Main(int argc, char** argv) {
  CLI::App app{"Gradient leakage attacks, bounds and defense sweeps"};
  app.set_version_flag("--version", std::string(kGradleakVersion));
  app.require_subcommand(1);

  CommonFlags common;
  TrialFlags attack_flags;
  CLI::App* attack = app.add_subcommand(
      "attack", "Run attacks on one trial and print the reconstructions");
  AddCommonFlags(attack, common);
  AddTrialFlags(attack, attack_flags);
  attack->add_option("--attack", attack_flags.attack, "Attack to run")
      ->check(CLI::IsMember({"tensor", "gradmatch", "both"}));

  TrialFlags bound_flags;
  CLI::App* bound = app.add_subcommand(
      "bound", "Reconstruction lower bound for one trial");
  AddCommonFlags(bound, common);
  AddTrialFlags(bound, bound_flags);
  bound->add_option("--sigma", bound_flags.sigma, "Observation noise std")
      ->check(CLI::PositiveNumber);

  DpFlags dp_flags;
  CLI::App* dp = app.add_subcommand(
      "dp-calc", "Gaussian-mechanism delta or required noise variance");
  AddCommonFlags(dp, common);
  dp->add_option("--epsilon", dp_flags.epsilon, "Privacy parameter epsilon")
      ->required()
      ->check(CLI::PositiveNumber);
  dp->add_option("--sigma-sq", dp_flags.sigma_sq, "Noise variance");
  dp->add_option("--delta", dp_flags.delta, "Target delta");
  dp->add_option("--sensitivity", dp_flags.sensitivity,
                 "Squared L2 sensitivity");
  dp->add_option("--d", dp_flags.d, "Input dimension for the estimate");
  dp->add_option("--m", dp_flags.m, "Hidden width for the estimate");
  dp->add_option("--trials", dp_flags.trials, "Adjacent pairs to sample");

  SweepFlags sweep_flags;
  CLI::App* sweep = app.add_subcommand(
      "sweep", "Run or resume a grid of experiments");
  AddCommonFlags(sweep, common);
  sweep->add_option("--config", sweep_flags.config, "Grid JSON")->required();
  sweep->add_option("--workers", sweep_flags.workers,
                    "Worker threads (default GRADLEAK_WORKERS or 1)");
  sweep->add_flag("--timing", sweep_flags.timing,
                  "Write measured wall times into results.csv");
  sweep->add_option("--max-trials", sweep_flags.max_trials,
                    "Stop after this many new trials");

  ReportFlags report_flags;
  CLI::App* report = app.add_subcommand(
      "report", "Rank defenses from a results CSV");
  AddCommonFlags(report, common);
  report->add_option("--csv", report_flags.csv,
                     "results.csv or a sweep output directory")
      ->required();
  report->add_option("--mode", report_flags.mode,
                     "strongest-attack-min or weakest-attack-max");
  report->add_option("--utility-tol", report_flags.utility_tol,
                     "Relative utility tolerance for grouping defenses");
  report->add_flag("--json", report_flags.json, "Emit JSON");

  CLI11_PARSE(app, argc, argv);

  absl::Status status;
  if (attack->parsed()) {
    status = RunAttackCommand(attack_flags, common);
  } else if (bound->parsed()) {
    status = RunBoundCommand(bound_flags, common);
  } else if (dp->parsed()) {
    status = RunDpCommand(dp_flags, common);
  } else if (sweep->parsed()) {
    status = RunSweepCommand(sweep_flags, common);
  } else if (report->parsed()) {
    status = RunReportCommand(report_flags, common);
  }
  if (!status.ok()) {
    std::cerr << "gradleak: " << status << "\n";
    return 1;
  }
  return 0;
}

}  // namespace
}  // namespace gradleak

int main(int argc, char** argv) { return gradleak::Main(argc, argv); }
