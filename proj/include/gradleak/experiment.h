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

#ifndef GRADLEAK_EXPERIMENT_H_
#define GRADLEAK_EXPERIMENT_H_

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/types/span.h"
#include "gradleak/bounds.h"
#include "gradleak/defenses.h"
#include "gradleak/gradmatch_attack.h"
#include "gradleak/network.h"
#include "gradleak/tensor_attack.h"

namespace gradleak {

struct AttackSelection {
  bool tensor = true;
  TensorAttackConfig tensor_config;
  bool gradmatch = false;
  GradMatchConfig gradmatch_config;
  // Tensor scores always resolve signs; gradmatch output has no inherent sign
  // ambiguity, so this defaults to off.
  bool gradmatch_sign_resolve = false;
};

struct UtilityConfig {
  bool enabled = true;
  int steps = 100;
  // Per-layer rates; eta_a is divided by m when applied.
  double eta_a = 0.5;
  double eta_w = 1.0;
  int batch_size = 4;
};

struct ExperimentConfig {
  int d = 16;
  int m = 1024;
  int B = 2;
  std::string activation = "softplus";
  // Applied in order. A training-side defense (local or secure aggregation)
  // may only appear first.
  std::vector<DefenseConfig> defenses;
  AttackSelection attacks;
  bool compute_bounds = true;
  double bound_sigma = 0.1;
  UtilityConfig utility;
  int trials = 1;
  uint64_t base_seed = 0;
  std::string output_dir;

  absl::Status Validate() const;
  // "none" for an empty chain, otherwise names joined by '+'.
  std::string DefenseLabel() const;
  // Primary parameter of the last defense in the chain; 0 when empty.
  double DefenseParam() const;
};

struct AttackOutcome {
  std::string attack;
  // NaN when the attack failed; `error` then holds the status message.
  double rmse = 0.0;
  std::vector<int> assignment;
  std::vector<int> signs;
  std::vector<std::string> warnings;
  std::string error;
};

struct TrialRecord {
  std::string config_hash;
  int grid_index = 0;
  int trial = 0;
  uint64_t trial_seed = 0;
  int d = 0, m = 0, B = 0;
  std::string defense;
  double defense_param = 0.0;
  std::vector<AttackOutcome> attacks;
  // NaN when bounds are disabled.
  double rl_exact = 0.0;
  double rl_loose = 0.0;
  std::vector<std::string> bound_flags;
  // NaN when utility is disabled, +inf when training diverged.
  double utility_loss = 0.0;
  bool utility_diverged = false;
  // Measured but excluded from RecordHash.
  double wall_ms = 0.0;
};

// Trial seed: a stable mix of the base seed and the trial index only, so the
// same trial index sees the same network and data at every grid point.
uint64_t TrialSeed(uint64_t base_seed, int trial_index);

// Everything an attack sees in one trial, rebuilt deterministically from the
// config and trial index.
struct TrialInputs {
  uint64_t seed = 0;
  NetworkParams params;
  DataBatch batch;
  GradientObservation obs;
};

absl::StatusOr<TrialInputs> PrepareTrial(const ExperimentConfig& config,
                                         int trial_index);

// Runs the configured attacks in order (tensor, then gradmatch) and scores
// each against the true batch. One entry per attack; failures stay in place.
std::vector<absl::StatusOr<ReconstructionResult>> RunAttacks(
    const ExperimentConfig& config, const TrialInputs& inputs);

// Samples the network and batch, builds the (defended) observation, runs the
// configured attacks and bounds and the utility rollout. Attack failures are
// recorded in the outcome; only invalid configurations fail the call.
absl::StatusOr<TrialRecord> RunTrial(const ExperimentConfig& config,
                                     int trial_index);

// Hash of every deterministic field of the record.
uint64_t RecordHash(const TrialRecord& record);

struct UtilityResult {
  double initial_loss = 0.0;
  double final_loss = 0.0;
  bool diverged = false;
};

// Defended full-batch gradient descent: every step's gradient passes through
// the observation-transform defenses (with per-step seeds derived from
// `seed`) before the update a -= (eta_a / m) G_a, W -= eta_w G_W. Training-side
// defenses in the list are skipped. A non-finite loss stops the run with
// final_loss = +inf and diverged set.
absl::StatusOr<UtilityResult> UtilityLoss(
    const NetworkParams& params, absl::Span<const DefenseConfig> defenses,
    const DataBatch& task, int steps, double eta_a, double eta_w,
    uint64_t seed);

// Linearly separable task: unit-sphere inputs with y = sign(beta . x).
DataBatch SeparableTask(int d, int batch_size, uint64_t seed);

enum class ScoreMode {
  kStrongestAttackMin,  // smallest mean error over attacks
  kWeakestAttackMax,    // largest mean error over attacks
};

std::string ScoreModeName(ScoreMode mode);
absl::StatusOr<ScoreMode> ParseScoreMode(const std::string& name);

struct DefenseScoreResult {
  double score = 0.0;
  ScoreMode mode = ScoreMode::kStrongestAttackMin;
  std::string selected_attack;
  // Mean RMSE over the group's records, per attack, in first-seen order.
  std::vector<std::pair<std::string, double>> per_attack;
};

// Averages each attack's RMSE over the records (failed attacks skipped), then
// takes the minimum or maximum over attacks.
absl::StatusOr<DefenseScoreResult> DefenseScore(
    absl::Span<const TrialRecord> records, ScoreMode mode);

}  // namespace gradleak

#endif  // GRADLEAK_EXPERIMENT_H_
