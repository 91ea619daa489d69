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

#include "gradleak/experiment.h"

#include <chrono>
#include <cmath>
#include <limits>
#include <utility>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_join.h"
#include "gradleak/metric.h"
#include "gradleak/random.h"
#include "gradleak/status_macros.h"

namespace gradleak {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool IsTrainingSide(const DefenseConfig& defense) {
  return !defense.is_observation_transform();
}

// Seed of the k-th defense in a chain.
uint64_t DefenseSeed(uint64_t stream_seed, size_t k) {
  return DeriveSeed(stream_seed, static_cast<uint64_t>(k));
}

absl::StatusOr<GradientObservation> Observe(const ExperimentConfig& config,
                                            const NetworkParams& params,
                                            const DataBatch& batch,
                                            uint64_t trial_seed) {
  const uint64_t defense_stream = DeriveSeed(trial_seed, SeedStream::kDefense);
  GradientObservation obs;
  size_t first_transform = 0;
  if (!config.defenses.empty() && IsTrainingSide(config.defenses[0])) {
    first_transform = 1;
    const DefenseVariant& v = config.defenses[0].variant;
    if (const auto* agg = std::get_if<LocalAggregationDefense>(&v)) {
      std::vector<DataBatch> batches = {batch};
      if (agg->distinct_batches) {
        const uint64_t data_stream = DeriveSeed(trial_seed, SeedStream::kData);
        for (int s = 1; s < agg->steps; ++s) {
          batches.push_back(SampleBatch(batch.d(), batch.B(),
                                        DeriveSeed(data_stream, s)));
        }
      }
      ASSIGN_OR_RETURN(obs, LocalAggregation(params, batches, agg->eta_a,
                                             agg->eta_w, agg->steps));
    } else {
      const auto& sec = std::get<SecureAggregationDefense>(v);
      std::vector<std::pair<GradientObservation, int>> clients;
      int offset = 0;
      for (int size : sec.client_batch_sizes) {
        const DataBatch part{batch.X.middleCols(offset, size),
                             batch.y.segment(offset, size)};
        ASSIGN_OR_RETURN(GradientObservation g, Gradient(params, part));
        clients.emplace_back(std::move(g), size);
        offset += size;
      }
      ASSIGN_OR_RETURN(obs, SecureAggregate(clients));
    }
  } else {
    ASSIGN_OR_RETURN(obs, Gradient(params, batch));
  }
  for (size_t k = first_transform; k < config.defenses.size(); ++k) {
    DefenseConfig defense = config.defenses[k];
    defense.seed = DefenseSeed(defense_stream, k);
    ASSIGN_OR_RETURN(obs, ApplyDefense(defense, obs));
  }
  return obs;
}

AttackOutcome Failed(const std::string& attack, const absl::Status& status) {
  AttackOutcome out;
  out.attack = attack;
  out.rmse = kNaN;
  out.error = std::string(status.message());
  return out;
}

AttackOutcome Scored(const ReconstructionResult& result) {
  AttackOutcome out;
  out.attack = result.attack;
  out.rmse = result.rmse;
  out.assignment = result.assignment;
  out.signs = result.signs;
  out.warnings = result.warnings;
  return out;
}

}  // namespace

absl::Status ExperimentConfig::Validate() const {
  if (d < 1 || m < 1 || B < 1) {
    return absl::InvalidArgumentError(
        absl::StrCat("ExperimentConfig: need d, m, B >= 1, got d=", d,
                     " m=", m, " B=", B));
  }
  if (B > d) {
    return absl::InvalidArgumentError(
        absl::StrCat("ExperimentConfig: B=", B, " exceeds d=", d));
  }
  if (trials < 1) {
    return absl::InvalidArgumentError("ExperimentConfig: trials must be >= 1");
  }
  RETURN_IF_ERROR(ActivationSpec::FromName(activation).status());
  for (size_t k = 0; k < defenses.size(); ++k) {
    RETURN_IF_ERROR(defenses[k].Validate());
    if (k > 0 && IsTrainingSide(defenses[k])) {
      return absl::InvalidArgumentError(absl::StrCat(
          "ExperimentConfig: ", defenses[k].name(),
          " must be the first defense in the chain"));
    }
    if (const auto* sec =
            std::get_if<SecureAggregationDefense>(&defenses[k].variant)) {
      int total = 0;
      for (int size : sec->client_batch_sizes) total += size;
      if (total != B) {
        return absl::InvalidArgumentError(absl::StrCat(
            "ExperimentConfig: client batch sizes sum to ", total,
            ", expected B=", B));
      }
    }
  }
  if (!attacks.tensor && !attacks.gradmatch) {
    return absl::InvalidArgumentError(
        "ExperimentConfig: select at least one attack");
  }
  if (attacks.gradmatch) {
    RETURN_IF_ERROR(attacks.gradmatch_config.Validate());
    if (attacks.gradmatch_config.feature_mode != FeatureMode::kOff &&
        !attacks.tensor) {
      return absl::InvalidArgumentError(
          "ExperimentConfig: gradmatch feature matching needs the tensor "
          "attack for Z_hat");
    }
  }
  if (compute_bounds && !(bound_sigma > 0.0)) {
    return absl::InvalidArgumentError(
        "ExperimentConfig: bound_sigma must be > 0");
  }
  if (utility.enabled && (utility.steps < 1 || utility.batch_size < 1 ||
                          utility.batch_size > d || !(utility.eta_a >= 0.0) ||
                          !(utility.eta_w >= 0.0))) {
    return absl::InvalidArgumentError(
        "ExperimentConfig: utility needs steps >= 1, 1 <= batch_size <= d "
        "and non-negative rates");
  }
  return absl::OkStatus();
}

std::string ExperimentConfig::DefenseLabel() const {
  if (defenses.empty()) return "none";
  std::vector<std::string> names;
  for (const DefenseConfig& defense : defenses) names.push_back(defense.name());
  return absl::StrJoin(names, "+");
}

double ExperimentConfig::DefenseParam() const {
  return defenses.empty() ? 0.0 : defenses.back().primary_param();
}

uint64_t TrialSeed(uint64_t base_seed, int trial_index) {
  return DeriveSeed(base_seed, static_cast<uint64_t>(trial_index));
}

DataBatch SeparableTask(int d, int batch_size, uint64_t seed) {
  Rng rng(seed);
  const Eigen::VectorXd beta = SampleUnitVector(d, rng);
  DataBatch task;
  task.X.resize(d, batch_size);
  task.y.resize(batch_size);
  for (int i = 0; i < batch_size; ++i) {
    task.X.col(i) = SampleUnitVector(d, rng);
    task.y[i] = beta.dot(task.X.col(i)) >= 0.0 ? 1.0 : -1.0;
  }
  return task;
}

absl::StatusOr<UtilityResult> UtilityLoss(
    const NetworkParams& params, absl::Span<const DefenseConfig> defenses,
    const DataBatch& task, int steps, double eta_a, double eta_w,
    uint64_t seed) {
  if (steps < 1) {
    return absl::InvalidArgumentError("UtilityLoss: steps must be >= 1");
  }
  NetworkParams theta = params;
  UtilityResult result;
  ASSIGN_OR_RETURN(result.initial_loss, SquareLoss(theta, task));
  const double rate_a = eta_a / theta.m();
  for (int s = 0; s < steps; ++s) {
    ASSIGN_OR_RETURN(GradientObservation g, Gradient(theta, task));
    for (size_t k = 0; k < defenses.size(); ++k) {
      if (IsTrainingSide(defenses[k])) continue;
      DefenseConfig defense = defenses[k];
      defense.seed = DeriveSeed(DeriveSeed(seed, static_cast<uint64_t>(s)), k);
      ASSIGN_OR_RETURN(g, ApplyDefense(defense, g));
    }
    theta.a -= rate_a * g.g_a;
    theta.W -= eta_w * g.g_W;
    if (!theta.a.allFinite() || !theta.W.allFinite()) {
      result.diverged = true;
      break;
    }
  }
  if (!result.diverged) {
    ASSIGN_OR_RETURN(result.final_loss, SquareLoss(theta, task));
    result.diverged = !std::isfinite(result.final_loss);
  }
  if (result.diverged) {
    result.final_loss = std::numeric_limits<double>::infinity();
  }
  return result;
}

absl::StatusOr<TrialInputs> PrepareTrial(const ExperimentConfig& config,
                                         int trial_index) {
  RETURN_IF_ERROR(config.Validate());
  TrialInputs inputs;
  inputs.seed = TrialSeed(config.base_seed, trial_index);
  ASSIGN_OR_RETURN(const ActivationSpec activation,
                   ActivationSpec::FromName(config.activation));
  ASSIGN_OR_RETURN(inputs.params,
                   SampleParams(config.d, config.m,
                                DeriveSeed(inputs.seed, SeedStream::kParams),
                                activation));
  inputs.batch = SampleBatch(config.d, config.B,
                             DeriveSeed(inputs.seed, SeedStream::kData));
  ASSIGN_OR_RETURN(inputs.obs,
                   Observe(config, inputs.params, inputs.batch, inputs.seed));
  return inputs;
}

std::vector<absl::StatusOr<ReconstructionResult>> RunAttacks(
    const ExperimentConfig& config, const TrialInputs& inputs) {
  std::vector<absl::StatusOr<ReconstructionResult>> out;
  out.reserve(2);  // Z_hat points into the first entry
  const uint64_t attack_stream = DeriveSeed(inputs.seed, SeedStream::kAttack);
  const Eigen::MatrixXd* Z_hat = nullptr;
  if (config.attacks.tensor) {
    TensorAttackConfig tc = config.attacks.tensor_config;
    tc.seed = DeriveSeed(attack_stream, 1);
    absl::StatusOr<ReconstructionResult> result =
        TensorAttack(inputs.obs, inputs.params, config.B, tc);
    if (result.ok()) {
      absl::Status scored = ScoreReconstruction(inputs.batch.X, true, *result);
      if (!scored.ok()) result = scored;
    }
    out.push_back(std::move(result));
    if (out.back().ok()) Z_hat = &out.back()->X_hat;
  }
  if (config.attacks.gradmatch) {
    GradMatchConfig gc = config.attacks.gradmatch_config;
    gc.seed = DeriveSeed(attack_stream, 2);
    absl::StatusOr<ReconstructionResult> result;
    if (gc.feature_mode != FeatureMode::kOff && Z_hat == nullptr) {
      result = absl::FailedPreconditionError(
          "gradmatch: feature matching needs a tensor reconstruction");
    } else {
      result = GradMatchAttack(inputs.obs, inputs.params, inputs.batch.y, gc,
                               Z_hat);
    }
    if (result.ok()) {
      absl::Status scored = ScoreReconstruction(
          inputs.batch.X, config.attacks.gradmatch_sign_resolve, *result);
      if (!scored.ok()) result = scored;
    }
    out.push_back(std::move(result));
  }
  return out;
}

absl::StatusOr<TrialRecord> RunTrial(const ExperimentConfig& config,
                                     int trial_index) {
  const auto start = std::chrono::steady_clock::now();
  ASSIGN_OR_RETURN(const TrialInputs inputs, PrepareTrial(config, trial_index));
  const NetworkParams& params = inputs.params;
  const DataBatch& batch = inputs.batch;
  const uint64_t seed = inputs.seed;
  TrialRecord record;
  record.trial = trial_index;
  record.trial_seed = seed;
  record.d = config.d;
  record.m = config.m;
  record.B = config.B;
  record.defense = config.DefenseLabel();
  record.defense_param = config.DefenseParam();

  const std::vector<absl::StatusOr<ReconstructionResult>> results =
      RunAttacks(config, inputs);
  std::vector<std::string> names;
  if (config.attacks.tensor) names.push_back("tensor");
  if (config.attacks.gradmatch) names.push_back("gradmatch");
  for (size_t k = 0; k < results.size(); ++k) {
    record.attacks.push_back(results[k].ok()
                                 ? Scored(*results[k])
                                 : Failed(names[k], results[k].status()));
  }

  record.rl_exact = kNaN;
  record.rl_loose = kNaN;
  if (config.compute_bounds) {
    ASSIGN_OR_RETURN(const Eigen::MatrixXd J, InputJacobian(params, batch));
    ASSIGN_OR_RETURN(const BoundReport report,
                     BoundUnderDefense(J, config.bound_sigma, config.B, inputs.obs));
    record.rl_exact = report.exact;
    record.rl_loose = report.loose;
    record.bound_flags = report.flags;
  }

  record.utility_loss = kNaN;
  if (config.utility.enabled) {
    const uint64_t utility_stream = DeriveSeed(seed, SeedStream::kUtility);
    const DataBatch task = SeparableTask(
        config.d, config.utility.batch_size, DeriveSeed(utility_stream, 0));
    ASSIGN_OR_RETURN(
        const UtilityResult utility,
        UtilityLoss(params, config.defenses, task, config.utility.steps,
                    config.utility.eta_a, config.utility.eta_w,
                    DeriveSeed(utility_stream, 1)));
    record.utility_loss = utility.final_loss;
    record.utility_diverged = utility.diverged;
  }
  record.wall_ms = std::chrono::duration<double, std::milli>(
                       std::chrono::steady_clock::now() - start)
                       .count();
  return record;
}

uint64_t RecordHash(const TrialRecord& record) {
  std::vector<double> values = {
      static_cast<double>(record.grid_index),
      static_cast<double>(record.trial),
      static_cast<double>(record.trial_seed >> 32),
      static_cast<double>(record.trial_seed & 0xffffffffu),
      static_cast<double>(record.d),
      static_cast<double>(record.m),
      static_cast<double>(record.B),
      record.defense_param,
      record.rl_exact,
      record.rl_loose,
      record.utility_loss,
      record.utility_diverged ? 1.0 : 0.0};
  for (const AttackOutcome& a : record.attacks) {
    values.push_back(a.rmse);
    for (int v : a.assignment) values.push_back(v);
    for (int v : a.signs) values.push_back(v);
  }
  uint64_t hash = HashDoubles(values.data(), values.size());
  std::string text = record.config_hash + "|" + record.defense;
  for (const AttackOutcome& a : record.attacks) {
    absl::StrAppend(&text, "|", a.attack, ":", a.error, ":",
                    absl::StrJoin(a.warnings, ","));
  }
  absl::StrAppend(&text, "|", absl::StrJoin(record.bound_flags, ","));
  for (unsigned char c : text) {
    const double v = c;
    hash = HashDoubles(&v, 1, hash);
  }
  return hash;
}

std::string ScoreModeName(ScoreMode mode) {
  return mode == ScoreMode::kStrongestAttackMin ? "strongest-attack-min"
                                                : "weakest-attack-max";
}

absl::StatusOr<ScoreMode> ParseScoreMode(const std::string& name) {
  if (name == "strongest-attack-min" || name == "min") {
    return ScoreMode::kStrongestAttackMin;
  }
  if (name == "weakest-attack-max" || name == "max") return ScoreMode::kWeakestAttackMax;
  return absl::InvalidArgumentError(absl::StrCat(
      "unknown score mode '", name,
      "' (expected strongest-attack-min or weakest-attack-max)"));
}

absl::StatusOr<DefenseScoreResult> DefenseScore(
    absl::Span<const TrialRecord> records, ScoreMode mode) {
  if (records.empty()) {
    return absl::InvalidArgumentError("DefenseScore: empty group");
  }
  std::vector<std::string> order;
  std::vector<double> sums;
  std::vector<int> counts;
  for (const TrialRecord& record : records) {
    for (const AttackOutcome& a : record.attacks) {
      size_t k = 0;
      while (k < order.size() && order[k] != a.attack) ++k;
      if (k == order.size()) {
        order.push_back(a.attack);
        sums.push_back(0.0);
        counts.push_back(0);
      }
      if (std::isfinite(a.rmse)) {
        sums[k] += a.rmse;
        ++counts[k];
      }
    }
  }
  DefenseScoreResult out;
  out.mode = mode;
  bool any = false;
  for (size_t k = 0; k < order.size(); ++k) {
    if (counts[k] == 0) continue;
    const double mean = sums[k] / counts[k];
    out.per_attack.emplace_back(order[k], mean);
    const bool better = mode == ScoreMode::kStrongestAttackMin
                            ? mean < out.score
                            : mean > out.score;
    if (!any || better) {
      out.score = mean;
      out.selected_attack = order[k];
      any = true;
    }
  }
  if (!any) {
    return absl::FailedPreconditionError(
        "DefenseScore: no successful attack in the group");
  }
  return out;
}

}  // namespace gradleak
