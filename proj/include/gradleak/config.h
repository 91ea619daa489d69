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

#ifndef GRADLEAK_CONFIG_H_
#define GRADLEAK_CONFIG_H_

#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "gradleak/bounds.h"
#include "gradleak/defenses.h"
#include "gradleak/experiment.h"
#include "gradleak/reconstruction.h"
#include "json.hpp"

namespace gradleak {

using Json = nlohmann::json;

// Parsing is strict: unknown keys and wrong types are kInvalidArgument with
// the offending path in the message. Missing keys keep their defaults.
absl::StatusOr<DefenseConfig> DefenseFromJson(const Json& j,
                                              const std::string& path = "");
Json DefenseToJson(const DefenseConfig& defense);

absl::StatusOr<ExperimentConfig> ExperimentFromJson(const Json& j);
// Canonical form; keys are emitted in sorted order.
Json ExperimentToJson(const ExperimentConfig& config);

// 16 hex digits of a hash over the canonical JSON without `trials` and
// `output_dir`, so growing the trial count keeps existing rows valid.
std::string ConfigHash(const ExperimentConfig& config);

// Cross product of axes over a base experiment. Empty axes keep the base
// value. Point order is d, then m, then B, then defenses (innermost).
struct GridConfig {
  ExperimentConfig base;
  std::vector<int> d_values;
  std::vector<int> m_values;
  std::vector<int> B_values;
  std::vector<std::vector<DefenseConfig>> defense_values;

  std::vector<ExperimentConfig> Points() const;
};

// An experiment object with an optional "grid" member holding the axes
// "d", "m", "B" and "defenses" (a list of defense chains).
absl::StatusOr<GridConfig> GridFromJson(const Json& j);
Json GridToJson(const GridConfig& grid);
absl::StatusOr<GridConfig> LoadGridConfig(const std::string& path);

// Finite doubles become numbers; NaN and infinities become the strings
// "nan", "inf" and "-inf" so that they survive a round trip.
Json NumberToJson(double value);
absl::StatusOr<double> NumberFromJson(const Json& j);

Json ReconstructionToJson(const ReconstructionResult& result);
Json BoundReportToJson(const BoundReport& report);
Json TrialRecordToJson(const TrialRecord& record);
absl::StatusOr<TrialRecord> TrialRecordFromJson(const Json& j);

}  // namespace gradleak

#endif  // GRADLEAK_CONFIG_H_
