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

#ifndef GRADLEAK_DEFENSES_H_
#define GRADLEAK_DEFENSES_H_

#include <cstdint>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/types/span.h"
#include "gradleak/network.h"
#include "gradleak/observation.h"

namespace gradleak {

struct NoiseDefense {
  double sigma0 = 0.0;
  // When positive, the realized standard deviation is sigma0 * clip_scale,
  // i.e. noise N(0, sigma^2 C^2 I) expressed relative to the clipping norm.
  double clip_scale = 0.0;
};

struct ClipDefense {
  double C = 1.0;
};

// Which coordinates a prune ratio is computed over.
enum class PruneScope {
  kJoint,     // whole flattened gradient
  kPerGroup,  // g_a and g_W pruned separately at the same ratio
};

struct PruneRatioDefense {
  double p = 0.0;
  PruneScope scope = PruneScope::kJoint;
};

struct PruneThresholdDefense {
  double gamma = 0.0;
};

struct DropoutDefense {
  double p = 0.0;
  // Off by default: drop single coordinates instead of hidden units.
  bool coordinate_level = false;
};

struct LocalAggregationDefense {
  int steps = 1;
  double eta_a = 1.0;
  double eta_w = 1.0;
  // One fresh batch per step instead of reusing the same batch.
  bool distinct_batches = false;
};

struct SecureAggregationDefense {
  std::vector<int> client_batch_sizes;
};

using DefenseVariant =
    std::variant<NoiseDefense, ClipDefense, PruneRatioDefense,
                 PruneThresholdDefense, DropoutDefense,
                 LocalAggregationDefense, SecureAggregationDefense>;

struct DefenseConfig {
  DefenseVariant variant;
  uint64_t seed = 0;

  DefenseKind kind() const;
  // sigma0, C, p, gamma, p, steps, or number of clients.
  double primary_param() const;
  // Short label such as "prune_ratio".
  std::string name() const;
  absl::Status Validate() const;
  // True for defenses that act on a finished gradient rather than on the
  // way it is produced.
  bool is_observation_transform() const;
};

absl::StatusOr<GradientObservation> ApplyNoise(const GradientObservation& g,
                                               double sigma0, uint64_t seed);

absl::StatusOr<GradientObservation> ApplyClip(const GradientObservation& g,
                                              double C);

absl::StatusOr<GradientObservation> ApplyPruneRatio(
    const GradientObservation& g, double p,
    PruneScope scope = PruneScope::kJoint);

absl::StatusOr<GradientObservation> ApplyPruneThreshold(
    const GradientObservation& g, double gamma);

// Drops hidden units: a dropped unit j has g_a[j] and row j of g_W zeroed.
absl::StatusOr<GradientObservation> ApplyDropout(const GradientObservation& g,
                                                 double p, uint64_t seed,
                                                 bool coordinate_level = false);

// Runs `steps` full-batch gradient-descent updates with per-layer rates and
// returns the accumulated gradient sum_s G(Theta^(s)), which is the
// parameter difference Theta^(0) - Theta^(steps) divided by the learning rate
// of each layer. `batches` holds either one batch (reused) or one per step.
absl::StatusOr<GradientObservation> LocalAggregation(
    const NetworkParams& params, absl::Span<const DataBatch> batches,
    double eta_a, double eta_w, int steps);

// (1/B) sum_l G_l with B = sum_l B_l. Each G_l is an unreduced per-sample sum,
// so this equals the mean gradient over the union of the client batches.
absl::StatusOr<GradientObservation> SecureAggregate(
    absl::Span<const std::pair<GradientObservation, int>> clients);

// Applies one observation transform. Training-side defenses are rejected.
absl::StatusOr<GradientObservation> ApplyDefense(const DefenseConfig& config,
                                                 const GradientObservation& g);

// Left-to-right application of observation transforms.
absl::StatusOr<GradientObservation> Compose(
    absl::Span<const DefenseConfig> defenses, const GradientObservation& g);

// Clip to C, then add N(0, sigma0^2) noise.
std::vector<DefenseConfig> DpSgdPreset(double C, double sigma0, uint64_t seed);

}  // namespace gradleak

#endif  // GRADLEAK_DEFENSES_H_
