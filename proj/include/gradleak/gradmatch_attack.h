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

#ifndef GRADLEAK_GRADMATCH_ATTACK_H_
#define GRADLEAK_GRADMATCH_ATTACK_H_

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "gradleak/network.h"
#include "gradleak/observation.h"
#include "gradleak/reconstruction.h"

namespace gradleak {

enum class MatchDistance { kSquaredL2, kNegativeCosine };

// Feature map is the identity in the two-layer model, so the regularizer
// compares candidate inputs directly with reconstructed directions Z_hat.
enum class FeatureMode { kOff, kCosineSquared, kSubspace };

enum class InitScheme { kUniformSphere, kGiven };

struct AdamConfig {
  double step_size = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int max_iters = 5000;
  // Stop once the tangent-space gradient norm drops below this.
  double grad_tol = 1e-10;
  // Also stop once the objective fell by less than stall_rel_tol (relative)
  // over the last stall_window accepted steps.
  int stall_window = 50;
  double stall_rel_tol = 1e-8;
  // Reject steps that increase the objective and retry with half the step,
  // at most max_halvings times per iteration. The reduced step carries over
  // to later iterations and grows by step_growth after each accepted step,
  // never beyond step_size.
  bool halve_on_increase = true;
  int max_halvings = 30;
  double step_growth = 1.25;
};

struct GradMatchConfig {
  MatchDistance distance = MatchDistance::kSquaredL2;
  // Weight the g_a and g_W groups by their number of nonzero target entries.
  bool group_reweighting = false;
  double alpha_f = 0.1;
  FeatureMode feature_mode = FeatureMode::kOff;
  // Greedy candidate/feature pairing is recomputed every this many iterations.
  int pairing_refresh = 100;
  AdamConfig optimizer;
  InitScheme init = InitScheme::kUniformSphere;
  // d x B starting point for InitScheme::kGiven.
  Eigen::MatrixXd init_X;
  uint64_t seed = 0;

  absl::Status Validate() const;
};

struct ValueAndGradient {
  double value = 0.0;
  // Same shape as the candidate, d x B.
  Eigen::MatrixXd gradient;
};

// Distance between the gradient produced by X_cand (with labels y) and
// `target`. Squared-l2 is sum_g w_g |G_g - T_g|^2 / sum_g w_g |T_g|^2 and
// negative cosine is -sum_g w_g cos(G_g, T_g) / sum_g w_g over the groups
// g in {a, W}. Without reweighting, both use the flattened vector as a single
// group. Fails with kInternal on a non-finite value.
absl::StatusOr<ValueAndGradient> GradMatchLoss(const Eigen::MatrixXd& X_cand,
                                               const Eigen::VectorXd& y,
                                               const NetworkParams& params,
                                               const GradientObservation& target,
                                               const GradMatchConfig& config);

// Greedy pairing of candidate columns with Z_hat columns by descending squared
// cosine. Ties go to the lower candidate, then the lower feature index.
std::vector<int> GreedyFeaturePairing(const Eigen::MatrixXd& X_cand,
                                      const Eigen::MatrixXd& Z_hat);

inline constexpr double kMinCandidateNorm = 1e-12;

// Mean over candidates of 1 - cos^2(x_i, z_pairing[i]) (kCosineSquared) or of
// |P_perp x_i|^2 with P_perp the projector off span(Z_hat) (kSubspace). A
// candidate shorter than kMinCandidateNorm contributes the maximal penalty 1
// and a zero gradient. An empty `pairing` means the greedy pairing.
absl::StatusOr<ValueAndGradient> FeatureRegularizer(
    const Eigen::MatrixXd& X_cand, const Eigen::MatrixXd& Z_hat,
    FeatureMode mode, const std::vector<int>& pairing = {});

// Per-run record of the optimizer path.
struct GradMatchTrace {
  // Objective after every accepted step, starting with the initial point.
  std::vector<double> objective;
  int iterations = 0;
  int rejected_steps = 0;
  bool converged = false;
  bool diverged = false;
  // Chained HashDoubles over every accepted iterate.
  uint64_t trajectory_hash = 0;
};

// Minimizes GradMatchLoss + alpha_f FeatureRegularizer over unit-norm
// candidates with a projected Adam iteration. y is the known label vector and
// fixes B. Z_hat must be given (unit columns) when feature_mode is not kOff.
// A non-finite objective ends the run with the best iterate and a
// "diverged" warning.
absl::StatusOr<ReconstructionResult> GradMatchAttack(
    const GradientObservation& obs, const NetworkParams& params,
    const Eigen::VectorXd& y, const GradMatchConfig& config,
    const Eigen::MatrixXd* Z_hat = nullptr, GradMatchTrace* trace = nullptr);

}  // namespace gradleak

#endif  // GRADLEAK_GRADMATCH_ATTACK_H_
