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

#ifndef GRADLEAK_BOUNDS_H_
#define GRADLEAK_BOUNDS_H_

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "absl/status/statusor.h"
#include "absl/types/span.h"
#include "gradleak/network.h"
#include "gradleak/observation.h"

namespace gradleak {

// Relative eigenvalue floor below which J J^T counts as singular.
inline constexpr double kEigenvalueFloor = 1e-12;

// Cramer-Rao style lower bounds on the mean squared reconstruction error per
// sample. All *_sq fields are R_L^2 in squared data units; the plain fields
// are their square roots.
struct BoundReport {
  double exact_sq = 0.0;
  double loose_sq = 0.0;
  double exact = 0.0;
  double loose = 0.0;
  // Observation noise std as given and after the clip adjustment.
  double sigma = 0.0;
  double sigma_eff = 0.0;
  double clip_factor = 1.0;
  // Fraction of ||J||_F^2 carried by deleted gradient coordinates.
  double p_hat = 0.0;
  // Node-level dropout rate seen in the provenance, 0 when absent.
  double dropout_p = 0.0;
  // sigma_eff sqrt(d / ((1 - p) m)) with p the dropout rate or p_hat.
  double closed_form = 0.0;
  // Rank of J J^T and the trace-inverse form restricted to its range. When
  // rank < B d the exact bound itself is +inf.
  int rank = 0;
  int full_rank = 0;
  double exact_on_range_sq = 0.0;
  int deleted_coordinates = 0;
  std::vector<std::string> flags;

  bool HasFlag(const std::string& flag) const;
};

// exact = (1/B) tr((J J^T)^-1) sigma^2 and loose = (1/B) (B d)^2 sigma^2 /
// tr(J J^T). J is (B d) x n with one column per flattened gradient
// coordinate.
absl::StatusOr<BoundReport> CramerRao(const Eigen::MatrixXd& J, double sigma,
                                      int B);

// Applies the provenance of `obs` to the undefended Jacobian J: clipping
// rescales sigma by 1 / R, pruning and dropout delete the columns of zeroed
// coordinates, aggregation defenses keep the base bound and set a flag.
absl::StatusOr<BoundReport> BoundUnderDefense(const Eigen::MatrixXd& J,
                                              double sigma, int B,
                                              const GradientObservation& obs);

// Finite-difference Jacobian of the multi-step local aggregation output with
// respect to the batch inputs, in the same layout as InputJacobian. Costs
// 2 B d rollouts.
absl::StatusOr<Eigen::MatrixXd> LocalAggregationJacobian(
    const NetworkParams& params, const DataBatch& batch, double eta_a,
    double eta_w, int steps, double step_size = 1e-6);

struct DpDeltaResult {
  double delta = 1.0;
  // lambda* = sigma^2 eps / Delta - 1/2; the closed form assumes it is >= 1.
  double optimal_lambda = 0.0;
  bool lambda_below_one = false;
};

// Gaussian mechanism with squared sensitivity Delta:
//   delta = exp(-(Delta / (2 sigma^2)) (sigma^2 eps / Delta - 1/2)^2)
// clamped to [0, 1]. At or below sigma^2 eps / Delta = 1/2 the bound is
// vacuous and delta = 1.
DpDeltaResult DpDelta(double epsilon, double sigma_sq, double sensitivity);

// Smallest sigma^2 with DpDelta(epsilon, sigma^2, Delta).delta = delta.
absl::StatusOr<double> RequiredSigmaSq(double epsilon, double delta,
                                       double sensitivity);

// ||G(x, y) - G(x', y')||^2 for two single-sample batches.
absl::StatusOr<double> SquaredGradientGap(const NetworkParams& params,
                                          const Eigen::VectorXd& x, double y,
                                          const Eigen::VectorXd& x_prime,
                                          double y_prime);

struct SensitivityEstimate {
  // Max over sampled adjacent pairs of ||G(x, y) - G(x', y')||^2. A sampled
  // lower estimate of the supremum.
  double delta_hat = 0.0;
  int trials = 0;
};

absl::StatusOr<SensitivityEstimate> EstimateSensitivity(
    const NetworkParams& params, int trials, uint64_t seed);

}  // namespace gradleak

#endif  // GRADLEAK_BOUNDS_H_
