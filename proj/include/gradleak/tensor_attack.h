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

#ifndef GRADLEAK_TENSOR_ATTACK_H_
#define GRADLEAK_TENSOR_ATTACK_H_

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "absl/status/statusor.h"
#include "gradleak/activation.h"
#include "gradleak/network.h"
#include "gradleak/observation.h"
#include "gradleak/reconstruction.h"
#include "gradleak/symmetric_tensor.h"
#include "gradleak/tensor_decomposition.h"

namespace gradleak {

// Moment statistics built from g_a and the first-layer weights. The attack
// works on a unit-norm copy of g_a, so these are in those units.
struct MomentEstimates {
  Eigen::MatrixXd P_hat;  // d x d, symmetric
  Eigen::MatrixXd V;      // d x B, orthonormal columns
  Tensor3 T_proj;         // B x B x B
  int k2 = 0;
  int k3 = 0;
  double nu = 0.0;
  double lambda = 0.0;
  Eigen::VectorXd probe;  // unit probe used by the contracted Hermite tensors
};

// (1/m) sum_j g_j H_2(w_j) with H_2(w) = w w^T - I when k2 = 2, and
// (1/m) sum_j g_j H_3(w_j)(I, I, probe) when k2 = 3. Rows of W are the w_j.
absl::StatusOr<Eigen::MatrixXd> BuildMomentMatrix(
    const Eigen::VectorXd& g_a, const RowMatrixXd& W,
    const HermiteCoefficients& hermite, const Eigen::VectorXd& probe);

struct SubspaceEstimate {
  Eigen::MatrixXd V;
  // |eigenvalue_B| - |eigenvalue_{B+1}| of P_hat (|eigenvalue_B| when B = d).
  double spectral_gap = 0.0;
  bool ill_conditioned = false;
};

inline constexpr double kMinSpectralGap = 1e-12;

// Orthogonal iteration Q <- qr(P (P Q)) from a seeded Gaussian start. Two
// multiplications per sweep make the iteration track |eigenvalue| even when
// P_hat is indefinite.
absl::StatusOr<SubspaceEstimate> EstimateSubspace(const Eigen::MatrixXd& P_hat,
                                                  int B, int iters,
                                                  uint64_t seed);

// Projected Hermite statistic (1/m) sum_j g_j H(w_j)(V, V, V) computed with
// v_j = V^T w_j in R^B. For k3 = 3, H = H_3. For k3 = 4, H = H_4(., ., ., probe)
// and probe_tilde = V^T probe enters the contraction.
absl::StatusOr<Tensor3> BuildProjectedTensor(const Eigen::VectorXd& g_a,
                                             const RowMatrixXd& W,
                                             const Eigen::MatrixXd& V,
                                             const HermiteCoefficients& hermite,
                                             const Eigen::VectorXd& probe);

inline constexpr double kMinProbeProjection = 1e-6;

// Unit vector in span(V) used as probe: V V^T e_1 normalized, replaced by a
// seeded random direction in span(V) when that projection is shorter than
// kMinProbeProjection.
Eigen::VectorXd ProbeInSpan(const Eigen::MatrixXd& V, uint64_t seed);

// Least-squares residual of g after fitting the features whose Gaussian
// correlation with the target Hermite order is zero: a constant, the raw
// weights w_j, and, when V is given, the multivariate Hermite polynomials of
// v_j = V^T w_j of every degree in `projected_degrees`. Averaging the residual
// against a higher-order Hermite tensor estimates the same moment with far
// less variance.
absl::StatusOr<Eigen::VectorXd> RemoveLowOrderComponents(
    const Eigen::VectorXd& g, const RowMatrixXd& W, const Eigen::MatrixXd* V,
    const std::vector<int>& projected_degrees);

struct TensorAttackConfig {
  int subspace_iters = 200;
  // Apply RemoveLowOrderComponents before each moment estimate.
  bool control_variates = true;
  DecompositionConfig decomposition;
  int quad_nodes = 128;
  uint64_t seed = 0;
};

// Full pipeline on the g_a block of `obs`. Output columns are V u_i scaled to
// unit norm; their signs are left as the decomposition produced them.
absl::StatusOr<ReconstructionResult> TensorAttack(
    const GradientObservation& obs, const NetworkParams& params, int B,
    const TensorAttackConfig& config, MomentEstimates* moments = nullptr);

}  // namespace gradleak

#endif  // GRADLEAK_TENSOR_ATTACK_H_
