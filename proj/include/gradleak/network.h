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

#ifndef GRADLEAK_NETWORK_H_
#define GRADLEAK_NETWORK_H_

#include <cstdint>

#include <Eigen/Dense>

#include "absl/status/statusor.h"
#include "gradleak/activation.h"
#include "gradleak/observation.h"

namespace gradleak {

// f(x) = sum_j a_j sigma(w_j . x) with a in R^m and W in R^{m x d}.
struct NetworkParams {
  Eigen::VectorXd a;
  RowMatrixXd W;
  ActivationSpec activation = ActivationSpec::Softplus();

  int m() const { return static_cast<int>(a.size()); }
  int d() const { return static_cast<int>(W.cols()); }
  int num_parameters() const { return m() * (d() + 1); }
};

// Columns of X are the samples x_i; y holds one label per column.
struct DataBatch {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;

  int d() const { return static_cast<int>(X.rows()); }
  int B() const { return static_cast<int>(X.cols()); }

  // Checks shapes and that every column has unit norm to 1e-12.
  static absl::StatusOr<DataBatch> Create(Eigen::MatrixXd X, Eigen::VectorXd y);
};

inline constexpr double kUnitNormTolerance = 1e-12;

// a_j ~ N(0, 1/m^2), w_j ~ N(0, I_d); deterministic in `seed`.
absl::StatusOr<NetworkParams> SampleParams(
    int d, int m, uint64_t seed,
    const ActivationSpec& activation = ActivationSpec::Softplus());

// Uniform unit-sphere samples with uniform +-1 labels.
DataBatch SampleBatch(int d, int batch_size, uint64_t seed);

// B-th singular value of X. Attack feasibility needs it to be positive.
double MinSingularValue(const DataBatch& batch);

// Summation runs over ascending j.
absl::StatusOr<double> Forward(const NetworkParams& params,
                               const Eigen::VectorXd& x);

// Sum_i (y_i - f(x_i))^2.
absl::StatusOr<double> SquareLoss(const NetworkParams& params,
                                  const DataBatch& batch);

// Exact gradient of the summed square loss. With r_i = 2 (f(x_i) - y_i):
//   dL/da_j = sum_i r_i sigma(w_j . x_i)
//   dL/dw_j = sum_i r_i a_j sigma'(w_j . x_i) x_i
absl::StatusOr<GradientObservation> Gradient(const NetworkParams& params,
                                             const DataBatch& batch);

// d(flattened gradient)/d(inputs) as a dense (B d) x (m + m d) matrix. Row
// block i (rows i*d .. i*d+d-1) differentiates with respect to x_i; columns
// follow the canonical flattened layout. Requires sigma''.
absl::StatusOr<Eigen::MatrixXd> InputJacobian(const NetworkParams& params,
                                              const DataBatch& batch);

// J v reshaped to d x B, i.e. the gradient of <v, G(X)> with respect to X,
// without materializing J.
absl::StatusOr<Eigen::MatrixXd> InputJacobianProduct(
    const NetworkParams& params, const DataBatch& batch,
    const Eigen::VectorXd& v);

}  // namespace gradleak

#endif  // GRADLEAK_NETWORK_H_
