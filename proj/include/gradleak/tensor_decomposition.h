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

#ifndef GRADLEAK_TENSOR_DECOMPOSITION_H_
#define GRADLEAK_TENSOR_DECOMPOSITION_H_

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "absl/status/statusor.h"
#include "gradleak/symmetric_tensor.h"

namespace gradleak {

struct DecompositionConfig {
  int restarts = 10;
  int iters = 100;
  // Stop a power run once successive iterates are this close in angle.
  double tol = 1e-10;
  // Optional joint Levenberg-Marquardt polish of all components on
  // ||T - sum_i lambda_i u_i^(x)3||_F after deflation. Deflation alone is
  // biased when the components are not orthogonal.
  bool refine = true;
  int refine_iters = 100;
};

struct TensorComponent {
  double lambda = 0.0;
  Eigen::VectorXd u;  // unit norm
  bool converged = true;
};

struct Decomposition {
  std::vector<TensorComponent> components;
  // True when some power run hit `iters` without meeting `tol`.
  bool partial = false;
  // ||T - sum_i lambda_i u_i^(x)3||_F / ||T||_F after all stages.
  double relative_residual = 0.0;
};

// Rank-`rank` symmetric decomposition by tensor power iteration with random
// restarts and deflation. Each component keeps the restart with the largest
// |T(u, u, u)| on the deflated tensor.
absl::StatusOr<Decomposition> DecomposeTensor(const Tensor3& T, int rank,
                                              const DecompositionConfig& config,
                                              uint64_t seed);

}  // namespace gradleak

#endif  // GRADLEAK_TENSOR_DECOMPOSITION_H_
