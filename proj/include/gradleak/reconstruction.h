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

#ifndef GRADLEAK_RECONSTRUCTION_H_
#define GRADLEAK_RECONSTRUCTION_H_

#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace gradleak {

// Output of any reconstruction attack.
struct ReconstructionResult {
  std::string attack;
  // d x B, unit-norm columns.
  Eigen::MatrixXd X_hat;
  // Tensor component weights; empty for attacks that do not produce them.
  Eigen::VectorXd weights;
  // Filled in by scoring. signs_resolved says whether the metric was allowed
  // to flip columns.
  std::vector<int> signs;
  bool signs_resolved = false;
  double rmse = std::numeric_limits<double>::quiet_NaN();
  std::vector<int> assignment;
  // Non-fatal conditions met along the way (ill-conditioned subspace,
  // unconverged decomposition, diverged optimizer, ...).
  std::vector<std::string> warnings;
  // Named scalar diagnostics, in insertion order.
  std::vector<std::pair<std::string, double>> diagnostics;
};

}  // namespace gradleak

#endif  // GRADLEAK_RECONSTRUCTION_H_
