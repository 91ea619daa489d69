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

#ifndef GRADLEAK_METRIC_H_
#define GRADLEAK_METRIC_H_

#include <vector>

#include <Eigen/Dense>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "gradleak/reconstruction.h"

namespace gradleak {

// Minimum-cost perfect matching on a square cost matrix (Hungarian method
// with potentials, O(n^3)). Returns assignment[row] = column.
std::vector<int> SolveAssignment(const Eigen::MatrixXd& cost);

struct MatchResult {
  // sqrt((1/B) sum_i ||S_i - s_i * S_hat_{assignment[i]}||^2)
  double rmse = 0.0;
  std::vector<int> assignment;
  // +1 or -1 per column of S; all +1 when signs are not resolved.
  std::vector<int> signs;
};

// Permutation-resolved (and optionally sign-resolved) reconstruction error
// between the columns of S and S_hat. Matched costs are summed in ascending
// order of the columns of S.
absl::StatusOr<MatchResult> MinPermDistance(const Eigen::MatrixXd& S,
                                            const Eigen::MatrixXd& S_hat,
                                            bool sign_resolve);

// Fills rmse, assignment and signs of `result` against the ground truth.
absl::Status ScoreReconstruction(const Eigen::MatrixXd& X_true,
                                 bool sign_resolve,
                                 ReconstructionResult& result);

}  // namespace gradleak

#endif  // GRADLEAK_METRIC_H_
