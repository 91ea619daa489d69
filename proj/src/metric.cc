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

#include "gradleak/metric.h"

#include <cmath>
#include <limits>
#include <utility>

#include "absl/status/status.h"

namespace gradleak {

std::vector<int> SolveAssignment(const Eigen::MatrixXd& cost) {
  const int n = static_cast<int>(cost.rows());
  constexpr double kInf = std::numeric_limits<double>::infinity();
  // 1-based potentials; column 0 is a virtual start.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> match(n + 1, 0), way(n + 1, 0);
  for (int row = 1; row <= n; ++row) {
    match[0] = row;
    int col0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<bool> used(n + 1, false);
    do {
      used[col0] = true;
      const int r = match[col0];
      double delta = kInf;
      int col1 = 0;
      for (int c = 1; c <= n; ++c) {
        if (used[c]) continue;
        const double reduced = cost(r - 1, c - 1) - u[r] - v[c];
        if (reduced < minv[c]) {
          minv[c] = reduced;
          way[c] = col0;
        }
        if (minv[c] < delta) {
          delta = minv[c];
          col1 = c;
        }
      }
      for (int c = 0; c <= n; ++c) {
        if (used[c]) {
          u[match[c]] += delta;
          v[c] -= delta;
        } else {
          minv[c] -= delta;
        }
      }
      col0 = col1;
    } while (match[col0] != 0);
    do {
      const int col1 = way[col0];
      match[col0] = match[col1];
      col0 = col1;
    } while (col0 != 0);
  }
  std::vector<int> assignment(n, -1);
  for (int c = 1; c <= n; ++c) assignment[match[c] - 1] = c - 1;
  return assignment;
}

absl::StatusOr<MatchResult> MinPermDistance(const Eigen::MatrixXd& S,
                                            const Eigen::MatrixXd& S_hat,
                                            bool sign_resolve) {
  if (S.rows() != S_hat.rows() || S.cols() != S_hat.cols() || S.cols() == 0) {
    return absl::InvalidArgumentError(
        "MinPermDistance: S and S_hat must have the same nonempty shape");
  }
  const int B = static_cast<int>(S.cols());
  Eigen::MatrixXd cost(B, B);
  Eigen::MatrixXi best_sign(B, B);
  for (int i = 0; i < B; ++i) {
    for (int j = 0; j < B; ++j) {
      const double plus = (S.col(i) - S_hat.col(j)).squaredNorm();
      const double minus = (S.col(i) + S_hat.col(j)).squaredNorm();
      if (sign_resolve && minus < plus) {
        cost(i, j) = minus;
        best_sign(i, j) = -1;
      } else {
        cost(i, j) = plus;
        best_sign(i, j) = 1;
      }
    }
  }
  MatchResult result;
  result.assignment = SolveAssignment(cost);
  result.signs.resize(B);
  double total = 0.0;
  for (int i = 0; i < B; ++i) {
    const int j = result.assignment[i];
    total += cost(i, j);
    result.signs[i] = best_sign(i, j);
  }
  result.rmse = std::sqrt(total / B);
  return result;
}

absl::Status ScoreReconstruction(const Eigen::MatrixXd& X_true,
                                 bool sign_resolve,
                                 ReconstructionResult& result) {
  absl::StatusOr<MatchResult> match =
      MinPermDistance(X_true, result.X_hat, sign_resolve);
  if (!match.ok()) return match.status();
  result.rmse = match->rmse;
  result.assignment = std::move(match->assignment);
  result.signs = std::move(match->signs);
  result.signs_resolved = sign_resolve;
  return absl::OkStatus();
}

}  // namespace gradleak
