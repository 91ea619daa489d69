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

#include "gradleak/tensor_decomposition.h"

#include <cmath>

#include "absl/status/status.h"
#include "absl/strings/str_cat.h"
#include "gradleak/random.h"

namespace gradleak {
namespace {

struct PowerRun {
  Eigen::VectorXd u;
  double value = 0.0;
  bool converged = false;
};

PowerRun RunPower(const Tensor3& T, Eigen::VectorXd u, int iters, double tol) {
  PowerRun run;
  for (int it = 0; it < iters; ++it) {
    Eigen::VectorXd next = T.Contract2(u);
    const double norm = next.norm();
    if (norm == 0.0) break;
    next /= norm;
    const double s = next.dot(u) < 0.0 ? -1.0 : 1.0;
    const double step = (next - s * u).norm();
    u = next;
    if (step < tol) {
      run.converged = true;
      break;
    }
  }
  run.value = T.Contract3(u);
  // Orient u so that lambda = T(u, u, u) is nonnegative.
  if (run.value < 0.0) {
    u = -u;
    run.value = -run.value;
  }
  run.u = u;
  return run;
}

// Columns of `b` are the unnormalized factors: model = sum_i b_i^(x)3.
Eigen::VectorXd Residual(const Tensor3& T, const Eigen::MatrixXd& b) {
  Tensor3 model(T.dim());
  for (int i = 0; i < b.cols(); ++i) model.AddRankOne(1.0, b.col(i));
  Eigen::VectorXd r(T.data().size());
  for (size_t e = 0; e < T.data().size(); ++e) {
    r[e] = model.data()[e] - T.data()[e];
  }
  return r;
}

Eigen::MatrixXd ResidualJacobian(const Eigen::MatrixXd& b) {
  const int n = static_cast<int>(b.rows());
  const int R = static_cast<int>(b.cols());
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n * n * n, n * R);
  for (int c = 0; c < R; ++c) {
    const Eigen::VectorXd v = b.col(c);
    for (int p = 0; p < n; ++p) {
      for (int q = 0; q < n; ++q) {
        for (int r = 0; r < n; ++r) {
          const int row = (p * n + q) * n + r;
          J(row, c * n + p) += v[q] * v[r];
          J(row, c * n + q) += v[p] * v[r];
          J(row, c * n + r) += v[p] * v[q];
        }
      }
    }
  }
  return J;
}

Eigen::MatrixXd Refine(const Tensor3& T, Eigen::MatrixXd b, int iters) {
  const int n = static_cast<int>(b.rows());
  const int R = static_cast<int>(b.cols());
  Eigen::VectorXd r = Residual(T, b);
  double cost = r.squaredNorm();
  double mu = 1e-3;
  for (int it = 0; it < iters && cost > 0.0; ++it) {
    const Eigen::MatrixXd J = ResidualJacobian(b);
    const Eigen::MatrixXd JtJ = J.transpose() * J;
    const Eigen::VectorXd Jtr = J.transpose() * r;
    bool accepted = false;
    for (int attempt = 0; attempt < 20; ++attempt) {
      Eigen::MatrixXd A = JtJ;
      A.diagonal().array() += mu * (1.0 + JtJ.diagonal().array());
      const Eigen::VectorXd delta = A.ldlt().solve(-Jtr);
      Eigen::MatrixXd candidate = b;
      for (int c = 0; c < R; ++c) candidate.col(c) += delta.segment(c * n, n);
      const Eigen::VectorXd r_new = Residual(T, candidate);
      const double cost_new = r_new.squaredNorm();
      if (std::isfinite(cost_new) && cost_new < cost) {
        const double gain = cost - cost_new;
        b = candidate;
        r = r_new;
        cost = cost_new;
        mu = std::max(mu / 3.0, 1e-12);
        accepted = true;
        if (gain <= 1e-15 * cost + 1e-300) return b;
        break;
      }
      mu *= 4.0;
    }
    if (!accepted) break;
  }
  return b;
}

}  // namespace

absl::StatusOr<Decomposition> DecomposeTensor(const Tensor3& T, int rank,
                                              const DecompositionConfig& config,
                                              uint64_t seed) {
  const int n = T.dim();
  if (rank < 1 || rank > n) {
    return absl::InvalidArgumentError(absl::StrCat(
        "DecomposeTensor: rank ", rank, " outside [1, ", n, "]"));
  }
  if (config.restarts < 1 || config.iters < 1) {
    return absl::InvalidArgumentError(
        "DecomposeTensor: restarts and iters must be >= 1");
  }
  Rng rng(seed);
  Decomposition out;
  Tensor3 deflated = T;
  for (int c = 0; c < rank; ++c) {
    PowerRun best;
    best.value = -1.0;
    for (int r = 0; r < config.restarts; ++r) {
      PowerRun run =
          RunPower(deflated, SampleUnitVector(n, rng), config.iters, config.tol);
      if (run.value > best.value) best = std::move(run);
    }
    out.partial |= !best.converged;
    deflated.AddRankOne(-best.value, best.u);
    out.components.push_back({best.value, best.u, best.converged});
  }
  if (config.refine && config.refine_iters > 0) {
    Eigen::MatrixXd b(n, rank);
    for (int c = 0; c < rank; ++c) {
      b.col(c) = std::cbrt(out.components[c].lambda) * out.components[c].u;
    }
    b = Refine(T, b, config.refine_iters);
    for (int c = 0; c < rank; ++c) {
      const double norm = b.col(c).norm();
      if (norm == 0.0) continue;
      out.components[c].lambda = norm * norm * norm;
      out.components[c].u = b.col(c) / norm;
    }
  }
  Tensor3 residual = T;
  for (const TensorComponent& comp : out.components) {
    residual.AddRankOne(-comp.lambda, comp.u);
  }
  const double scale = T.FrobeniusNorm();
  out.relative_residual =
      scale > 0.0 ? residual.FrobeniusNorm() / scale : residual.FrobeniusNorm();
  return out;
}

}  // namespace gradleak
