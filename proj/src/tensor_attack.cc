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

#include "gradleak/tensor_attack.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "absl/status/status.h"
#include "absl/strings/str_cat.h"
#include "gradleak/random.h"
#include "gradleak/status_macros.h"

namespace gradleak {
namespace {

absl::Status CheckShapes(const Eigen::VectorXd& g_a, const RowMatrixXd& W) {
  if (g_a.size() != W.rows() || g_a.size() == 0) {
    return absl::InvalidArgumentError(absl::StrCat(
        "g_a has ", g_a.size(), " entries but W has ", W.rows(), " rows"));
  }
  return absl::OkStatus();
}

// Writes `value` to all index permutations of (a, b, c).
void SetSymmetric(Tensor3& T, int a, int b, int c, double value) {
  T(a, b, c) = value;
  T(a, c, b) = value;
  T(b, a, c) = value;
  T(b, c, a) = value;
  T(c, a, b) = value;
  T(c, b, a) = value;
}

double Delta(int i, int j) { return i == j ? 1.0 : 0.0; }

// All multi-indices over `dims` coordinates with total degree `degree`.
void MultiIndices(int dims, int degree, std::vector<int>& prefix,
                  std::vector<std::vector<int>>& out) {
  if (static_cast<int>(prefix.size()) == dims - 1) {
    prefix.push_back(degree);
    out.push_back(prefix);
    prefix.pop_back();
    return;
  }
  for (int k = 0; k <= degree; ++k) {
    prefix.push_back(k);
    MultiIndices(dims, degree - k, prefix, out);
    prefix.pop_back();
  }
}

}  // namespace

absl::StatusOr<Eigen::MatrixXd> BuildMomentMatrix(
    const Eigen::VectorXd& g_a, const RowMatrixXd& W,
    const HermiteCoefficients& hermite, const Eigen::VectorXd& probe) {
  RETURN_IF_ERROR(CheckShapes(g_a, W));
  const double m = static_cast<double>(g_a.size());
  const int d = static_cast<int>(W.cols());
  Eigen::MatrixXd P;
  if (hermite.k2 == 2) {
    P = W.transpose() * g_a.asDiagonal() * W;
    P.diagonal().array() -= g_a.sum();
  } else if (hermite.k2 == 3) {
    if (probe.size() != d) {
      return absl::InvalidArgumentError("BuildMomentMatrix: probe size != d");
    }
    // H_3(w)(I, I, a)_{ik} = w_i w_k s - w_i a_k - a_i w_k - s delta_ik with
    // s = w . a.
    const Eigen::VectorXd s = W * probe;
    const Eigen::VectorXd gs = g_a.cwiseProduct(s);
    const Eigen::VectorXd u = W.transpose() * g_a;
    P = W.transpose() * gs.asDiagonal() * W;
    P -= u * probe.transpose() + probe * u.transpose();
    P.diagonal().array() -= gs.sum();
  } else {
    return absl::FailedPreconditionError(
        absl::StrCat("BuildMomentMatrix: unsupported k2 = ", hermite.k2));
  }
  P /= m;
  return Eigen::MatrixXd(0.5 * (P + P.transpose()));
}

absl::StatusOr<SubspaceEstimate> EstimateSubspace(const Eigen::MatrixXd& P_hat,
                                                  int B, int iters,
                                                  uint64_t seed) {
  const int d = static_cast<int>(P_hat.rows());
  if (P_hat.cols() != d) {
    return absl::InvalidArgumentError("EstimateSubspace: P_hat not square");
  }
  if (B < 1 || B > d) {
    return absl::InvalidArgumentError(
        absl::StrCat("EstimateSubspace: B = ", B, " outside [1, ", d, "]"));
  }
  if (iters < 1) {
    return absl::InvalidArgumentError("EstimateSubspace: iters must be >= 1");
  }
  Rng rng(seed);
  Eigen::MatrixXd Q(d, B);
  for (int c = 0; c < B; ++c) Q.col(c) = SampleGaussianVector(d, 1.0, rng);
  const Eigen::MatrixXd thin = Eigen::MatrixXd::Identity(d, B);
  for (int it = 0; it < iters; ++it) {
    const Eigen::MatrixXd Z = P_hat * (P_hat * Q);
    Q = Z.householderQr().householderQ() * thin;
  }
  // One more QR on the final iterate so the columns are orthonormal to
  // working precision.
  Q = Q.householderQr().householderQ() * thin;

  SubspaceEstimate out;
  out.V = Q;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(P_hat,
                                                     Eigen::EigenvaluesOnly);
  std::vector<double> mags(d);
  for (int i = 0; i < d; ++i) mags[i] = std::abs(eig.eigenvalues()[i]);
  std::sort(mags.begin(), mags.end(), std::greater<double>());
  out.spectral_gap = B < d ? mags[B - 1] - mags[B] : mags[B - 1];
  const double scale = std::max(mags[0], 1e-300);
  out.ill_conditioned = out.spectral_gap < kMinSpectralGap * scale;
  return out;
}

Eigen::VectorXd ProbeInSpan(const Eigen::MatrixXd& V, uint64_t seed) {
  Eigen::VectorXd probe = V * V.row(0).transpose();
  if (probe.norm() >= kMinProbeProjection) return probe.normalized();
  Rng rng(seed);
  while (true) {
    probe = V * SampleGaussianVector(static_cast<int>(V.cols()), 1.0, rng);
    if (probe.norm() >= kMinProbeProjection) return probe.normalized();
  }
}

absl::StatusOr<Tensor3> BuildProjectedTensor(const Eigen::VectorXd& g_a,
                                             const RowMatrixXd& W,
                                             const Eigen::MatrixXd& V,
                                             const HermiteCoefficients& hermite,
                                             const Eigen::VectorXd& probe) {
  RETURN_IF_ERROR(CheckShapes(g_a, W));
  const int m = static_cast<int>(g_a.size());
  const int d = static_cast<int>(W.cols());
  const int B = static_cast<int>(V.cols());
  if (V.rows() != d) {
    return absl::InvalidArgumentError("BuildProjectedTensor: V rows != d");
  }
  if (hermite.k3 != 3 && hermite.k3 != 4) {
    return absl::FailedPreconditionError(
        absl::StrCat("BuildProjectedTensor: unsupported k3 = ", hermite.k3));
  }
  const bool order4 = hermite.k3 == 4;
  Eigen::VectorXd a_tilde = Eigen::VectorXd::Zero(B);
  Eigen::VectorXd s = Eigen::VectorXd::Zero(m);
  if (order4) {
    if (probe.size() != d) {
      return absl::InvalidArgumentError("BuildProjectedTensor: probe size != d");
    }
    a_tilde = V.transpose() * probe;
    if (a_tilde.norm() < kMinProbeProjection) {
      return absl::FailedPreconditionError(
          "BuildProjectedTensor: probe is nearly orthogonal to span(V); "
          "resample the probe");
    }
    s = W * probe;
  }
  // Row j of Vw is v_j = V^T w_j.
  const Eigen::MatrixXd Vw = W * V;
  // Per-sample weights of the cubic term.
  const Eigen::VectorXd c3 = order4 ? g_a.cwiseProduct(s) : g_a;

  Tensor3 T(B);
  for (int a = 0; a < B; ++a) {
    for (int b = a; b < B; ++b) {
      const Eigen::VectorXd ab = c3.cwiseProduct(Vw.col(a))
                                     .cwiseProduct(Vw.col(b));
      for (int c = b; c < B; ++c) SetSymmetric(T, a, b, c, ab.dot(Vw.col(c)));
    }
  }
  if (!order4) {
    // - sum_j g_j (v_j (x)~ I).
    const Eigen::VectorXd u = Vw.transpose() * g_a;
    for (int a = 0; a < B; ++a) {
      for (int b = a; b < B; ++b) {
        for (int c = b; c < B; ++c) {
          SetSymmetric(T, a, b, c,
                       T(a, b, c) - (u[a] * Delta(b, c) + u[b] * Delta(a, c) +
                                     u[c] * Delta(a, b)));
        }
      }
    }
  } else {
    // H_4(w)(I, I, I, a) projected on V, with v = V^T w, at = V^T a, s = w.a:
    //   v_a v_b v_c s
    //   - (v_a v_b at_c + v_a v_c at_b + at_a v_b v_c)
    //   - s (v_a delta_bc + v_b delta_ac + v_c delta_ab)
    //   + (delta_ab at_c + delta_ac at_b + at_a delta_bc)
    const Eigen::MatrixXd M2 = Vw.transpose() * g_a.asDiagonal() * Vw;
    const Eigen::VectorXd us = Vw.transpose() * c3;
    const double G = g_a.sum();
    const Eigen::VectorXd& at = a_tilde;
    for (int a = 0; a < B; ++a) {
      for (int b = a; b < B; ++b) {
        for (int c = b; c < B; ++c) {
          const double quad =
              M2(a, b) * at[c] + M2(a, c) * at[b] + at[a] * M2(b, c);
          const double lin =
              us[a] * Delta(b, c) + us[b] * Delta(a, c) + us[c] * Delta(a, b);
          const double cst = G * (Delta(a, b) * at[c] + Delta(a, c) * at[b] +
                                  at[a] * Delta(b, c));
          SetSymmetric(T, a, b, c, T(a, b, c) - quad - lin + cst);
        }
      }
    }
  }
  T *= 1.0 / m;
  return T;
}

absl::StatusOr<Eigen::VectorXd> RemoveLowOrderComponents(
    const Eigen::VectorXd& g, const RowMatrixXd& W, const Eigen::MatrixXd* V,
    const std::vector<int>& projected_degrees) {
  RETURN_IF_ERROR(CheckShapes(g, W));
  const int m = static_cast<int>(g.size());
  const int d = static_cast<int>(W.cols());
  std::vector<std::vector<int>> indices;
  Eigen::MatrixXd Vw;
  if (V != nullptr) {
    if (V->rows() != d) {
      return absl::InvalidArgumentError(
          "RemoveLowOrderComponents: V rows != d");
    }
    Vw = W * *V;
    std::vector<int> prefix;
    for (int degree : projected_degrees) {
      MultiIndices(static_cast<int>(V->cols()), degree, prefix, indices);
    }
  }
  const int cols = 1 + d + static_cast<int>(indices.size());
  if (cols >= m) {
    return absl::FailedPreconditionError(absl::StrCat(
        "RemoveLowOrderComponents: ", cols, " features for ", m, " units"));
  }
  Eigen::MatrixXd F(m, cols);
  F.col(0).setOnes();
  F.middleCols(1, d) = W;
  for (size_t c = 0; c < indices.size(); ++c) {
    for (int j = 0; j < m; ++j) {
      double value = 1.0;
      for (size_t b = 0; b < indices[c].size(); ++b) {
        value *= HermitePolynomial(indices[c][b], Vw(j, b));
      }
      F(j, 1 + d + c) = value;
    }
  }
  const Eigen::VectorXd coeffs = F.colPivHouseholderQr().solve(g);
  return Eigen::VectorXd(g - F * coeffs);
}

absl::StatusOr<ReconstructionResult> TensorAttack(
    const GradientObservation& obs, const NetworkParams& params, int B,
    const TensorAttackConfig& config, MomentEstimates* moments) {
  const int d = params.d();
  if (obs.m() != params.m()) {
    return absl::InvalidArgumentError(absl::StrCat(
        "tensor attack: observation has m = ", obs.m(), ", params have m = ",
        params.m()));
  }
  if (B < 1 || B > d) {
    return absl::InvalidArgumentError(
        absl::StrCat("tensor attack: B = ", B, " outside [1, ", d, "]"));
  }
  absl::StatusOr<HermiteCoefficients> hermite =
      HermiteMoments(params.activation, 4, config.quad_nodes);
  if (!hermite.ok()) return WithStage("hermite_moments", hermite.status());

  // Every later stage is homogeneous in g_a, so work with a unit-norm copy.
  const double g_norm = obs.g_a.norm();
  if (!(g_norm > 0.0) || !std::isfinite(g_norm)) {
    return absl::FailedPreconditionError(
        "tensor attack: g_a block is zero or non-finite");
  }
  // Units whose g_a entry is exactly zero (dropped or pruned) carry no
  // observation. The plain moment averages are unchanged up to scale when
  // they are removed; the control-variate fits need them gone.
  std::vector<int> active;
  for (int j = 0; j < obs.m(); ++j) {
    if (obs.g_a[j] != 0.0) active.push_back(j);
  }
  const int m_active = static_cast<int>(active.size());
  Eigen::VectorXd g(m_active);
  RowMatrixXd W(m_active, d);
  for (int r = 0; r < m_active; ++r) {
    g[r] = obs.g_a[active[r]] / g_norm;
    W.row(r) = params.W.row(active[r]);
  }

  Eigen::VectorXd g_matrix = g;
  if (config.control_variates) {
    absl::StatusOr<Eigen::VectorXd> residual =
        RemoveLowOrderComponents(g, W, nullptr, {});
    if (!residual.ok()) return WithStage("control_variates", residual.status());
    g_matrix = *std::move(residual);
  }
  const Eigen::VectorXd e1 = Eigen::VectorXd::Unit(d, 0);
  absl::StatusOr<Eigen::MatrixXd> P_hat =
      BuildMomentMatrix(g_matrix, W, *hermite, e1);
  if (!P_hat.ok()) return WithStage("build_moment_matrix", P_hat.status());

  absl::StatusOr<SubspaceEstimate> subspace = EstimateSubspace(
      *P_hat, B, config.subspace_iters, DeriveSeed(config.seed, 1));
  if (!subspace.ok()) return WithStage("estimate_subspace", subspace.status());
  const Eigen::MatrixXd& V = subspace->V;

  Eigen::VectorXd g_tensor = g;
  if (config.control_variates) {
    std::vector<int> degrees;
    for (int k = 2; k < hermite->k3; ++k) degrees.push_back(k);
    absl::StatusOr<Eigen::VectorXd> residual =
        RemoveLowOrderComponents(g, W, &V, degrees);
    if (!residual.ok()) return WithStage("control_variates", residual.status());
    g_tensor = *std::move(residual);
  }
  const Eigen::VectorXd probe = ProbeInSpan(V, DeriveSeed(config.seed, 2));
  absl::StatusOr<Tensor3> T =
      BuildProjectedTensor(g_tensor, W, V, *hermite, probe);
  if (!T.ok()) return WithStage("build_projected_tensor", T.status());
  const double t_norm = T->FrobeniusNorm();
  if (!(t_norm > 0.0)) {
    return absl::FailedPreconditionError(
        "build_projected_tensor: projected tensor is zero");
  }
  Tensor3 T_unit = *T;
  T_unit *= 1.0 / t_norm;

  absl::StatusOr<Decomposition> decomposition = DecomposeTensor(
      T_unit, B, config.decomposition, DeriveSeed(config.seed, 3));
  if (!decomposition.ok()) {
    return WithStage("decompose_tensor", decomposition.status());
  }

  ReconstructionResult result;
  result.attack = "tensor";
  result.X_hat.resize(d, B);
  result.weights.resize(B);
  for (int i = 0; i < B; ++i) {
    const TensorComponent& comp = decomposition->components[i];
    result.X_hat.col(i) = (V * comp.u).normalized();
    result.weights[i] = comp.lambda;
  }
  if (subspace->ill_conditioned) {
    result.warnings.push_back("estimate_subspace: spectral gap below 1e-12");
  }
  if (decomposition->partial) {
    result.warnings.push_back(
        "decompose_tensor: some power runs did not converge");
  }
  result.diagnostics = {
      {"spectral_gap", subspace->spectral_gap},
      {"decomposition_residual", decomposition->relative_residual},
      {"active_units", static_cast<double>(m_active)},
      {"k2", static_cast<double>(hermite->k2)},
      {"k3", static_cast<double>(hermite->k3)},
  };
  if (moments != nullptr) {
    moments->P_hat = *std::move(P_hat);
    moments->V = V;
    moments->T_proj = *std::move(T);
    moments->k2 = hermite->k2;
    moments->k3 = hermite->k3;
    moments->nu = hermite->nu;
    moments->lambda = hermite->lambda;
    moments->probe = probe;
  }
  return result;
}

}  // namespace gradleak
