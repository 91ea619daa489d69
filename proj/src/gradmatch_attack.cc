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

#include "gradleak/gradmatch_attack.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "absl/strings/str_cat.h"
#include "gradleak/random.h"
#include "gradleak/status_macros.h"

namespace gradleak {
namespace {

// Gradient of the distance with respect to one group of G.
struct GroupTerm {
  double value = 0.0;
  Eigen::VectorXd d_value;
};

int CountNonzero(const double* data, Eigen::Index n) {
  int count = 0;
  for (Eigen::Index i = 0; i < n; ++i) count += data[i] != 0.0;
  return count;
}

// -cos(g, t) and its gradient in g. Requires |g| > 0 and |t| > 0.
GroupTerm NegativeCosine(const Eigen::Ref<const Eigen::VectorXd>& g,
                         const Eigen::Ref<const Eigen::VectorXd>& t) {
  const double g_norm = g.norm();
  const double t_norm = t.norm();
  const double c = g.dot(t) / (g_norm * t_norm);
  GroupTerm term;
  term.value = -c;
  term.d_value = -(t / (g_norm * t_norm) - (c / (g_norm * g_norm)) * g);
  return term;
}

Eigen::MatrixXd NormalizeColumns(const Eigen::MatrixXd& X,
                                 const Eigen::MatrixXd& fallback) {
  Eigen::MatrixXd out = X;
  for (Eigen::Index i = 0; i < X.cols(); ++i) {
    const double norm = X.col(i).norm();
    if (norm < kMinCandidateNorm || !std::isfinite(norm)) {
      out.col(i) = fallback.col(i);
    } else {
      out.col(i) /= norm;
    }
  }
  return out;
}

// Gradient with the radial component of each column removed.
Eigen::MatrixXd TangentComponent(const Eigen::MatrixXd& X,
                                 const Eigen::MatrixXd& grad) {
  Eigen::MatrixXd out = grad;
  for (Eigen::Index i = 0; i < X.cols(); ++i) {
    out.col(i) -= X.col(i).dot(grad.col(i)) * X.col(i);
  }
  return out;
}

uint64_t ChainHash(const Eigen::MatrixXd& X, uint64_t hash) {
  return HashDoubles(X.data(), static_cast<size_t>(X.size()), hash);
}

}  // namespace

absl::Status GradMatchConfig::Validate() const {
  if (!(alpha_f >= 0.0) || !std::isfinite(alpha_f)) {
    return absl::InvalidArgumentError("GradMatchConfig: alpha_f must be >= 0");
  }
  if (optimizer.max_iters < 1) {
    return absl::InvalidArgumentError(
        "GradMatchConfig: max_iters must be >= 1");
  }
  if (!(optimizer.step_size > 0.0) || !(optimizer.epsilon > 0.0)) {
    return absl::InvalidArgumentError(
        "GradMatchConfig: step_size and epsilon must be > 0");
  }
  if (!(optimizer.beta1 >= 0.0 && optimizer.beta1 < 1.0) ||
      !(optimizer.beta2 >= 0.0 && optimizer.beta2 < 1.0)) {
    return absl::InvalidArgumentError(
        "GradMatchConfig: betas must lie in [0, 1)");
  }
  if (!(optimizer.step_growth >= 1.0)) {
    return absl::InvalidArgumentError(
        "GradMatchConfig: step_growth must be >= 1");
  }
  if (optimizer.stall_window < 1 || !(optimizer.stall_rel_tol >= 0.0)) {
    return absl::InvalidArgumentError(
        "GradMatchConfig: stall_window >= 1 and stall_rel_tol >= 0");
  }
  if (optimizer.max_halvings < 0 || pairing_refresh < 1) {
    return absl::InvalidArgumentError(
        "GradMatchConfig: max_halvings >= 0 and pairing_refresh >= 1");
  }
  return absl::OkStatus();
}

namespace {

// GradMatchLoss with the input-space pullback skipped when `with_gradient` is
// false.
absl::StatusOr<ValueAndGradient> EvaluateLoss(const Eigen::MatrixXd& X_cand,
                                              const Eigen::VectorXd& y,
                                              const NetworkParams& params,
                                              const GradientObservation& target,
                                              const GradMatchConfig& config,
                                              bool with_gradient) {
  if (target.m() != params.m() || target.d() != params.d()) {
    return absl::InvalidArgumentError(absl::StrCat(
        "GradMatchLoss: target is ", target.m(), "x", target.d(),
        ", network is ", params.m(), "x", params.d()));
  }
  const DataBatch batch{X_cand, y};
  ASSIGN_OR_RETURN(const GradientObservation G, Gradient(params, batch));
  const int m = params.m();
  const Eigen::Index w_size = static_cast<Eigen::Index>(m) * params.d();
  const Eigen::Map<const Eigen::VectorXd> G_W(G.g_W.data(), w_size);
  const Eigen::Map<const Eigen::VectorXd> T_W(target.g_W.data(), w_size);

  double w_a = 1.0, w_W = 1.0;
  if (config.group_reweighting) {
    w_a = CountNonzero(target.g_a.data(), m);
    w_W = CountNonzero(target.g_W.data(), w_size);
  }

  double value = 0.0;
  Eigen::VectorXd d_flat(target.size());
  if (config.distance == MatchDistance::kSquaredL2) {
    double scale =
        w_a * target.g_a.squaredNorm() + w_W * T_W.squaredNorm();
    if (!(scale > 0.0)) scale = 1.0;
    const Eigen::VectorXd r_a = G.g_a - target.g_a;
    const Eigen::VectorXd r_W = G_W - T_W;
    value = (w_a * r_a.squaredNorm() + w_W * r_W.squaredNorm()) / scale;
    d_flat.head(m) = (2.0 * w_a / scale) * r_a;
    d_flat.tail(w_size) = (2.0 * w_W / scale) * r_W;
  } else if (!config.group_reweighting) {
    const Eigen::VectorXd G_flat = G.Flatten();
    const Eigen::VectorXd T_flat = target.Flatten();
    if (T_flat.norm() == 0.0) {
      return absl::InvalidArgumentError("GradMatchLoss: zero target");
    }
    GroupTerm term = NegativeCosine(G_flat, T_flat);
    value = term.value;
    d_flat = std::move(term.d_value);
  } else {
    d_flat.setZero();
    double total_weight = 0.0;
    if (w_a > 0.0) {
      const GroupTerm term = NegativeCosine(G.g_a, target.g_a);
      value += w_a * term.value;
      d_flat.head(m) = w_a * term.d_value;
      total_weight += w_a;
    }
    if (w_W > 0.0) {
      const GroupTerm term = NegativeCosine(G_W, T_W);
      value += w_W * term.value;
      d_flat.tail(w_size) = w_W * term.d_value;
      total_weight += w_W;
    }
    if (total_weight == 0.0) {
      return absl::InvalidArgumentError("GradMatchLoss: zero target");
    }
    value /= total_weight;
    d_flat /= total_weight;
  }
  if (!std::isfinite(value) || !d_flat.allFinite()) {
    return absl::InternalError(
        "GradMatchLoss: diverged candidate (non-finite distance)");
  }
  ValueAndGradient out;
  out.value = value;
  if (with_gradient) {
    ASSIGN_OR_RETURN(out.gradient,
                     InputJacobianProduct(params, batch, d_flat));
  }
  return out;
}

}  // namespace

absl::StatusOr<ValueAndGradient> GradMatchLoss(const Eigen::MatrixXd& X_cand,
                                               const Eigen::VectorXd& y,
                                               const NetworkParams& params,
                                               const GradientObservation& target,
                                               const GradMatchConfig& config) {
  return EvaluateLoss(X_cand, y, params, target, config, true);
}

std::vector<int> GreedyFeaturePairing(const Eigen::MatrixXd& X_cand,
                                      const Eigen::MatrixXd& Z_hat) {
  const int B = static_cast<int>(X_cand.cols());
  const int K = static_cast<int>(Z_hat.cols());
  Eigen::MatrixXd cos_sq(B, K);
  for (int i = 0; i < B; ++i) {
    const double x_norm = X_cand.col(i).norm();
    for (int k = 0; k < K; ++k) {
      const double c = x_norm < kMinCandidateNorm
                           ? 0.0
                           : X_cand.col(i).dot(Z_hat.col(k)) /
                                 (x_norm * Z_hat.col(k).norm());
      cos_sq(i, k) = c * c;
    }
  }
  std::vector<int> pairing(B, -1);
  std::vector<bool> used(K, false);
  for (int round = 0; round < std::min(B, K); ++round) {
    int best_i = -1, best_k = -1;
    double best = -1.0;
    for (int i = 0; i < B; ++i) {
      if (pairing[i] >= 0) continue;
      for (int k = 0; k < K; ++k) {
        if (used[k]) continue;
        if (cos_sq(i, k) > best) {
          best = cos_sq(i, k);
          best_i = i;
          best_k = k;
        }
      }
    }
    pairing[best_i] = best_k;
    used[best_k] = true;
  }
  return pairing;
}

absl::StatusOr<ValueAndGradient> FeatureRegularizer(
    const Eigen::MatrixXd& X_cand, const Eigen::MatrixXd& Z_hat,
    FeatureMode mode, const std::vector<int>& pairing) {
  const int B = static_cast<int>(X_cand.cols());
  ValueAndGradient out;
  out.gradient = Eigen::MatrixXd::Zero(X_cand.rows(), B);
  if (mode == FeatureMode::kOff) return out;
  if (Z_hat.rows() != X_cand.rows() || Z_hat.cols() == 0 || B == 0) {
    return absl::InvalidArgumentError(absl::StrCat(
        "FeatureRegularizer: Z_hat is ", Z_hat.rows(), "x", Z_hat.cols(),
        ", candidates are ", X_cand.rows(), "x", B));
  }

  if (mode == FeatureMode::kSubspace) {
    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(Z_hat);
    const Eigen::Index rank = std::min(Z_hat.rows(), Z_hat.cols());
    const Eigen::MatrixXd Q = qr.householderQ() *
                              Eigen::MatrixXd::Identity(Z_hat.rows(), rank);
    const Eigen::MatrixXd residual = X_cand - Q * (Q.transpose() * X_cand);
    out.value = residual.squaredNorm() / B;
    out.gradient = (2.0 / B) * residual;
    return out;
  }

  const std::vector<int> pairs =
      pairing.empty() ? GreedyFeaturePairing(X_cand, Z_hat) : pairing;
  if (static_cast<int>(pairs.size()) != B) {
    return absl::InvalidArgumentError("FeatureRegularizer: pairing size");
  }
  for (int i = 0; i < B; ++i) {
    const double x_norm = X_cand.col(i).norm();
    const int k = pairs[i];
    if (k < 0 || k >= Z_hat.cols() || x_norm < kMinCandidateNorm) {
      out.value += 1.0;
      continue;
    }
    const Eigen::VectorXd z = Z_hat.col(k) / Z_hat.col(k).norm();
    const double c = X_cand.col(i).dot(z) / x_norm;
    out.value += 1.0 - c * c;
    out.gradient.col(i) = (-2.0 * c / x_norm) * z +
                          (2.0 * c * c / (x_norm * x_norm)) * X_cand.col(i);
  }
  out.value /= B;
  out.gradient /= B;
  return out;
}

absl::StatusOr<ReconstructionResult> GradMatchAttack(
    const GradientObservation& obs, const NetworkParams& params,
    const Eigen::VectorXd& y, const GradMatchConfig& config,
    const Eigen::MatrixXd* Z_hat, GradMatchTrace* trace) {
  RETURN_IF_ERROR(config.Validate());
  const int d = params.d();
  const int B = static_cast<int>(y.size());
  if (B < 1) return absl::InvalidArgumentError("GradMatchAttack: no labels");
  if (obs.m() != params.m() || obs.d() != d) {
    return absl::InvalidArgumentError(
        "GradMatchAttack: observation does not match the network");
  }
  const bool use_features =
      config.feature_mode != FeatureMode::kOff && config.alpha_f > 0.0;
  if (use_features) {
    if (Z_hat == nullptr || Z_hat->rows() != d || Z_hat->cols() == 0) {
      return absl::InvalidArgumentError(
          "GradMatchAttack: feature mode needs a d-row Z_hat");
    }
    for (Eigen::Index k = 0; k < Z_hat->cols(); ++k) {
      if (std::abs(Z_hat->col(k).norm() - 1.0) > 1e-9) {
        return absl::InvalidArgumentError(
            "GradMatchAttack: Z_hat columns must be unit norm");
      }
    }
  }

  Eigen::MatrixXd X(d, B);
  if (config.init == InitScheme::kGiven) {
    if (config.init_X.rows() != d || config.init_X.cols() != B) {
      return absl::InvalidArgumentError(
          "GradMatchAttack: init_X must be d x B");
    }
    X = config.init_X;
    for (int i = 0; i < B; ++i) {
      const double norm = X.col(i).norm();
      if (!(norm >= kMinCandidateNorm)) {
        return absl::InvalidArgumentError(
            "GradMatchAttack: init_X has a zero column");
      }
      X.col(i) /= norm;
    }
  } else {
    Rng rng(config.seed);
    for (int i = 0; i < B; ++i) X.col(i) = SampleUnitVector(d, rng);
  }

  std::vector<int> pairing;
  auto objective = [&](const Eigen::MatrixXd& cand, bool with_gradient)
      -> absl::StatusOr<ValueAndGradient> {
    ASSIGN_OR_RETURN(
        ValueAndGradient total,
        EvaluateLoss(cand, y, params, obs, config, with_gradient));
    if (use_features) {
      ASSIGN_OR_RETURN(
          const ValueAndGradient reg,
          FeatureRegularizer(cand, *Z_hat, config.feature_mode, pairing));
      total.value += config.alpha_f * reg.value;
      if (with_gradient) total.gradient += config.alpha_f * reg.gradient;
    }
    if (!std::isfinite(total.value) || !total.gradient.allFinite()) {
      return absl::InternalError("GradMatchAttack: non-finite objective");
    }
    return total;
  };

  GradMatchTrace local_trace;
  GradMatchTrace& tr = trace != nullptr ? *trace : local_trace;
  tr = GradMatchTrace();
  tr.trajectory_hash = ChainHash(X, 0);

  ReconstructionResult result;
  result.attack = "gradmatch";
  const bool pairing_needed =
      use_features && config.feature_mode == FeatureMode::kCosineSquared;
  if (pairing_needed) pairing = GreedyFeaturePairing(X, *Z_hat);

  absl::StatusOr<ValueAndGradient> current = objective(X, true);
  if (!current.ok()) {
    tr.diverged = true;
    result.X_hat = X;
    result.warnings.push_back(
        absl::StrCat("diverged: ", current.status().message()));
    return result;
  }
  tr.objective.push_back(current->value);
  Eigen::MatrixXd best_X = X;
  double best_value = current->value;

  const AdamConfig& opt = config.optimizer;
  Eigen::MatrixXd first = Eigen::MatrixXd::Zero(d, B);
  Eigen::MatrixXd second = Eigen::MatrixXd::Zero(d, B);
  double beta1_pow = 1.0, beta2_pow = 1.0;
  double tangent_norm = TangentComponent(X, current->gradient).norm();
  double step = opt.step_size;

  for (int iter = 0; iter < opt.max_iters; ++iter) {
    if (tangent_norm < opt.grad_tol) {
      tr.converged = true;
      break;
    }
    if (pairing_needed && iter > 0 && iter % config.pairing_refresh == 0) {
      // Keep the refreshed pairing only when it does not raise the objective,
      // so accepted objectives stay non-increasing.
      const std::vector<int> old_pairing = pairing;
      pairing = GreedyFeaturePairing(X, *Z_hat);
      if (pairing != old_pairing) {
        absl::StatusOr<ValueAndGradient> refreshed = objective(X, true);
        if (refreshed.ok() && refreshed->value <= current->value) {
          current = std::move(refreshed);
          tr.objective.back() = current->value;
        } else {
          pairing = old_pairing;
        }
      }
    }
    tr.iterations = iter + 1;
    const Eigen::MatrixXd grad = TangentComponent(X, current->gradient);
    first = opt.beta1 * first + (1.0 - opt.beta1) * grad;
    second = opt.beta2 * second +
             (1.0 - opt.beta2) * grad.cwiseProduct(grad);
    beta1_pow *= opt.beta1;
    beta2_pow *= opt.beta2;
    const Eigen::MatrixXd direction =
        (first / (1.0 - beta1_pow))
            .cwiseQuotient(
                ((second / (1.0 - beta2_pow)).cwiseSqrt().array() +
                 opt.epsilon)
                    .matrix());

    bool accepted = false;
    for (int h = 0; h <= opt.max_halvings; ++h) {
      const Eigen::MatrixXd trial = NormalizeColumns(X - step * direction, X);
      absl::StatusOr<ValueAndGradient> next = objective(trial, false);
      const bool ok = next.ok();
      if (ok && (!opt.halve_on_increase || next->value <= current->value)) {
        absl::StatusOr<ValueAndGradient> full = objective(trial, true);
        if (full.ok()) {
          X = trial;
          current = std::move(full);
          accepted = true;
          step = std::min(opt.step_size, step * opt.step_growth);
          break;
        }
        next = std::move(full);
      }
      const bool ok_after = next.ok();
      if (!ok_after && !opt.halve_on_increase) {
        tr.diverged = true;
        result.warnings.push_back(
            absl::StrCat("diverged at iteration ", iter, ": ",
                         next.status().message()));
        break;
      }
      ++tr.rejected_steps;
      step *= 0.5;
    }
    if (tr.diverged) break;
    if (!accepted) {
      // No descent along the Adam direction at any tried step length.
      tr.converged = true;
      break;
    }
    tr.objective.push_back(current->value);
    tr.trajectory_hash = ChainHash(X, tr.trajectory_hash);
    if (current->value < best_value) {
      best_value = current->value;
      best_X = X;
    }
    tangent_norm = TangentComponent(X, current->gradient).norm();
    const size_t n = tr.objective.size();
    const size_t window = static_cast<size_t>(opt.stall_window);
    if (n > window && tr.objective[n - 1 - window] - tr.objective[n - 1] <=
                          opt.stall_rel_tol * std::abs(tr.objective[n - 1])) {
      tr.converged = true;
      break;
    }
  }
  if (tangent_norm < opt.grad_tol) tr.converged = true;

  result.X_hat = best_X;
  result.diagnostics = {
      {"objective", best_value},
      {"iterations", static_cast<double>(tr.iterations)},
      {"rejected_steps", static_cast<double>(tr.rejected_steps)},
      {"tangent_grad_norm", tangent_norm},
      {"converged", tr.converged ? 1.0 : 0.0},
  };
  if (!tr.converged && !tr.diverged) {
    result.warnings.push_back("max_iters reached before convergence");
  }
  return result;
}

}  // namespace gradleak
