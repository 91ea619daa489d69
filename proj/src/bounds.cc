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

#include "gradleak/bounds.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "absl/status/status.h"
#include "absl/strings/str_cat.h"
#include "gradleak/defenses.h"
#include "gradleak/random.h"
#include "gradleak/status_macros.h"

namespace gradleak {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void FillRoots(BoundReport& report) {
  report.exact = std::sqrt(report.exact_sq);
  report.loose = std::sqrt(report.loose_sq);
}

}  // namespace

bool BoundReport::HasFlag(const std::string& flag) const {
  return std::find(flags.begin(), flags.end(), flag) != flags.end();
}

absl::StatusOr<BoundReport> CramerRao(const Eigen::MatrixXd& J, double sigma,
                                      int B) {
  if (!(sigma > 0.0)) {
    return absl::InvalidArgumentError("CramerRao: sigma must be > 0");
  }
  if (B < 1 || J.rows() == 0 || J.rows() % B != 0) {
    return absl::InvalidArgumentError(absl::StrCat(
        "CramerRao: J has ", J.rows(), " rows, not a multiple of B = ", B));
  }
  BoundReport report;
  report.sigma = sigma;
  report.sigma_eff = sigma;
  report.full_rank = static_cast<int>(J.rows());
  const double s2 = sigma * sigma;
  const double n = static_cast<double>(J.rows());
  const double trace = J.squaredNorm();
  if (J.cols() == 0 || trace == 0.0) {
    report.exact_sq = kInf;
    report.loose_sq = kInf;
    report.exact_on_range_sq = kInf;
    report.flags.push_back("no_information");
    FillRoots(report);
    return report;
  }
  report.loose_sq = n * n * s2 / (trace * B);

  const Eigen::MatrixXd JJt = J * J.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(JJt,
                                                     Eigen::EigenvaluesOnly);
  const Eigen::VectorXd& lambda = eig.eigenvalues();
  const double floor = kEigenvalueFloor * lambda.maxCoeff();
  double inverse_trace = 0.0;
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    if (lambda[i] > floor) {
      inverse_trace += 1.0 / lambda[i];
      ++report.rank;
    }
  }
  report.exact_on_range_sq = inverse_trace * s2 / B;
  if (report.rank < report.full_rank) {
    report.exact_sq = kInf;
    report.flags.push_back("rank_deficient");
  } else {
    report.exact_sq = report.exact_on_range_sq;
  }
  FillRoots(report);
  return report;
}

absl::StatusOr<BoundReport> BoundUnderDefense(const Eigen::MatrixXd& J,
                                              double sigma, int B,
                                              const GradientObservation& obs) {
  if (J.cols() != obs.size()) {
    return absl::InvalidArgumentError(absl::StrCat(
        "BoundUnderDefense: J has ", J.cols(), " columns, observation has ",
        obs.size(), " coordinates"));
  }
  if (B < 1 || J.rows() % B != 0) {
    return absl::InvalidArgumentError("BoundUnderDefense: bad batch size");
  }
  double clip_factor = 1.0;
  double dropout_p = 0.0;
  bool aggregated = false;
  std::vector<bool> deleted(obs.size(), false);
  for (const DefenseRecord& record : obs.provenance) {
    switch (record.kind) {
      case DefenseKind::kClip:
        clip_factor *= record.clip_factor;
        break;
      case DefenseKind::kDropout:
        dropout_p = 1.0 - (1.0 - dropout_p) * (1.0 - record.param);
        [[fallthrough]];
      case DefenseKind::kPruneRatio:
      case DefenseKind::kPruneThreshold:
        if (record.zeroed.size() != deleted.size()) {
          return absl::InvalidArgumentError(
              "BoundUnderDefense: mask length differs from the observation");
        }
        for (size_t i = 0; i < deleted.size(); ++i) {
          deleted[i] = deleted[i] || record.zeroed[i];
        }
        break;
      case DefenseKind::kLocalAggregation:
      case DefenseKind::kSecureAggregation:
        aggregated = true;
        break;
      case DefenseKind::kNoise:
        break;
    }
  }
  if (!(clip_factor > 0.0)) {
    return absl::InvalidArgumentError("BoundUnderDefense: clip factor <= 0");
  }
  const double sigma_eff = sigma / clip_factor;

  std::vector<Eigen::Index> kept;
  kept.reserve(deleted.size());
  for (size_t i = 0; i < deleted.size(); ++i) {
    if (!deleted[i]) kept.push_back(static_cast<Eigen::Index>(i));
  }
  const Eigen::MatrixXd J_kept = J(Eigen::placeholders::all, kept);
  ASSIGN_OR_RETURN(BoundReport report, CramerRao(J_kept, sigma_eff, B));
  report.sigma = sigma;
  report.clip_factor = clip_factor;
  report.dropout_p = dropout_p;
  report.deleted_coordinates = static_cast<int>(deleted.size() - kept.size());
  const double total_mass = J.squaredNorm();
  report.p_hat =
      total_mass > 0.0 ? 1.0 - J_kept.squaredNorm() / total_mass : 0.0;

  const double d = static_cast<double>(J.rows() / B);
  const double m = static_cast<double>(obs.m());
  double p = report.p_hat;
  if (dropout_p > 0.0) p = dropout_p;
  report.closed_form =
      p < 1.0 ? sigma_eff * std::sqrt(d / ((1.0 - p) * m)) : kInf;
  if (clip_factor < 1.0) report.flags.push_back("clipped");
  if (aggregated) report.flags.push_back("aggregation_base_bound");
  return report;
}

absl::StatusOr<Eigen::MatrixXd> LocalAggregationJacobian(
    const NetworkParams& params, const DataBatch& batch, double eta_a,
    double eta_w, int steps, double step_size) {
  const int d = batch.d();
  const int B = batch.B();
  Eigen::MatrixXd J(B * d, params.num_parameters());
  for (int i = 0; i < B; ++i) {
    for (int k = 0; k < d; ++k) {
      DataBatch plus = batch;
      DataBatch minus = batch;
      plus.X(k, i) += step_size;
      minus.X(k, i) -= step_size;
      ASSIGN_OR_RETURN(GradientObservation g_plus,
                       LocalAggregation(params, {plus}, eta_a, eta_w, steps));
      ASSIGN_OR_RETURN(GradientObservation g_minus,
                       LocalAggregation(params, {minus}, eta_a, eta_w, steps));
      J.row(i * d + k) =
          ((g_plus.Flatten() - g_minus.Flatten()) / (2.0 * step_size))
              .transpose();
    }
  }
  return J;
}

DpDeltaResult DpDelta(double epsilon, double sigma_sq, double sensitivity) {
  DpDeltaResult out;
  if (!(epsilon > 0.0) || !(sigma_sq > 0.0) || !(sensitivity > 0.0)) {
    out.lambda_below_one = true;
    return out;
  }
  const double t = sigma_sq * epsilon / sensitivity;
  out.optimal_lambda = t - 0.5;
  out.lambda_below_one = out.optimal_lambda < 1.0;
  if (t <= 0.5) return out;
  const double exponent =
      -(sensitivity / (2.0 * sigma_sq)) * out.optimal_lambda *
      out.optimal_lambda;
  out.delta = std::clamp(std::exp(exponent), 0.0, 1.0);
  return out;
}

absl::StatusOr<double> RequiredSigmaSq(double epsilon, double delta,
                                       double sensitivity) {
  if (!(epsilon > 0.0) || !(sensitivity > 0.0)) {
    return absl::InvalidArgumentError(
        "RequiredSigmaSq: epsilon and sensitivity must be > 0");
  }
  if (!(delta > 0.0 && delta < 1.0)) {
    return absl::InvalidArgumentError(
        "RequiredSigmaSq: delta must lie in (0, 1)");
  }
  // With t = sigma^2 eps / Delta the target is
  //   t - 1 + 1/(4t) = 2 ln(1/delta) / eps,
  // a quadratic whose larger root is the one above the vacuous point t = 1/2.
  const double b = 1.0 + 2.0 * std::log(1.0 / delta) / epsilon;
  const double disc = b * b - 1.0;
  if (!(disc >= 0.0)) {
    return absl::InternalError("RequiredSigmaSq: no real root");
  }
  const double t = 0.5 * (b + std::sqrt(disc));
  return t * sensitivity / epsilon;
}

absl::StatusOr<double> SquaredGradientGap(const NetworkParams& params,
                                          const Eigen::VectorXd& x, double y,
                                          const Eigen::VectorXd& x_prime,
                                          double y_prime) {
  ASSIGN_OR_RETURN(DataBatch first,
                   DataBatch::Create(x, Eigen::VectorXd::Constant(1, y)));
  ASSIGN_OR_RETURN(DataBatch second, DataBatch::Create(
                                         x_prime,
                                         Eigen::VectorXd::Constant(1, y_prime)));
  ASSIGN_OR_RETURN(GradientObservation g1, Gradient(params, first));
  ASSIGN_OR_RETURN(GradientObservation g2, Gradient(params, second));
  return (g1.Flatten() - g2.Flatten()).squaredNorm();
}

absl::StatusOr<SensitivityEstimate> EstimateSensitivity(
    const NetworkParams& params, int trials, uint64_t seed) {
  if (trials < 1) {
    return absl::InvalidArgumentError("EstimateSensitivity: trials must be >= 1");
  }
  const int d = params.d();
  Rng rng(seed);
  std::bernoulli_distribution coin(0.5);
  SensitivityEstimate out;
  out.trials = trials;
  for (int t = 0; t < trials; ++t) {
    const Eigen::VectorXd x = SampleUnitVector(d, rng);
    const Eigen::VectorXd x_prime = SampleUnitVector(d, rng);
    const double y = coin(rng) ? 1.0 : -1.0;
    const double y_prime = coin(rng) ? 1.0 : -1.0;
    ASSIGN_OR_RETURN(double gap,
                     SquaredGradientGap(params, x, y, x_prime, y_prime));
    out.delta_hat = std::max(out.delta_hat, gap);
  }
  return out;
}

}  // namespace gradleak
