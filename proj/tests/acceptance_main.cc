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

// Acceptance checks for the attack, bound, defense and harness layers. Each
// check prints one PASS or FAIL line with the measured values. The exit code
// is nonzero when any check fails, unless that check is listed in
// --known-failures.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <Eigen/Dense>

#include "CLI11.hpp"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "absl/strings/str_join.h"
#include "absl/strings/str_split.h"
#include "gradleak/activation.h"
#include "gradleak/bounds.h"
#include "gradleak/defenses.h"
#include "gradleak/experiment.h"
#include "gradleak/metric.h"
#include "gradleak/network.h"
#include "gradleak/random.h"
#include "gradleak/sweep.h"
#include "gradleak/tensor_attack.h"

namespace gradleak {
namespace {

namespace fs = std::filesystem;

struct CheckResult {
  bool pass = false;
  std::string detail;
  std::vector<std::string> notes;
};

struct Check {
  std::string name;
  std::function<CheckResult()> run;
};

double Median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double LogLogSlope(const std::vector<double>& x, const std::vector<double>& y) {
  const size_t n = x.size();
  double mx = 0, my = 0;
  for (size_t i = 0; i < n; ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0;
  for (size_t i = 0; i < n; ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

std::string Join(const std::vector<double>& v, const char* format = "%.4g") {
  std::vector<std::string> parts;
  for (double x : v) parts.push_back(absl::StrFormat(format, x));
  return absl::StrJoin(parts, " ");
}

ExperimentConfig AttackOnly(int d, int m, int B) {
  ExperimentConfig config;
  config.d = d;
  config.m = m;
  config.B = B;
  config.compute_bounds = false;
  config.utility.enabled = false;
  return config;
}

// Per-trial RMSE of the first configured attack; NaN for failed attacks.
std::vector<double> AttackRmses(const ExperimentConfig& config, int trials,
                                size_t attack = 0) {
  std::vector<double> out;
  for (int t = 0; t < trials; ++t) {
    absl::StatusOr<TrialRecord> record = RunTrial(config, t);
    out.push_back(record.ok() && record->attacks.size() > attack
                      ? record->attacks[attack].rmse
                      : std::numeric_limits<double>::quiet_NaN());
  }
  return out;
}

double Relative(const Eigen::MatrixXd& got, const Eigen::MatrixXd& want) {
  return (got - want).norm() / std::max(want.norm(), 1e-300);
}

CheckResult OracleAgreement() {
  std::mt19937_64 rng(101);
  double worst_gradient = 0.0, worst_jacobian = 0.0;
  for (int c = 0; c < 20; ++c) {
    const int d = 1 + static_cast<int>(rng() % 8);
    const int m = 1 + static_cast<int>(rng() % 64);
    const int B = 1 + static_cast<int>(rng() % std::min(4, d));
    const NetworkParams params = *SampleParams(d, m, rng());
    const DataBatch batch = SampleBatch(d, B, rng());
    const GradientObservation g = *Gradient(params, batch);
    const Eigen::VectorXd flat = g.Flatten();

    // Loss gradient against central differences in every parameter.
    const double h = 1e-5;
    Eigen::VectorXd fd(flat.size());
    for (int k = 0; k < flat.size(); ++k) {
      NetworkParams plus = params, minus = params;
      if (k < m) {
        plus.a[k] += h;
        minus.a[k] -= h;
      } else {
        plus.W((k - m) / d, (k - m) % d) += h;
        minus.W((k - m) / d, (k - m) % d) -= h;
      }
      fd[k] = (*SquareLoss(plus, batch) - *SquareLoss(minus, batch)) / (2 * h);
    }
    worst_gradient = std::max(worst_gradient, Relative(fd, flat));

    // Input Jacobian of the flattened gradient.
    const Eigen::MatrixXd J = *InputJacobian(params, batch);
    Eigen::MatrixXd J_fd(J.rows(), J.cols());
    for (int r = 0; r < J.rows(); ++r) {
      DataBatch plus = batch, minus = batch;
      plus.X.data()[r] += h;
      minus.X.data()[r] -= h;
      J_fd.row(r) = ((Gradient(params, plus)->Flatten() -
                      Gradient(params, minus)->Flatten()) /
                     (2 * h))
                        .transpose();
    }
    worst_jacobian = std::max(worst_jacobian, Relative(J, J_fd));
  }
  return {worst_gradient < 1e-6 && worst_jacobian < 1e-5,
          absl::StrFormat("20 configs; gradient rel err %.2e (< 1e-6), "
                          "Jacobian rel err %.2e (< 1e-5)",
                          worst_gradient, worst_jacobian)};
}

double MaxAbs(const Tensor3& a, const Tensor3& b) {
  double worst = 0.0;
  for (int i = 0; i < a.dim(); ++i)
    for (int j = 0; j < a.dim(); ++j)
      for (int k = 0; k < a.dim(); ++k)
        worst = std::max(worst, std::abs(a(i, j, k) - b(i, j, k)));
  return worst;
}

CheckResult SteinOracle() {
  const int d = 4, n = 1000000;
  Rng rng(202);
  const Eigen::VectorXd x = SampleUnitVector(d, rng);
  RowMatrixXd W(n, d);
  for (int j = 0; j < n; ++j) W.row(j) = SampleGaussianVector(d, 1.0, rng);
  const Eigen::VectorXd probe = SampleUnitVector(d, rng);
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(d, d);

  // Second order: softplus, E[g(w) H_2(w)] = E[sigma''] x x^T.
  const ActivationSpec softplus = ActivationSpec::Softplus();
  const HermiteCoefficients hs = *HermiteMoments(softplus);
  Eigen::VectorXd g(n);
  for (int j = 0; j < n; ++j) g[j] = softplus.Value(W.row(j).dot(x));
  const Eigen::MatrixXd P2 = *BuildMomentMatrix(g, W, hs, probe);
  const Eigen::MatrixXd want2 = hs.SignedMoment(2) * x * x.transpose();
  const double err2 = (P2 - want2).cwiseAbs().maxCoeff();

  // Third order: tanh has a vanishing second moment, so both builders use
  // H_3; E[g(w) H_3(w)] = E[sigma'''] x x x.
  const ActivationSpec tanh_act = ActivationSpec::Tanh();
  const HermiteCoefficients ht = *HermiteMoments(tanh_act);
  for (int j = 0; j < n; ++j) g[j] = tanh_act.Value(W.row(j).dot(x));
  const Eigen::MatrixXd P3 = *BuildMomentMatrix(g, W, ht, probe);
  const Eigen::MatrixXd want3m =
      ht.SignedMoment(3) * x.dot(probe) * x * x.transpose();
  const Tensor3 T3 = *BuildProjectedTensor(g, W, I, ht, probe);
  Tensor3 want3(d);
  want3.AddRankOne(ht.SignedMoment(3), x);
  const double err3 =
      std::max((P3 - want3m).cwiseAbs().maxCoeff(), MaxAbs(T3, want3));
  const bool orders_ok = hs.k2 == 2 && ht.k2 == 3 && ht.k3 == 3;
  return {orders_ok && err2 < 5e-2 && err3 < 5e-2,
          absl::StrFormat("1e6 samples, d=4; max-abs err p=2 %.2e, p=3 %.2e "
                          "(< 5e-2)",
                          err2, err3)};
}

CheckResult UpperBoundScaling() {
  std::vector<double> ms, medians;
  for (int log_m = 11; log_m <= 15; ++log_m) {
    ms.push_back(1 << log_m);
    medians.push_back(Median(AttackRmses(AttackOnly(16, 1 << log_m, 2), 10)));
  }
  const double slope = LogLogSlope(ms, medians);
  const double b2 = medians[3];
  const double b4 = Median(AttackRmses(AttackOnly(16, 1 << 14, 4), 10));
  return {std::abs(slope + 0.5) <= 0.15 && b4 >= b2,
          absl::StrFormat("medians m=2^11..2^15: %s; slope %.3f (-0.5 +- "
                          "0.15); m=2^14 B=4 %.4f >= B=2 %.4f",
                          Join(medians), slope, b4, b2)};
}

CheckResult LowerBoundScaling() {
  std::vector<double> ms, loose;
  int paired = 0, below = 0;
  for (int log_m = 10; log_m <= 13; ++log_m) {
    ExperimentConfig config = AttackOnly(32, 1 << log_m, 2);
    config.compute_bounds = true;
    config.bound_sigma = 0.1;
    config.defenses = {DefenseConfig{NoiseDefense{0.1}, 0}};
    std::vector<double> loose_m;
    for (int t = 0; t < 10; ++t) {
      absl::StatusOr<TrialRecord> r = RunTrial(config, t);
      if (!r.ok()) continue;
      loose_m.push_back(r->rl_loose);
      ++paired;
      below += r->rl_exact <= r->attacks[0].rmse;
    }
    ms.push_back(1 << log_m);
    loose.push_back(Median(loose_m));
  }
  const double slope = LogLogSlope(ms, loose);
  const double fraction = paired ? static_cast<double>(below) / paired : 0.0;
  return {std::abs(slope + 0.5) <= 0.15 && paired == 40 && fraction >= 0.9,
          absl::StrFormat("loose bound medians m=2^10..2^13: %s; slope %.3f "
                          "(-0.5 +- 0.15); exact bound <= attack RMSE in "
                          "%d/%d paired trials (>= 90%%)",
                          Join(loose), slope, below, paired)};
}

CheckResult ClipNeutrality() {
  const ExperimentConfig config = AttackOnly(16, 1 << 12, 2);
  double worst = 0.0;
  bool ok = true;
  for (int t = 0; t < 10; ++t) {
    const TrialInputs inputs = *PrepareTrial(config, t);
    TrialInputs clipped = inputs;
    clipped.obs = *ApplyClip(inputs.obs, inputs.obs.Norm() / 5.0);
    const auto plain = RunAttacks(config, inputs);
    const auto defended = RunAttacks(config, clipped);
    if (!plain[0].ok() || !defended[0].ok()) {
      ok = false;
      continue;
    }
    worst = std::max(worst, (plain[0]->X_hat - defended[0]->X_hat)
                                .cwiseAbs()
                                .maxCoeff());
  }
  return {ok && worst <= 1e-9,
          absl::StrFormat("10 trials at ||G|| = 5C; max |X_hat difference| "
                          "%.2e (<= 1e-9)",
                          worst)};
}

CheckResult DefenseOrdering() {
  const int m = 1 << 14;
  ExperimentConfig none = AttackOnly(16, m, 2);
  ExperimentConfig prune = none;
  prune.defenses = {DefenseConfig{PruneRatioDefense{0.9}, 0}};
  ExperimentConfig dropout = none;
  dropout.defenses = {DefenseConfig{DropoutDefense{0.9}, 0}};
  ExperimentConfig per_group = none;
  per_group.defenses = {
      DefenseConfig{PruneRatioDefense{0.9, PruneScope::kPerGroup}, 0}};
  const double r_none = Median(AttackRmses(none, 10));
  const double r_prune = Median(AttackRmses(prune, 10));
  const double r_drop = Median(AttackRmses(dropout, 10));
  const double r_group = Median(AttackRmses(per_group, 10));
  CheckResult result{
      r_prune >= r_drop && r_drop >= r_none,
      absl::StrFormat("medians at m=2^14: prune 0.9 %.4f >= dropout 0.9 %.4f "
                      ">= undefended %.4f",
                      r_prune, r_drop, r_none)};
  result.notes.push_back(absl::StrFormat(
      "prune 0.9 over the joint gradient keeps every g_a entry (g_a is O(1), "
      "g_W is O(1/m)), so the tensor attack sees the undefended statistic; "
      "per-group prune 0.9 gives %.4f",
      r_group));
  return result;
}

CheckResult NoiseMonotonicity() {
  std::vector<double> medians;
  for (double sigma0 : {0.0, 0.01, 0.1}) {
    ExperimentConfig config = AttackOnly(16, 1 << 14, 2);
    if (sigma0 > 0) config.defenses = {DefenseConfig{NoiseDefense{sigma0}, 0}};
    medians.push_back(Median(AttackRmses(config, 10)));
  }
  return {medians[0] <= medians[1] && medians[1] <= medians[2],
          absl::StrFormat("medians at sigma0 = 0, 0.01, 0.1: %s "
                          "(non-decreasing)",
                          Join(medians))};
}

CheckResult LocalAggregation() {
  const int m = 1 << 14;
  const ExperimentConfig none = AttackOnly(16, m, 2);
  ExperimentConfig local = none;
  local.defenses = {DefenseConfig{
      LocalAggregationDefense{2, 1.0 / (static_cast<double>(m) * m), 1.0,
                              false},
      0}};
  const double r_none = Median(AttackRmses(none, 10));
  const double r_local = Median(AttackRmses(local, 10));
  return {r_local <= 2.0 * r_none,
          absl::StrFormat("2 steps, eta_a = 1/m^2, eta_w = 1: median %.4f "
                          "<= 2 x undefended %.4f",
                          r_local, r_none)};
}

CheckResult DpCalculator() {
  double worst = 0.0;
  for (double eps : {0.1, 0.5, 1.0, 4.0}) {
    for (double delta : {1e-3, 1e-5, 1e-8}) {
      for (double sens : {0.5, 1.0, 100.0}) {
        const double sigma_sq = *RequiredSigmaSq(eps, delta, sens);
        const double back = DpDelta(eps, sigma_sq, sens).delta;
        worst = std::max(worst, std::abs(back - delta) / delta);
      }
    }
  }
  std::vector<double> ms, sigmas;
  for (int m : {256, 1024, 4096}) {
    const NetworkParams params =
        *SampleParams(16, m, DeriveSeed(7, SeedStream::kParams));
    const SensitivityEstimate est = *EstimateSensitivity(
        params, 200, DeriveSeed(7, SeedStream::kSensitivity));
    ms.push_back(m);
    sigmas.push_back(*RequiredSigmaSq(1.0, 1e-5, est.delta_hat));
  }
  const double slope = LogLogSlope(ms, sigmas);
  const bool monotone = sigmas[0] < sigmas[1] && sigmas[1] < sigmas[2];
  return {worst < 1e-9 && monotone && slope >= 0.85,
          absl::StrFormat("round-trip rel err %.2e (< 1e-9); required sigma^2 "
                          "at m=256,1024,4096: %s, log-log slope %.3f "
                          "(>= 0.85)",
                          worst, Join(sigmas), slope)};
}

double BruteForceRmse(const Eigen::MatrixXd& S, const Eigen::MatrixXd& S_hat,
                      bool sign_resolve) {
  const int B = static_cast<int>(S.cols());
  std::vector<int> perm(B);
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    for (int mask = 0; mask < (sign_resolve ? 1 << B : 1); ++mask) {
      double total = 0.0;
      for (int i = 0; i < B; ++i) {
        const double s = (mask >> i) & 1 ? -1.0 : 1.0;
        total += (S.col(i) - s * S_hat.col(perm[i])).squaredNorm();
      }
      best = std::min(best, total);
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return std::sqrt(best / B);
}

CheckResult MetricCorrectness() {
  Rng rng(303);
  int mismatches = 0;
  for (int instance = 0; instance < 200; ++instance) {
    const int B = 1 + instance % 6;
    const int d = 2 + static_cast<int>(rng() % 6);
    Eigen::MatrixXd S(d, B), S_hat(d, B);
    for (int c = 0; c < B; ++c) {
      S.col(c) = SampleUnitVector(d, rng);
      S_hat.col(c) = SampleUnitVector(d, rng);
    }
    const bool sign_resolve = instance % 2 == 0;
    const absl::StatusOr<MatchResult> match =
        MinPermDistance(S, S_hat, sign_resolve);
    mismatches += !match.ok() ||
                  match->rmse != BruteForceRmse(S, S_hat, sign_resolve);
  }
  return {mismatches == 0,
          absl::StrFormat("%d/200 instances differ from brute force (exact)",
                          mismatches)};
}

CheckResult GradientMatching() {
  ExperimentConfig small = AttackOnly(8, 256, 1);
  small.attacks.tensor = false;
  small.attacks.gradmatch = true;
  const double sanity = Median(AttackRmses(small, 5));

  ExperimentConfig plain = AttackOnly(16, 1 << 14, 2);
  plain.defenses = {DefenseConfig{NoiseDefense{0.1}, 0}};
  plain.attacks.gradmatch = true;
  plain.attacks.gradmatch_sign_resolve = true;
  ExperimentConfig featured = plain;
  featured.attacks.gradmatch_config.feature_mode = FeatureMode::kCosineSquared;
  const double r_plain = Median(AttackRmses(plain, 10, 1));
  const double r_feat = Median(AttackRmses(featured, 10, 1));
  return {sanity < 0.05 && r_feat < r_plain,
          absl::StrFormat("B=1 d=8 m=256 median %.4f (< 0.05); sigma0 = 0.1 "
                          "at m=2^14: with feature term %.4f < without %.4f",
                          sanity, r_feat, r_plain)};
}

CheckResult SweepDeterminism() {
  GridConfig grid;
  grid.base.d = 8;
  grid.base.m = 512;
  grid.base.B = 2;
  grid.base.trials = 3;
  grid.base.base_seed = 12;
  grid.base.utility.steps = 20;
  grid.base.attacks.gradmatch = true;
  grid.base.attacks.gradmatch_config.optimizer.max_iters = 200;
  grid.m_values = {256, 512};
  grid.defense_values = {{},
                         {DefenseConfig{NoiseDefense{0.05}, 0}},
                         {DefenseConfig{PruneRatioDefense{0.5}, 0}},
                         {DefenseConfig{DropoutDefense{0.5}, 0}}};
  const fs::path root =
      fs::temp_directory_path() / absl::StrCat("gradleak_acceptance_", getpid());
  std::vector<std::string> csv;
  bool ok = true;
  for (const char* name : {"first", "second"}) {
    SweepOptions options;
    options.output_dir = (root / name).string();
    options.force = true;
    options.workers = 1;
    ok &= RunSweep(grid, options).ok();
    std::ifstream in(root / name / "results.csv", std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    csv.push_back(ss.str());
  }
  fs::remove_all(root);
  return {ok && !csv[0].empty() && csv[0] == csv[1],
          absl::StrFormat("two fresh sweeps, %d CSV bytes each: %s",
                          static_cast<int>(csv[0].size()),
                          csv[0] == csv[1] ? "identical" : "different")};
}

int Main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  std::string known;
  std::string only;
  app.add_option("--known-failures", known,
                 "Comma-separated check names allowed to fail");
  app.add_option("--only", only, "Comma-separated check names to run");
  CLI11_PARSE(app, argc, argv);
  std::setvbuf(stdout, nullptr, _IONBF, 0);

  const std::vector<Check> checks = {
      {"oracle_agreement", OracleAgreement},
      {"stein_oracle", SteinOracle},
      {"upper_bound_scaling", UpperBoundScaling},
      {"lower_bound_scaling", LowerBoundScaling},
      {"clip_neutrality", ClipNeutrality},
      {"defense_ordering", DefenseOrdering},
      {"noise_monotonicity", NoiseMonotonicity},
      {"local_aggregation", LocalAggregation},
      {"dp_calculator", DpCalculator},
      {"metric_correctness", MetricCorrectness},
      {"gradient_matching", GradientMatching},
      {"sweep_determinism", SweepDeterminism},
  };
  std::set<std::string> allowed, selected;
  for (absl::string_view s : absl::StrSplit(known, ',', absl::SkipEmpty())) {
    allowed.insert(std::string(s));
  }
  for (absl::string_view s : absl::StrSplit(only, ',', absl::SkipEmpty())) {
    selected.insert(std::string(s));
  }
  int failed = 0, unexpected = 0;
  for (size_t k = 0; k < checks.size(); ++k) {
    const Check& check = checks[k];
    if (!selected.empty() && selected.count(check.name) == 0) continue;
    const auto start = std::chrono::steady_clock::now();
    const CheckResult result = check.run();
    const double seconds = std::chrono::duration<double>(
                               std::chrono::steady_clock::now() - start)
                               .count();
    std::printf("%-4s %2zu %-20s %s [%.1f s]\n", result.pass ? "PASS" : "FAIL",
                k + 1, check.name.c_str(), result.detail.c_str(), seconds);
    for (const std::string& note : result.notes) {
      std::printf("          note: %s\n", note.c_str());
    }
    if (!result.pass) {
      ++failed;
      if (allowed.count(check.name) == 0) ++unexpected;
    }
  }
  std::printf("%d check(s) failed, %d not listed as known failures\n", failed,
              unexpected);
  return unexpected == 0 ? 0 : 1;
}

}  // namespace
}  // namespace gradleak

int main(int argc, char** argv) { return gradleak::Main(argc, argv); }
