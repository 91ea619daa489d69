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

#include "gradleak/defenses.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "absl/strings/str_cat.h"
#include "gradleak/random.h"
#include "gradleak/status_macros.h"

namespace gradleak {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

// Zeroes flagged coordinates of the flattened gradient and records the mask.
GradientObservation ApplyMask(const GradientObservation& g,
                              const std::vector<bool>& zeroed,
                              DefenseRecord record) {
  Eigen::VectorXd flat = g.Flatten();
  for (Eigen::Index i = 0; i < flat.size(); ++i) {
    if (zeroed[i]) flat[i] = 0.0;
  }
  GradientObservation out = *GradientObservation::Unflatten(flat, g.m(), g.d());
  out.provenance = g.provenance;
  record.zeroed = zeroed;
  out.provenance.push_back(std::move(record));
  return out;
}

// Marks the floor(p * n) smallest-magnitude entries of `values`, ties going to
// the lower index first.
void MarkSmallest(const Eigen::VectorXd& values, double p, int offset,
                  std::vector<bool>& zeroed) {
  const int n = static_cast<int>(values.size());
  const int k = static_cast<int>(std::floor(p * n));
  if (k == 0) return;
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int lhs, int rhs) {
    return std::abs(values[lhs]) < std::abs(values[rhs]);
  });
  for (int i = 0; i < k; ++i) zeroed[offset + order[i]] = true;
}

absl::Status CheckUnitRange(absl::string_view what, double p) {
  if (!(p >= 0.0 && p < 1.0)) {
    return absl::InvalidArgumentError(
        absl::StrCat(what, ": p must lie in [0, 1), got ", p));
  }
  return absl::OkStatus();
}

}  // namespace

DefenseKind DefenseConfig::kind() const {
  return std::visit(
      Overloaded{
          [](const NoiseDefense&) { return DefenseKind::kNoise; },
          [](const ClipDefense&) { return DefenseKind::kClip; },
          [](const PruneRatioDefense&) { return DefenseKind::kPruneRatio; },
          [](const PruneThresholdDefense&) {
            return DefenseKind::kPruneThreshold;
          },
          [](const DropoutDefense&) { return DefenseKind::kDropout; },
          [](const LocalAggregationDefense&) {
            return DefenseKind::kLocalAggregation;
          },
          [](const SecureAggregationDefense&) {
            return DefenseKind::kSecureAggregation;
          },
      },
      variant);
}

double DefenseConfig::primary_param() const {
  return std::visit(
      Overloaded{
          [](const NoiseDefense& v) { return v.sigma0; },
          [](const ClipDefense& v) { return v.C; },
          [](const PruneRatioDefense& v) { return v.p; },
          [](const PruneThresholdDefense& v) { return v.gamma; },
          [](const DropoutDefense& v) { return v.p; },
          [](const LocalAggregationDefense& v) {
            return static_cast<double>(v.steps);
          },
          [](const SecureAggregationDefense& v) {
            return static_cast<double>(v.client_batch_sizes.size());
          },
      },
      variant);
}

std::string DefenseConfig::name() const { return DefenseKindName(kind()); }

bool DefenseConfig::is_observation_transform() const {
  return kind() != DefenseKind::kLocalAggregation &&
         kind() != DefenseKind::kSecureAggregation;
}

absl::Status DefenseConfig::Validate() const {
  return std::visit(
      Overloaded{
          [](const NoiseDefense& v) -> absl::Status {
            if (!(v.sigma0 >= 0.0) || !(v.clip_scale >= 0.0)) {
              return absl::InvalidArgumentError(
                  "noise: sigma0 and clip_scale must be >= 0");
            }
            return absl::OkStatus();
          },
          [](const ClipDefense& v) -> absl::Status {
            if (!(v.C > 0.0)) {
              return absl::InvalidArgumentError("clip: C must be > 0");
            }
            return absl::OkStatus();
          },
          [](const PruneRatioDefense& v) {
            return CheckUnitRange("prune_ratio", v.p);
          },
          [](const PruneThresholdDefense& v) -> absl::Status {
            if (!(v.gamma >= 0.0)) {
              return absl::InvalidArgumentError(
                  "prune_threshold: gamma must be >= 0");
            }
            return absl::OkStatus();
          },
          [](const DropoutDefense& v) { return CheckUnitRange("dropout", v.p); },
          [](const LocalAggregationDefense& v) -> absl::Status {
            if (v.steps < 1) {
              return absl::InvalidArgumentError(
                  "local_aggregation: steps must be >= 1");
            }
            if (!(v.eta_a > 0.0) || !(v.eta_w > 0.0)) {
              return absl::InvalidArgumentError(
                  "local_aggregation: learning rates must be > 0");
            }
            return absl::OkStatus();
          },
          [](const SecureAggregationDefense& v) -> absl::Status {
            if (v.client_batch_sizes.empty()) {
              return absl::InvalidArgumentError(
                  "secure_aggregation: need at least one client");
            }
            for (int b : v.client_batch_sizes) {
              if (b < 1) {
                return absl::InvalidArgumentError(
                    "secure_aggregation: client batch sizes must be >= 1");
              }
            }
            return absl::OkStatus();
          },
      },
      variant);
}

absl::StatusOr<GradientObservation> ApplyNoise(const GradientObservation& g,
                                               double sigma0, uint64_t seed) {
  if (!(sigma0 >= 0.0)) {
    return absl::InvalidArgumentError("noise: sigma0 must be >= 0");
  }
  DefenseRecord record;
  record.kind = DefenseKind::kNoise;
  record.param = sigma0;
  GradientObservation out = g;
  if (sigma0 > 0.0) {
    Rng rng(seed);
    const Eigen::VectorXd noise = SampleGaussianVector(g.size(), sigma0, rng);
    record.noise_hash = HashDoubles(noise.data(), noise.size());
    const Eigen::VectorXd flat = g.Flatten() + noise;
    out = *GradientObservation::Unflatten(flat, g.m(), g.d());
    out.provenance = g.provenance;
  }
  out.provenance.push_back(std::move(record));
  return out;
}

absl::StatusOr<GradientObservation> ApplyClip(const GradientObservation& g,
                                              double C) {
  if (!(C > 0.0)) return absl::InvalidArgumentError("clip: C must be > 0");
  const double norm = g.Norm();
  DefenseRecord record;
  record.kind = DefenseKind::kClip;
  record.param = C;
  record.input_norm = norm;
  GradientObservation out = g;
  if (norm > C) {
    record.clip_factor = C / norm;
    out.g_a *= record.clip_factor;
    out.g_W *= record.clip_factor;
  }
  out.provenance.push_back(std::move(record));
  return out;
}

absl::StatusOr<GradientObservation> ApplyPruneRatio(
    const GradientObservation& g, double p, PruneScope scope) {
  RETURN_IF_ERROR(CheckUnitRange("prune_ratio", p));
  std::vector<bool> zeroed(g.size(), false);
  if (scope == PruneScope::kJoint) {
    MarkSmallest(g.Flatten(), p, 0, zeroed);
  } else {
    MarkSmallest(g.g_a, p, 0, zeroed);
    const Eigen::Map<const Eigen::VectorXd> w(g.g_W.data(), g.g_W.size());
    MarkSmallest(w, p, g.m(), zeroed);
  }
  DefenseRecord record;
  record.kind = DefenseKind::kPruneRatio;
  record.param = p;
  return ApplyMask(g, zeroed, std::move(record));
}

absl::StatusOr<GradientObservation> ApplyPruneThreshold(
    const GradientObservation& g, double gamma) {
  if (!(gamma >= 0.0)) {
    return absl::InvalidArgumentError("prune_threshold: gamma must be >= 0");
  }
  const Eigen::VectorXd flat = g.Flatten();
  std::vector<bool> zeroed(flat.size());
  for (Eigen::Index i = 0; i < flat.size(); ++i) {
    zeroed[i] = std::abs(flat[i]) < gamma;
  }
  DefenseRecord record;
  record.kind = DefenseKind::kPruneThreshold;
  record.param = gamma;
  return ApplyMask(g, zeroed, std::move(record));
}

absl::StatusOr<GradientObservation> ApplyDropout(const GradientObservation& g,
                                                 double p, uint64_t seed,
                                                 bool coordinate_level) {
  RETURN_IF_ERROR(CheckUnitRange("dropout", p));
  Rng rng(seed);
  std::bernoulli_distribution drop(p);
  std::vector<bool> zeroed(g.size(), false);
  const int m = g.m();
  const int d = g.d();
  int survivors = 0;
  if (coordinate_level) {
    for (int i = 0; i < g.size(); ++i) {
      zeroed[i] = drop(rng);
      survivors += !zeroed[i];
    }
  } else {
    for (int j = 0; j < m; ++j) {
      if (!drop(rng)) {
        ++survivors;
        continue;
      }
      zeroed[j] = true;
      for (int k = 0; k < d; ++k) zeroed[WeightIndex(m, d, j, k)] = true;
    }
  }
  if (survivors == 0) {
    return absl::FailedPreconditionError(
        "dropout: every unit was dropped, the observation is degenerate");
  }
  DefenseRecord record;
  record.kind = DefenseKind::kDropout;
  record.param = p;
  return ApplyMask(g, zeroed, std::move(record));
}

absl::StatusOr<GradientObservation> LocalAggregation(
    const NetworkParams& params, absl::Span<const DataBatch> batches,
    double eta_a, double eta_w, int steps) {
  if (steps < 1) {
    return absl::InvalidArgumentError("local_aggregation: steps must be >= 1");
  }
  if (!(eta_a > 0.0) || !(eta_w > 0.0)) {
    return absl::InvalidArgumentError(
        "local_aggregation: learning rates must be > 0");
  }
  if (batches.size() != 1 && batches.size() != static_cast<size_t>(steps)) {
    return absl::InvalidArgumentError(absl::StrCat(
        "local_aggregation: need 1 or ", steps, " batches, got ",
        batches.size()));
  }
  const int m = params.m();
  const int d = params.d();
  NetworkParams theta = params;
  GradientObservation total;
  total.g_a = Eigen::VectorXd::Zero(m);
  total.g_W = RowMatrixXd::Zero(m, d);
  DefenseRecord record;
  record.kind = DefenseKind::kLocalAggregation;
  record.param = steps;
  record.steps = steps;
  for (int s = 0; s < steps; ++s) {
    Eigen::VectorXd snapshot(params.num_parameters());
    snapshot << theta.a,
        Eigen::Map<const Eigen::VectorXd>(theta.W.data(), theta.W.size());
    record.snapshots.push_back(std::move(snapshot));
    const DataBatch& batch = batches.size() == 1 ? batches[0] : batches[s];
    ASSIGN_OR_RETURN(GradientObservation step, Gradient(theta, batch));
    total.g_a += step.g_a;
    total.g_W += step.g_W;
    theta.a -= eta_a * step.g_a;
    theta.W -= eta_w * step.g_W;
    if (!theta.a.allFinite() || !theta.W.allFinite()) {
      return absl::InternalError(absl::StrCat(
          "local_aggregation: parameters diverged at step ", s + 1));
    }
  }
  record.theta_difference.resize(params.num_parameters());
  record.theta_difference << params.a - theta.a,
      Eigen::Map<const Eigen::VectorXd>(params.W.data(), params.W.size()) -
          Eigen::Map<const Eigen::VectorXd>(theta.W.data(), theta.W.size());
  total.provenance.push_back(std::move(record));
  return total;
}

absl::StatusOr<GradientObservation> SecureAggregate(
    absl::Span<const std::pair<GradientObservation, int>> clients) {
  if (clients.empty()) {
    return absl::InvalidArgumentError("secure_aggregation: no clients");
  }
  const int m = clients[0].first.m();
  const int d = clients[0].first.d();
  GradientObservation out;
  out.g_a = Eigen::VectorXd::Zero(m);
  out.g_W = RowMatrixXd::Zero(m, d);
  int total = 0;
  for (const auto& [g, b] : clients) {
    if (g.m() != m || g.d() != d || g.g_W.rows() != m) {
      return absl::InvalidArgumentError(
          "secure_aggregation: client gradient layouts differ");
    }
    if (b < 1) {
      return absl::InvalidArgumentError(
          "secure_aggregation: client batch sizes must be >= 1");
    }
    out.g_a += g.g_a;
    out.g_W += g.g_W;
    total += b;
  }
  out.g_a /= total;
  out.g_W /= total;
  DefenseRecord record;
  record.kind = DefenseKind::kSecureAggregation;
  record.param = static_cast<double>(clients.size());
  out.provenance.push_back(std::move(record));
  return out;
}

absl::StatusOr<GradientObservation> ApplyDefense(const DefenseConfig& config,
                                                 const GradientObservation& g) {
  RETURN_IF_ERROR(config.Validate());
  return std::visit(
      Overloaded{
          [&](const NoiseDefense& v) -> absl::StatusOr<GradientObservation> {
            const double stddev =
                v.clip_scale > 0.0 ? v.sigma0 * v.clip_scale : v.sigma0;
            return ApplyNoise(g, stddev, config.seed);
          },
          [&](const ClipDefense& v) -> absl::StatusOr<GradientObservation> {
            return ApplyClip(g, v.C);
          },
          [&](const PruneRatioDefense& v)
              -> absl::StatusOr<GradientObservation> {
            return ApplyPruneRatio(g, v.p, v.scope);
          },
          [&](const PruneThresholdDefense& v)
              -> absl::StatusOr<GradientObservation> {
            return ApplyPruneThreshold(g, v.gamma);
          },
          [&](const DropoutDefense& v) -> absl::StatusOr<GradientObservation> {
            return ApplyDropout(g, v.p, config.seed, v.coordinate_level);
          },
          [&](const LocalAggregationDefense&)
              -> absl::StatusOr<GradientObservation> {
            return absl::InvalidArgumentError(
                "local_aggregation changes how the gradient is produced and "
                "cannot be applied to a finished observation");
          },
          [&](const SecureAggregationDefense&)
              -> absl::StatusOr<GradientObservation> {
            return absl::InvalidArgumentError(
                "secure_aggregation combines several client gradients and "
                "cannot be applied to a single observation");
          },
      },
      config.variant);
}

absl::StatusOr<GradientObservation> Compose(
    absl::Span<const DefenseConfig> defenses, const GradientObservation& g) {
  if (defenses.empty()) {
    return absl::InvalidArgumentError("compose: empty defense list");
  }
  GradientObservation current = g;
  for (const DefenseConfig& defense : defenses) {
    ASSIGN_OR_RETURN(current, ApplyDefense(defense, current));
  }
  return current;
}

std::vector<DefenseConfig> DpSgdPreset(double C, double sigma0, uint64_t seed) {
  return {DefenseConfig{ClipDefense{C}, seed},
          DefenseConfig{NoiseDefense{sigma0}, seed}};
}

}  // namespace gradleak
