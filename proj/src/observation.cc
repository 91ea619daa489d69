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

#include "gradleak/observation.h"

#include <cmath>

#include "absl/status/status.h"
#include "absl/strings/str_cat.h"

namespace gradleak {

std::string DefenseKindName(DefenseKind kind) {
  switch (kind) {
    case DefenseKind::kNoise:
      return "noise";
    case DefenseKind::kClip:
      return "clip";
    case DefenseKind::kPruneRatio:
      return "prune_ratio";
    case DefenseKind::kPruneThreshold:
      return "prune_threshold";
    case DefenseKind::kDropout:
      return "dropout";
    case DefenseKind::kLocalAggregation:
      return "local_aggregation";
    case DefenseKind::kSecureAggregation:
      return "secure_aggregation";
  }
  return "unknown";
}

Eigen::VectorXd GradientObservation::Flatten() const {
  const int mm = m();
  const int dd = d();
  Eigen::VectorXd flat(size());
  flat.head(mm) = g_a;
  flat.tail(static_cast<Eigen::Index>(mm) * dd) =
      Eigen::Map<const Eigen::VectorXd>(g_W.data(), g_W.size());
  return flat;
}

double GradientObservation::Norm() const {
  return std::sqrt(g_a.squaredNorm() + g_W.squaredNorm());
}

absl::StatusOr<GradientObservation> GradientObservation::Unflatten(
    const Eigen::VectorXd& flat, int m, int d) {
  if (m < 1 || d < 1 || flat.size() != static_cast<Eigen::Index>(m) * (d + 1)) {
    return absl::InvalidArgumentError(
        absl::StrCat("Unflatten: length ", flat.size(),
                     " does not match m=", m, ", d=", d));
  }
  GradientObservation obs;
  obs.g_a = flat.head(m);
  obs.g_W = Eigen::Map<const RowMatrixXd>(flat.data() + m, m, d);
  return obs;
}

}  // namespace gradleak
