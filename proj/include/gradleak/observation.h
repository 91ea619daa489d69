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

#ifndef GRADLEAK_OBSERVATION_H_
#define GRADLEAK_OBSERVATION_H_

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "absl/status/statusor.h"

namespace gradleak {

// Row j of a weight matrix is contiguous.
using RowMatrixXd =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class DefenseKind {
  kNoise,
  kClip,
  kPruneRatio,
  kPruneThreshold,
  kDropout,
  kLocalAggregation,
  kSecureAggregation,
};

std::string DefenseKindName(DefenseKind kind);

// What a defense did to one observation. The bounds module reads the clip
// factor and the zeroed-coordinate mask back out of here.
struct DefenseRecord {
  DefenseKind kind = DefenseKind::kNoise;
  // Primary knob: sigma0, C, p, gamma, p, steps or number of clients.
  double param = 0.0;
  // R = min{1, C / ||G||}; 1 for everything except clipping.
  double clip_factor = 1.0;
  // ||G||_2 seen by the clipping step.
  double input_norm = 0.0;
  // Per flattened coordinate, true when the defense zeroed it. Empty when the
  // defense does not zero coordinates.
  std::vector<bool> zeroed;
  int steps = 0;
  uint64_t noise_hash = 0;
  // Local aggregation only: raw Theta^(0) - Theta^(s) in the flattened layout
  // and the parameter snapshots Theta^(0..s-1) the gradients were taken at.
  Eigen::VectorXd theta_difference;
  std::vector<Eigen::VectorXd> snapshots;
};

// Gradient of the summed square loss with respect to (a, W).
//
// Canonical flattened layout shared across the project: all of g_a first,
// then g_W in row-major order, i.e. index m + j * d + k holds dL/dW(j, k).
struct GradientObservation {
  Eigen::VectorXd g_a;
  RowMatrixXd g_W;
  std::vector<DefenseRecord> provenance;

  int m() const { return static_cast<int>(g_a.size()); }
  int d() const { return static_cast<int>(g_W.cols()); }
  int size() const { return m() + m() * d(); }

  Eigen::VectorXd Flatten() const;
  double Norm() const;

  static absl::StatusOr<GradientObservation> Unflatten(
      const Eigen::VectorXd& flat, int m, int d);
};

// Index of dL/dW(j, k) in the flattened layout.
inline int WeightIndex(int m, int d, int j, int k) { return m + j * d + k; }

}  // namespace gradleak

#endif  // GRADLEAK_OBSERVATION_H_
