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

#ifndef GRADLEAK_RANDOM_H_
#define GRADLEAK_RANDOM_H_

#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace gradleak {

using Rng = std::mt19937_64;

// One SplitMix64 output step applied to `x`.
uint64_t SplitMix64(uint64_t x);

// Stable 64-bit derivation of a child seed. Adding new streams or indices
// never perturbs the seeds of existing ones.
uint64_t DeriveSeed(uint64_t base, uint64_t index);

// Fixed stream tags so that params, data, defenses and attacks inside one
// trial draw from independent generators.
enum class SeedStream : uint64_t {
  kParams = 1,
  kData = 2,
  kDefense = 3,
  kAttack = 4,
  kUtility = 5,
  kSensitivity = 6,
};

uint64_t DeriveSeed(uint64_t base, SeedStream stream);

Eigen::VectorXd SampleGaussianVector(int n, double stddev, Rng& rng);

// Uniform on the unit sphere in R^d.
Eigen::VectorXd SampleUnitVector(int d, Rng& rng);

// FNV-1a over the raw bytes of a vector; used to fingerprint noise draws and
// optimizer trajectories.
uint64_t HashDoubles(const double* data, size_t n, uint64_t seed = 0);

}  // namespace gradleak

#endif  // GRADLEAK_RANDOM_H_
