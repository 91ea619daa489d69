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

#include "gradleak/random.h"

#include <cmath>
#include <cstring>

namespace gradleak {

uint64_t SplitMix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

uint64_t DeriveSeed(uint64_t base, uint64_t index) {
  return SplitMix64(SplitMix64(base) ^ SplitMix64(index + 0x632BE59BD9B4E019ULL));
}

uint64_t DeriveSeed(uint64_t base, SeedStream stream) {
  return DeriveSeed(base, static_cast<uint64_t>(stream) << 56);
}

Eigen::VectorXd SampleGaussianVector(int n, double stddev, Rng& rng) {
  std::normal_distribution<double> normal(0.0, stddev);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = normal(rng);
  return v;
}

Eigen::VectorXd SampleUnitVector(int d, Rng& rng) {
  Eigen::VectorXd v = SampleGaussianVector(d, 1.0, rng);
  double norm = v.norm();
  while (norm == 0.0) {
    v = SampleGaussianVector(d, 1.0, rng);
    norm = v.norm();
  }
  return v / norm;
}

uint64_t HashDoubles(const double* data, size_t n, uint64_t seed) {
  uint64_t h = 0xCBF29CE484222325ULL ^ seed;
  const auto* bytes = reinterpret_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n * sizeof(double); ++i) {
    h ^= bytes[i];
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace gradleak
