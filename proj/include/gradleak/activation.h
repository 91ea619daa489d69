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

#ifndef GRADLEAK_ACTIVATION_H_
#define GRADLEAK_ACTIVATION_H_

#include <functional>
#include <string>
#include <vector>

#include "absl/status/statusor.h"

namespace gradleak {

enum class ActivationKind { kSoftplus, kExp, kTanh, kCubicPoly, kCustom };

// Pointwise activation together with its analytic first and second
// derivatives. Custom activations may omit the second derivative, in which
// case Jacobian-based computations report kUnimplemented.
class ActivationSpec {
 public:
  using ScalarFn = std::function<double(double)>;

  static ActivationSpec Softplus();
  // Not Lipschitz; only meant to exercise the order-3 tensor path.
  static ActivationSpec Exp();
  static ActivationSpec Tanh();
  // c0 + c1 z + c2 z^2 + c3 z^3.
  static ActivationSpec CubicPoly(double c0, double c1, double c2, double c3);
  static ActivationSpec Custom(std::string name, ScalarFn value,
                               ScalarFn first_derivative,
                               ScalarFn second_derivative = nullptr);

  // Parses "softplus", "exp", "tanh".
  static absl::StatusOr<ActivationSpec> FromName(const std::string& name);

  ActivationKind kind() const { return kind_; }
  const std::string& name() const { return name_; }
  bool is_lipschitz() const { return kind_ != ActivationKind::kExp; }
  bool has_second_derivative() const;

  double Value(double z) const;
  double FirstDerivative(double z) const;
  // Undefined (NaN) when has_second_derivative() is false.
  double SecondDerivative(double z) const;

 private:
  ActivationSpec(ActivationKind kind, std::string name)
      : kind_(kind), name_(std::move(name)) {}

  ActivationKind kind_;
  std::string name_;
  double coeffs_[4] = {0, 0, 0, 0};
  ScalarFn value_;
  ScalarFn first_;
  ScalarFn second_;
};

// Probabilists' Gauss-Hermite rule: E[f(z)], z ~ N(0, 1), is approximated by
// sum_i weights[i] f(nodes[i]). Weights sum to one.
struct GaussHermiteRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

GaussHermiteRule MakeGaussHermiteRule(int num_nodes);

// Probabilists' Hermite polynomial He_k(z).
double HermitePolynomial(int k, double z);

// Gaussian moments of the activation against Hermite polynomials. By Stein's
// lemma moments[k] = E[sigma(z) He_k(z)] = E[sigma^(k)(z)].
struct HermiteCoefficients {
  int k2 = 0;           // first order >= 2 with a nonzero moment
  int k3 = 0;           // first order >= 3 with a nonzero moment
  double nu = 0.0;      // |moments[k2]|
  double lambda = 0.0;  // |moments[k3]|
  std::vector<double> moments;

  double SignedMoment(int k) const { return moments.at(k); }
};

inline constexpr double kHermiteZeroThreshold = 1e-8;

// Fails with kFailedPrecondition when no usable k2 in {2, 3} or k3 in {3, 4}
// exists.
absl::StatusOr<HermiteCoefficients> HermiteMoments(
    const ActivationSpec& activation, int k_max = 4, int quad_nodes = 128);

}  // namespace gradleak

#endif  // GRADLEAK_ACTIVATION_H_
