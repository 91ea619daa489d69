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

#include "gradleak/activation.h"

#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "absl/status/status.h"
#include "absl/strings/str_cat.h"

namespace gradleak {
namespace {

double Sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

ActivationSpec ActivationSpec::Softplus() {
  return ActivationSpec(ActivationKind::kSoftplus, "softplus");
}

ActivationSpec ActivationSpec::Exp() {
  return ActivationSpec(ActivationKind::kExp, "exp");
}

ActivationSpec ActivationSpec::Tanh() {
  return ActivationSpec(ActivationKind::kTanh, "tanh");
}

ActivationSpec ActivationSpec::CubicPoly(double c0, double c1, double c2,
                                         double c3) {
  ActivationSpec spec(ActivationKind::kCubicPoly, "cubic-poly");
  spec.coeffs_[0] = c0;
  spec.coeffs_[1] = c1;
  spec.coeffs_[2] = c2;
  spec.coeffs_[3] = c3;
  return spec;
}

ActivationSpec ActivationSpec::Custom(std::string name, ScalarFn value,
                                      ScalarFn first_derivative,
                                      ScalarFn second_derivative) {
  ActivationSpec spec(ActivationKind::kCustom, std::move(name));
  spec.value_ = std::move(value);
  spec.first_ = std::move(first_derivative);
  spec.second_ = std::move(second_derivative);
  return spec;
}

absl::StatusOr<ActivationSpec> ActivationSpec::FromName(
    const std::string& name) {
  if (name == "softplus") return Softplus();
  if (name == "exp") return Exp();
  if (name == "tanh") return Tanh();
  return absl::InvalidArgumentError(
      absl::StrCat("unknown activation '", name,
                   "' (expected softplus, exp or tanh)"));
}

bool ActivationSpec::has_second_derivative() const {
  return kind_ != ActivationKind::kCustom || static_cast<bool>(second_);
}

double ActivationSpec::Value(double z) const {
  switch (kind_) {
    case ActivationKind::kSoftplus:
      return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
    case ActivationKind::kExp:
      return std::exp(z);
    case ActivationKind::kTanh:
      return std::tanh(z);
    case ActivationKind::kCubicPoly:
      return coeffs_[0] + z * (coeffs_[1] + z * (coeffs_[2] + z * coeffs_[3]));
    case ActivationKind::kCustom:
      return value_(z);
  }
  return std::numeric_limits<double>::quiet_NaN();
}

double ActivationSpec::FirstDerivative(double z) const {
  switch (kind_) {
    case ActivationKind::kSoftplus:
      return Sigmoid(z);
    case ActivationKind::kExp:
      return std::exp(z);
    case ActivationKind::kTanh: {
      const double t = std::tanh(z);
      return 1.0 - t * t;
    }
    case ActivationKind::kCubicPoly:
      return coeffs_[1] + z * (2.0 * coeffs_[2] + z * 3.0 * coeffs_[3]);
    case ActivationKind::kCustom:
      return first_(z);
  }
  return std::numeric_limits<double>::quiet_NaN();
}

double ActivationSpec::SecondDerivative(double z) const {
  switch (kind_) {
    case ActivationKind::kSoftplus: {
      const double s = Sigmoid(z);
      return s * (1.0 - s);
    }
    case ActivationKind::kExp:
      return std::exp(z);
    case ActivationKind::kTanh: {
      const double t = std::tanh(z);
      return -2.0 * t * (1.0 - t * t);
    }
    case ActivationKind::kCubicPoly:
      return 2.0 * coeffs_[2] + 6.0 * coeffs_[3] * z;
    case ActivationKind::kCustom:
      return second_ ? second_(z) : std::numeric_limits<double>::quiet_NaN();
  }
  return std::numeric_limits<double>::quiet_NaN();
}

GaussHermiteRule MakeGaussHermiteRule(int num_nodes) {
  // Golub-Welsch on the Jacobi matrix of the orthonormal probabilists'
  // Hermite recurrence.
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(num_nodes, num_nodes);
  for (int k = 1; k < num_nodes; ++k) {
    jacobi(k - 1, k) = jacobi(k, k - 1) = std::sqrt(static_cast<double>(k));
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(jacobi);
  GaussHermiteRule rule;
  rule.nodes.resize(num_nodes);
  rule.weights.resize(num_nodes);
  for (int i = 0; i < num_nodes; ++i) {
    rule.nodes[i] = solver.eigenvalues()[i];
    const double v0 = solver.eigenvectors()(0, i);
    rule.weights[i] = v0 * v0;
  }
  // The exact rule is symmetric about zero; enforce it so odd moments vanish
  // to rounding.
  for (int i = 0; i < num_nodes / 2; ++i) {
    const int j = num_nodes - 1 - i;
    const double x = 0.5 * (rule.nodes[j] - rule.nodes[i]);
    const double w = 0.5 * (rule.weights[i] + rule.weights[j]);
    rule.nodes[i] = -x;
    rule.nodes[j] = x;
    rule.weights[i] = rule.weights[j] = w;
  }
  if (num_nodes % 2 == 1) rule.nodes[num_nodes / 2] = 0.0;
  double total = 0.0;
  for (double w : rule.weights) total += w;
  for (double& w : rule.weights) w /= total;
  return rule;
}

double HermitePolynomial(int k, double z) {
  if (k == 0) return 1.0;
  double prev = 1.0;
  double cur = z;
  for (int n = 1; n < k; ++n) {
    const double next = z * cur - n * prev;
    prev = cur;
    cur = next;
  }
  return cur;
}

absl::StatusOr<HermiteCoefficients> HermiteMoments(
    const ActivationSpec& activation, int k_max, int quad_nodes) {
  if (k_max < 4) {
    return absl::InvalidArgumentError("HermiteMoments: k_max must be >= 4");
  }
  if (quad_nodes < 64) {
    return absl::InvalidArgumentError(
        "HermiteMoments: quad_nodes must be >= 64");
  }
  const GaussHermiteRule rule = MakeGaussHermiteRule(quad_nodes);
  HermiteCoefficients out;
  out.moments.assign(k_max + 1, 0.0);
  for (size_t i = 0; i < rule.nodes.size(); ++i) {
    const double z = rule.nodes[i];
    const double fw = rule.weights[i] * activation.Value(z);
    for (int k = 0; k <= k_max; ++k) {
      out.moments[k] += fw * HermitePolynomial(k, z);
    }
  }
  auto first_nonzero = [&](int from) {
    for (int k = from; k <= k_max; ++k) {
      if (std::abs(out.moments[k]) > kHermiteZeroThreshold) return k;
    }
    return -1;
  };
  out.k2 = first_nonzero(2);
  out.k3 = first_nonzero(3);
  if (out.k2 < 0 || out.k3 < 0) {
    return absl::FailedPreconditionError(absl::StrCat(
        "HermiteMoments: activation '", activation.name(),
        "' has no nonzero Gaussian derivative moment of order 2..", k_max));
  }
  if (out.k2 > 3 || out.k3 > 4) {
    return absl::FailedPreconditionError(absl::StrCat(
        "HermiteMoments: activation '", activation.name(), "' has k2=", out.k2,
        ", k3=", out.k3, "; the attack needs k2 <= 3 and k3 <= 4"));
  }
  out.nu = std::abs(out.moments[out.k2]);
  out.lambda = std::abs(out.moments[out.k3]);
  return out;
}

}  // namespace gradleak
