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

#include "gradleak/symmetric_tensor.h"

#include <algorithm>
#include <cmath>

namespace gradleak {

double Tensor3::Contract3(const Eigen::VectorXd& u) const {
  return u.dot(Contract2(u));
}

Eigen::VectorXd Tensor3::Contract2(const Eigen::VectorXd& u) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n_);
  for (int i = 0; i < n_; ++i) {
    double acc = 0.0;
    for (int j = 0; j < n_; ++j) {
      double inner = 0.0;
      for (int k = 0; k < n_; ++k) inner += (*this)(i, j, k) * u[k];
      acc += inner * u[j];
    }
    out[i] = acc;
  }
  return out;
}

void Tensor3::AddRankOne(double weight, const Eigen::VectorXd& u) {
  for (int i = 0; i < n_; ++i) {
    for (int j = 0; j < n_; ++j) {
      const double wij = weight * u[i] * u[j];
      for (int k = 0; k < n_; ++k) (*this)(i, j, k) += wij * u[k];
    }
  }
}

Tensor3& Tensor3::operator*=(double c) {
  for (double& x : data_) x *= c;
  return *this;
}

Tensor3& Tensor3::operator+=(const Tensor3& other) {
  for (size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

double Tensor3::FrobeniusNorm() const {
  double sum = 0.0;
  for (double x : data_) sum += x * x;
  return std::sqrt(sum);
}

double Tensor3::MaxAbs() const {
  double best = 0.0;
  for (double x : data_) best = std::max(best, std::abs(x));
  return best;
}

double Tensor3::MaxAsymmetry() const {
  double worst = 0.0;
  for (int i = 0; i < n_; ++i) {
    for (int j = 0; j < n_; ++j) {
      for (int k = 0; k < n_; ++k) {
        const double t = (*this)(i, j, k);
        for (double other : {(*this)(i, k, j), (*this)(j, i, k),
                             (*this)(j, k, i), (*this)(k, i, j),
                             (*this)(k, j, i)}) {
          worst = std::max(worst, std::abs(t - other));
        }
      }
    }
  }
  return worst;
}

}  // namespace gradleak
