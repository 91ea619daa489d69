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

#ifndef GRADLEAK_SYMMETRIC_TENSOR_H_
#define GRADLEAK_SYMMETRIC_TENSOR_H_

#include <vector>

#include <Eigen/Dense>

namespace gradleak {

// Dense n x n x n tensor of order three. Nothing enforces symmetry; the
// builders in this project produce symmetric tensors and MaxAsymmetry()
// measures how far from symmetric a tensor is.
class Tensor3 {
 public:
  Tensor3() = default;
  explicit Tensor3(int n) : n_(n), data_(static_cast<size_t>(n) * n * n, 0.0) {}

  int dim() const { return n_; }

  double& operator()(int i, int j, int k) { return data_[Index(i, j, k)]; }
  double operator()(int i, int j, int k) const {
    return data_[Index(i, j, k)];
  }

  const std::vector<double>& data() const { return data_; }

  // T(u, u, u).
  double Contract3(const Eigen::VectorXd& u) const;
  // T(I, u, u), contracting the last two indices.
  Eigen::VectorXd Contract2(const Eigen::VectorXd& u) const;

  // this += weight * u (x) u (x) u.
  void AddRankOne(double weight, const Eigen::VectorXd& u);

  Tensor3& operator*=(double c);
  Tensor3& operator+=(const Tensor3& other);

  double FrobeniusNorm() const;
  double MaxAbs() const;
  // Largest |T[i,j,k] - T[pi(i,j,k)]| over the five non-trivial index
  // permutations.
  double MaxAsymmetry() const;

 private:
  size_t Index(int i, int j, int k) const {
    return (static_cast<size_t>(i) * n_ + j) * n_ + k;
  }

  int n_ = 0;
  std::vector<double> data_;
};

}  // namespace gradleak

#endif  // GRADLEAK_SYMMETRIC_TENSOR_H_
