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

#include "gradleak/network.h"

#include <cmath>

#include "absl/status/status.h"
#include "absl/strings/str_cat.h"
#include "gradleak/random.h"

namespace gradleak {
namespace {

absl::Status CheckShapes(const NetworkParams& params, const DataBatch& batch) {
  if (params.W.rows() != params.a.size()) {
    return absl::InvalidArgumentError("NetworkParams: W must have m rows");
  }
  if (batch.d() != params.d()) {
    return absl::InvalidArgumentError(
        absl::StrCat("dimension mismatch: batch d=", batch.d(),
                     ", network d=", params.d()));
  }
  if (batch.y.size() != batch.B()) {
    return absl::InvalidArgumentError("DataBatch: one label per sample");
  }
  return absl::OkStatus();
}

// z(j, i) = w_j . x_i, accumulated over ascending k.
Eigen::MatrixXd PreActivations(const NetworkParams& params,
                               const Eigen::MatrixXd& X) {
  const int m = params.m();
  const int d = params.d();
  const int B = static_cast<int>(X.cols());
  Eigen::MatrixXd z(m, B);
  for (int i = 0; i < B; ++i) {
    const double* x = X.col(i).data();
    for (int j = 0; j < m; ++j) {
      const double* w = params.W.row(j).data();
      double acc = 0.0;
      for (int k = 0; k < d; ++k) acc += w[k] * x[k];
      z(j, i) = acc;
    }
  }
  return z;
}

// Per-sample network outputs, ascending-j sums.
Eigen::VectorXd Outputs(const NetworkParams& params, const Eigen::MatrixXd& z) {
  Eigen::VectorXd f(z.cols());
  for (int i = 0; i < z.cols(); ++i) {
    double acc = 0.0;
    for (int j = 0; j < params.m(); ++j) {
      acc += params.a[j] * params.activation.Value(z(j, i));
    }
    f[i] = acc;
  }
  return f;
}

// Activation values and derivatives at every pre-activation.
struct ActivationTable {
  Eigen::MatrixXd s0, s1, s2;
};

ActivationTable Tabulate(const ActivationSpec& act, const Eigen::MatrixXd& z,
                         bool second) {
  ActivationTable t;
  t.s0.resize(z.rows(), z.cols());
  t.s1.resize(z.rows(), z.cols());
  if (second) t.s2.resize(z.rows(), z.cols());
  if (act.kind() == ActivationKind::kSoftplus) {
    // Same arithmetic as ActivationSpec, sharing one exp per entry.
    for (Eigen::Index c = 0; c < z.cols(); ++c) {
      for (Eigen::Index r = 0; r < z.rows(); ++r) {
        const double x = z(r, c);
        const double e = std::exp(-std::abs(x));
        t.s0(r, c) = x > 0 ? x + std::log1p(e) : std::log1p(e);
        const double s = x >= 0 ? 1.0 / (1.0 + e) : e / (1.0 + e);
        t.s1(r, c) = s;
        if (second) t.s2(r, c) = s * (1.0 - s);
      }
    }
    return t;
  }
  for (Eigen::Index c = 0; c < z.cols(); ++c) {
    for (Eigen::Index r = 0; r < z.rows(); ++r) {
      t.s0(r, c) = act.Value(z(r, c));
      t.s1(r, c) = act.FirstDerivative(z(r, c));
      if (second) t.s2(r, c) = act.SecondDerivative(z(r, c));
    }
  }
  return t;
}

Eigen::VectorXd OutputsFromTable(const NetworkParams& params,
                                 const ActivationTable& t) {
  Eigen::VectorXd f(t.s0.cols());
  for (Eigen::Index i = 0; i < t.s0.cols(); ++i) {
    double acc = 0.0;
    for (int j = 0; j < params.m(); ++j) acc += params.a[j] * t.s0(j, i);
    f[i] = acc;
  }
  return f;
}

// h_i = grad_x f(x_i) = sum_j a_j sigma'(w_j . x_i) w_j, one column per i.
Eigen::MatrixXd InputGradients(const NetworkParams& params,
                               const ActivationTable& t) {
  const Eigen::MatrixXd coeff = t.s1.array().colwise() * params.a.array();
  return params.W.transpose() * coeff;
}

absl::Status RequireSecondDerivative(const ActivationSpec& act) {
  if (!act.has_second_derivative()) {
    return absl::UnimplementedError(absl::StrCat(
        "unsupported activation '", act.name(),
        "': input Jacobian needs an analytic second derivative"));
  }
  return absl::OkStatus();
}

}  // namespace

absl::StatusOr<DataBatch> DataBatch::Create(Eigen::MatrixXd X,
                                            Eigen::VectorXd y) {
  if (X.cols() < 1 || X.rows() < 1) {
    return absl::InvalidArgumentError("DataBatch: empty X");
  }
  if (y.size() != X.cols()) {
    return absl::InvalidArgumentError("DataBatch: one label per column of X");
  }
  for (Eigen::Index i = 0; i < X.cols(); ++i) {
    if (std::abs(X.col(i).norm() - 1.0) > kUnitNormTolerance) {
      return absl::InvalidArgumentError(
          absl::StrCat("DataBatch: sample ", i, " is not unit norm"));
    }
  }
  return DataBatch{std::move(X), std::move(y)};
}

absl::StatusOr<NetworkParams> SampleParams(int d, int m, uint64_t seed,
                                           const ActivationSpec& activation) {
  if (d < 1 || m < 1) {
    return absl::InvalidArgumentError(
        absl::StrCat("SampleParams: need d >= 1 and m >= 1, got d=", d,
                     ", m=", m));
  }
  Rng rng(seed);
  NetworkParams params;
  params.activation = activation;
  params.a = SampleGaussianVector(m, 1.0 / m, rng);
  params.W.resize(m, d);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int j = 0; j < m; ++j) {
    for (int k = 0; k < d; ++k) params.W(j, k) = normal(rng);
  }
  return params;
}

DataBatch SampleBatch(int d, int batch_size, uint64_t seed) {
  Rng rng(seed);
  DataBatch batch;
  batch.X.resize(d, batch_size);
  batch.y.resize(batch_size);
  std::bernoulli_distribution coin(0.5);
  for (int i = 0; i < batch_size; ++i) {
    batch.X.col(i) = SampleUnitVector(d, rng);
    batch.y[i] = coin(rng) ? 1.0 : -1.0;
  }
  return batch;
}

double MinSingularValue(const DataBatch& batch) {
  if (batch.B() > batch.d()) return 0.0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(batch.X);
  return svd.singularValues()[batch.B() - 1];
}

absl::StatusOr<double> Forward(const NetworkParams& params,
                               const Eigen::VectorXd& x) {
  if (x.size() != params.d()) {
    return absl::InvalidArgumentError(
        absl::StrCat("Forward: dim(x)=", x.size(), ", expected ", params.d()));
  }
  return Outputs(params, PreActivations(params, x))[0];
}

absl::StatusOr<double> SquareLoss(const NetworkParams& params,
                                  const DataBatch& batch) {
  if (absl::Status s = CheckShapes(params, batch); !s.ok()) return s;
  const Eigen::VectorXd f = Outputs(params, PreActivations(params, batch.X));
  return (batch.y - f).squaredNorm();
}

absl::StatusOr<GradientObservation> Gradient(const NetworkParams& params,
                                             const DataBatch& batch) {
  if (absl::Status s = CheckShapes(params, batch); !s.ok()) return s;
  const Eigen::MatrixXd z = PreActivations(params, batch.X);
  const ActivationTable t = Tabulate(params.activation, z, false);
  const Eigen::VectorXd r = 2.0 * (OutputsFromTable(params, t) - batch.y);

  GradientObservation obs;
  obs.g_a = t.s0 * r;
  // Row j of g_W is a_j * sum_i r_i sigma'(z_ji) x_i.
  Eigen::MatrixXd coeff = t.s1 * r.asDiagonal();
  coeff.array().colwise() *= params.a.array();
  obs.g_W = coeff * batch.X.transpose();
  return obs;
}

absl::StatusOr<Eigen::MatrixXd> InputJacobian(const NetworkParams& params,
                                              const DataBatch& batch) {
  if (absl::Status s = CheckShapes(params, batch); !s.ok()) return s;
  if (absl::Status s = RequireSecondDerivative(params.activation); !s.ok()) {
    return s;
  }
  const int m = params.m();
  const int d = params.d();
  const int B = batch.B();
  const Eigen::MatrixXd z = PreActivations(params, batch.X);
  const ActivationTable t = Tabulate(params.activation, z, true);
  const Eigen::VectorXd r = 2.0 * (OutputsFromTable(params, t) - batch.y);
  const Eigen::MatrixXd h = InputGradients(params, t);

  Eigen::MatrixXd J(static_cast<Eigen::Index>(B) * d,
                    static_cast<Eigen::Index>(m) * (d + 1));
  for (int i = 0; i < B; ++i) {
    const Eigen::Index row = static_cast<Eigen::Index>(i) * d;
    const Eigen::VectorXd x = batch.X.col(i);
    const Eigen::VectorXd hi = h.col(i);
    for (int j = 0; j < m; ++j) {
      const Eigen::VectorXd w = params.W.row(j).transpose();
      const double s0 = t.s0(j, i);
      const double s1 = t.s1(j, i);
      const double s2 = t.s2(j, i);
      // d/dx_i [r_i sigma(w_j . x_i)]
      J.block(row, j, d, 1) = 2.0 * s0 * hi + r[i] * s1 * w;
      // d/dx_i [r_i a_j sigma'(w_j . x_i) x_ik] for each k
      const double aj = params.a[j];
      const Eigen::VectorXd base = 2.0 * aj * s1 * hi + r[i] * aj * s2 * w;
      const Eigen::Index col = WeightIndex(m, d, j, 0);
      for (int k = 0; k < d; ++k) {
        auto c = J.col(col + k).segment(row, d);
        c = x[k] * base;
        c(k) += r[i] * aj * s1;
      }
    }
  }
  return J;
}

absl::StatusOr<Eigen::MatrixXd> InputJacobianProduct(
    const NetworkParams& params, const DataBatch& batch,
    const Eigen::VectorXd& v) {
  if (absl::Status s = CheckShapes(params, batch); !s.ok()) return s;
  if (absl::Status s = RequireSecondDerivative(params.activation); !s.ok()) {
    return s;
  }
  const int m = params.m();
  const int d = params.d();
  if (v.size() != params.num_parameters()) {
    return absl::InvalidArgumentError(
        absl::StrCat("InputJacobianProduct: |v|=", v.size(), ", expected ",
                     params.num_parameters()));
  }
  const Eigen::MatrixXd z = PreActivations(params, batch.X);
  const ActivationTable t = Tabulate(params.activation, z, true);
  const Eigen::VectorXd r = 2.0 * (OutputsFromTable(params, t) - batch.y);
  const Eigen::MatrixXd h = InputGradients(params, t);
  const Eigen::Map<const Eigen::VectorXd> va(v.data(), m);
  const Eigen::Map<const RowMatrixXd> vw(v.data() + m, m, d);
  // (V_j . x_i) for all j, i.
  const Eigen::MatrixXd vx = vw * batch.X;

  Eigen::MatrixXd out(d, batch.B());
  for (int i = 0; i < batch.B(); ++i) {
    const Eigen::ArrayXd s0 = t.s0.col(i).array();
    const Eigen::ArrayXd s1 = t.s1.col(i).array();
    const Eigen::ArrayXd s2 = t.s2.col(i).array();
    const Eigen::ArrayXd a = params.a.array();
    const Eigen::ArrayXd vxi = vx.col(i).array();
    const double along_h = (va.array() * s0 + a * s1 * vxi).sum();
    const Eigen::VectorXd w_coeff = va.array() * s1 + a * s2 * vxi;
    const Eigen::VectorXd v_coeff = a * s1;
    out.col(i) = 2.0 * along_h * h.col(i) +
                 r[i] * (params.W.transpose() * w_coeff +
                         vw.transpose() * v_coeff);
  }
  return out;
}

}  // namespace gradleak
