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

#include "gradleak/tensor_attack.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "gtest/gtest.h"
#include "gradleak/defenses.h"
#include "gradleak/metric.h"
#include "gradleak/network.h"
#include "gradleak/random.h"
#include "test_util.h"

namespace gradleak {
namespace {

using ::gradleak::testing::LogLogSlope;
using ::gradleak::testing::Median;

HermiteCoefficients SoftplusHermite() {
  return *HermiteMoments(ActivationSpec::Softplus());
}

// Angle between two lines.
double LineAngle(const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
  const double c = std::abs(u.normalized().dot(v.normalized()));
  return std::acos(std::min(1.0, c));
}

Eigen::MatrixXd SpanBasis(const Eigen::MatrixXd& X) {
  return X.householderQr().householderQ() *
         Eigen::MatrixXd::Identity(X.rows(), X.cols());
}

struct Trial {
  NetworkParams params;
  DataBatch batch;
  GradientObservation gradient;
};

Trial MakeTrial(int d, int m, int B, uint64_t seed,
                const ActivationSpec& act = ActivationSpec::Softplus()) {
  Trial t;
  t.params = *SampleParams(d, m, DeriveSeed(seed, SeedStream::kParams), act);
  t.batch = SampleBatch(d, B, DeriveSeed(seed, SeedStream::kData));
  t.gradient = *Gradient(t.params, t.batch);
  return t;
}

double AttackRmse(const GradientObservation& obs, const Trial& t, int B,
                  uint64_t seed) {
  TensorAttackConfig config;
  config.seed = seed;
  auto result = TensorAttack(obs, t.params, B, config);
  EXPECT_TRUE(result.ok()) << result.status();
  if (!result.ok()) return 1e9;
  EXPECT_TRUE(ScoreReconstruction(t.batch.X, true, *result).ok());
  return result->rmse;
}

// H_3(w)_{abc} and H_4(w)_{abcd} written out term by term.
double H3(const Eigen::VectorXd& w, int a, int b, int c) {
  auto dl = [](int i, int j) { return i == j ? 1.0 : 0.0; };
  return w[a] * w[b] * w[c] -
         (w[a] * dl(b, c) + w[b] * dl(a, c) + w[c] * dl(a, b));
}

double H4(const Eigen::VectorXd& w, int a, int b, int c, int e) {
  auto dl = [](int i, int j) { return i == j ? 1.0 : 0.0; };
  return w[a] * w[b] * w[c] * w[e] -
         (w[a] * w[b] * dl(c, e) + w[a] * w[c] * dl(b, e) +
          w[a] * w[e] * dl(b, c) + w[b] * w[c] * dl(a, e) +
          w[b] * w[e] * dl(a, c) + w[c] * w[e] * dl(a, b)) +
         (dl(a, b) * dl(c, e) + dl(a, c) * dl(b, e) + dl(a, e) * dl(b, c));
}

TEST(Tensor3Test, RankOneContractions) {
  Tensor3 T(3);
  const Eigen::Vector3d u(1, 2, 2);
  T.AddRankOne(0.5, u);
  EXPECT_DOUBLE_EQ(T(1, 2, 0), 0.5 * 2 * 2 * 1);
  EXPECT_NEAR(T.Contract3(u), 0.5 * std::pow(9.0, 3), 1e-10);
  EXPECT_LT((T.Contract2(u) - 0.5 * 81.0 * u).norm(), 1e-10);
  EXPECT_NEAR(T.FrobeniusNorm(), 0.5 * 27.0, 1e-12);
  EXPECT_EQ(T.MaxAsymmetry(), 0.0);
  T(0, 1, 2) += 1.0;
  EXPECT_EQ(T.MaxAsymmetry(), 1.0);
}

TEST(MomentMatrixTest, ZeroGradientGivesZero) {
  const Trial t = MakeTrial(5, 40, 2, 1);
  auto P = BuildMomentMatrix(Eigen::VectorXd::Zero(40), t.params.W,
                             SoftplusHermite(), Eigen::VectorXd::Unit(5, 0));
  ASSERT_TRUE(P.ok());
  EXPECT_EQ(P->norm(), 0.0);
}

TEST(MomentMatrixTest, SingleNeuron) {
  RowMatrixXd W = RowMatrixXd::Zero(1, 4);
  W(0, 0) = 1.0;
  auto P = BuildMomentMatrix(Eigen::VectorXd::Ones(1), W, SoftplusHermite(),
                             Eigen::VectorXd::Unit(4, 0));
  ASSERT_TRUE(P.ok());
  Eigen::MatrixXd want = -Eigen::MatrixXd::Identity(4, 4);
  want(0, 0) = 0.0;
  EXPECT_LT((*P - want).norm(), 1e-15);
}

TEST(MomentMatrixTest, ThirdOrderVariantMatchesTermwise) {
  HermiteCoefficients h = SoftplusHermite();
  h.k2 = 3;
  const int d = 4, m = 7;
  Rng rng(5);
  RowMatrixXd W(m, d);
  for (int j = 0; j < m; ++j) W.row(j) = SampleGaussianVector(d, 1.0, rng);
  const Eigen::VectorXd g = SampleGaussianVector(m, 1.0, rng);
  const Eigen::VectorXd probe = SampleUnitVector(d, rng);
  auto P = BuildMomentMatrix(g, W, h, probe);
  ASSERT_TRUE(P.ok());
  Eigen::MatrixXd want = Eigen::MatrixXd::Zero(d, d);
  for (int j = 0; j < m; ++j) {
    const Eigen::VectorXd w = W.row(j).transpose();
    for (int a = 0; a < d; ++a) {
      for (int b = 0; b < d; ++b) {
        for (int c = 0; c < d; ++c) want(a, b) += g[j] * H3(w, a, b, c) * probe[c];
      }
    }
  }
  want /= m;
  EXPECT_LT((*P - want).cwiseAbs().maxCoeff(), 1e-13);
  EXPECT_LT((*P - P->transpose()).norm(), 1e-10);
}

TEST(MomentMatrixTest, RejectsMismatchedShapes) {
  EXPECT_FALSE(BuildMomentMatrix(Eigen::VectorXd::Ones(3),
                                 RowMatrixXd::Ones(4, 2), SoftplusHermite(),
                                 Eigen::VectorXd::Unit(2, 0))
                   .ok());
  HermiteCoefficients bad = SoftplusHermite();
  bad.k2 = 5;
  EXPECT_EQ(BuildMomentMatrix(Eigen::VectorXd::Ones(3), RowMatrixXd::Ones(3, 2),
                              bad, Eigen::VectorXd::Unit(2, 0))
                .status()
                .code(),
            absl::StatusCode::kFailedPrecondition);
}

// P = sum_i r_i E[sigma''] x_i x_i^T is what P_hat estimates.
TEST(MomentMatrixTest, ConvergesAtMonteCarloRate) {
  const int d = 16, B = 2;
  const HermiteCoefficients h = SoftplusHermite();
  std::vector<double> ms, errors;
  for (int log_m : {11, 13, 15}) {
    const int m = 1 << log_m;
    std::vector<double> per_seed;
    for (uint64_t seed = 0; seed < 10; ++seed) {
      const Trial t = MakeTrial(d, m, B, seed);
      Eigen::MatrixXd P = Eigen::MatrixXd::Zero(d, d);
      for (int i = 0; i < B; ++i) {
        const double f = *Forward(t.params, t.batch.X.col(i));
        const double r = 2.0 * (f - t.batch.y[i]);
        P += r * h.SignedMoment(2) * t.batch.X.col(i) *
             t.batch.X.col(i).transpose();
      }
      auto P_hat = BuildMomentMatrix(t.gradient.g_a, t.params.W, h,
                                     Eigen::VectorXd::Unit(d, 0));
      ASSERT_TRUE(P_hat.ok());
      per_seed.push_back((*P_hat - P).jacobiSvd().singularValues()[0]);
    }
    ms.push_back(m);
    errors.push_back(Median(per_seed));
  }
  const double slope = LogLogSlope(ms, errors);
  EXPECT_NEAR(slope, -0.5, 0.15);
}

TEST(SubspaceTest, DiagonalSpectrum) {
  const Eigen::MatrixXd P = Eigen::Vector4d(5, 3, 0, 0).asDiagonal();
  auto S = EstimateSubspace(P, 2, 200, 3);
  ASSERT_TRUE(S.ok());
  const Eigen::MatrixXd want = Eigen::Vector4d(1, 1, 0, 0).asDiagonal();
  EXPECT_LT((S->V * S->V.transpose() - want).norm(), 1e-8);
  EXPECT_LT((S->V.transpose() * S->V -
             Eigen::MatrixXd::Identity(2, 2)).norm(), 1e-10);
  EXPECT_FALSE(S->ill_conditioned);
  EXPECT_DOUBLE_EQ(S->spectral_gap, 3.0);
}

TEST(SubspaceTest, IndefiniteRankOnePlusIdentity) {
  Rng rng(4);
  const Eigen::VectorXd x = SampleUnitVector(6, rng);
  // Eigenvalue +1 along x and -1 elsewhere, so only |.| separates x after
  // squaring. Use 2 x x^T - 0.5 I to make x dominant in magnitude.
  const Eigen::MatrixXd P =
      2.0 * x * x.transpose() - 0.5 * Eigen::MatrixXd::Identity(6, 6);
  auto S = EstimateSubspace(P, 1, 200, 9);
  ASSERT_TRUE(S.ok());
  EXPECT_LT(LineAngle(S->V.col(0), x), 1e-8);
}

TEST(SubspaceTest, FlagsMissingGap) {
  auto S = EstimateSubspace(Eigen::MatrixXd::Identity(4, 4), 2, 20, 1);
  ASSERT_TRUE(S.ok());
  EXPECT_TRUE(S->ill_conditioned);
  EXPECT_LT((S->V.transpose() * S->V -
             Eigen::MatrixXd::Identity(2, 2)).norm(), 1e-10);
}

TEST(SubspaceTest, BadArguments) {
  EXPECT_FALSE(EstimateSubspace(Eigen::MatrixXd::Identity(3, 3), 4, 10, 0).ok());
  EXPECT_FALSE(EstimateSubspace(Eigen::MatrixXd::Identity(3, 3), 0, 10, 0).ok());
  EXPECT_FALSE(EstimateSubspace(Eigen::MatrixXd::Identity(3, 3), 1, 0, 0).ok());
}

TEST(SubspaceTest, DeterministicInSeed) {
  const Eigen::MatrixXd P = Eigen::Vector4d(5, -3, 1, 0).asDiagonal();
  auto a = EstimateSubspace(P, 2, 30, 7);
  auto b = EstimateSubspace(P, 2, 30, 7);
  EXPECT_EQ(a->V, b->V);
}

TEST(SubspaceTest, AttackSubspaceCapturesData) {
  const int d = 16, B = 2, m = 1 << 15;
  for (uint64_t seed = 0; seed < 10; ++seed) {
    const Trial t = MakeTrial(d, m, B, seed);
    MomentEstimates moments;
    TensorAttackConfig config;
    config.seed = seed;
    ASSERT_TRUE(TensorAttack(t.gradient, t.params, B, config, &moments).ok());
    const Eigen::MatrixXd U = SpanBasis(t.batch.X);
    const Eigen::MatrixXd D =
        moments.V * moments.V.transpose() - U * U.transpose();
    EXPECT_LT(D.jacobiSvd().singularValues()[0], 0.25) << "seed " << seed;
    for (int i = 0; i < B; ++i) {
      EXPECT_GE((moments.V * moments.V.transpose() * t.batch.X.col(i)).norm(),
                0.9);
    }
    EXPECT_LT((moments.P_hat - moments.P_hat.transpose()).norm(), 1e-10);
    EXPECT_LT((moments.V.transpose() * moments.V -
               Eigen::MatrixXd::Identity(B, B)).norm(), 1e-10);
    EXPECT_LT(moments.T_proj.MaxAsymmetry(), 1e-10);
  }
}

TEST(ProjectedTensorTest, ZeroGradientGivesZero) {
  const Trial t = MakeTrial(6, 30, 2, 2);
  const Eigen::MatrixXd V = Eigen::MatrixXd::Identity(6, 2);
  auto T = BuildProjectedTensor(Eigen::VectorXd::Zero(30), t.params.W, V,
                                SoftplusHermite(), ProbeInSpan(V, 1));
  ASSERT_TRUE(T.ok());
  EXPECT_EQ(T->MaxAbs(), 0.0);
}

TEST(ProjectedTensorTest, FourthOrderMatchesTermwise) {
  const int d = 5, B = 3, m = 6;
  Rng rng(12);
  RowMatrixXd W(m, d);
  for (int j = 0; j < m; ++j) W.row(j) = SampleGaussianVector(d, 1.0, rng);
  const Eigen::VectorXd g = SampleGaussianVector(m, 1.0, rng);
  Eigen::MatrixXd raw(d, B);
  for (int c = 0; c < B; ++c) raw.col(c) = SampleGaussianVector(d, 1.0, rng);
  const Eigen::MatrixXd V = SpanBasis(raw);
  const Eigen::VectorXd probe = SampleUnitVector(d, rng);
  auto T = BuildProjectedTensor(g, W, V, SoftplusHermite(), probe);
  ASSERT_TRUE(T.ok());
  // Full d^4 tensor contracted with the probe, then projected on V.
  Tensor3 full(d);
  for (int j = 0; j < m; ++j) {
    const Eigen::VectorXd w = W.row(j).transpose();
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b)
        for (int c = 0; c < d; ++c)
          for (int e = 0; e < d; ++e)
            full(a, b, c) += g[j] * H4(w, a, b, c, e) * probe[e] / m;
  }
  double worst = 0.0;
  for (int a = 0; a < B; ++a) {
    for (int b = 0; b < B; ++b) {
      for (int c = 0; c < B; ++c) {
        double want = 0.0;
        for (int p = 0; p < d; ++p)
          for (int q = 0; q < d; ++q)
            for (int r = 0; r < d; ++r)
              want += full(p, q, r) * V(p, a) * V(q, b) * V(r, c);
        worst = std::max(worst, std::abs(want - (*T)(a, b, c)));
      }
    }
  }
  EXPECT_LT(worst, 1e-12);
  EXPECT_EQ(T->MaxAsymmetry(), 0.0);
}

TEST(ProjectedTensorTest, ThirdOrderMatchesTermwise) {
  HermiteCoefficients h = SoftplusHermite();
  h.k3 = 3;
  const int d = 4, B = 2, m = 5;
  Rng rng(13);
  RowMatrixXd W(m, d);
  for (int j = 0; j < m; ++j) W.row(j) = SampleGaussianVector(d, 1.0, rng);
  const Eigen::VectorXd g = SampleGaussianVector(m, 1.0, rng);
  Eigen::MatrixXd raw(d, B);
  for (int c = 0; c < B; ++c) raw.col(c) = SampleGaussianVector(d, 1.0, rng);
  const Eigen::MatrixXd V = SpanBasis(raw);
  auto T = BuildProjectedTensor(g, W, V, h, Eigen::VectorXd());
  ASSERT_TRUE(T.ok());
  double worst = 0.0;
  for (int a = 0; a < B; ++a) {
    for (int b = 0; b < B; ++b) {
      for (int c = 0; c < B; ++c) {
        double want = 0.0;
        for (int j = 0; j < m; ++j) {
          const Eigen::VectorXd w = W.row(j).transpose();
          for (int p = 0; p < d; ++p)
            for (int q = 0; q < d; ++q)
              for (int r = 0; r < d; ++r)
                want += g[j] * H3(w, p, q, r) * V(p, a) * V(q, b) * V(r, c);
        }
        worst = std::max(worst, std::abs(want / m - (*T)(a, b, c)));
      }
    }
  }
  EXPECT_LT(worst, 1e-12);
}

TEST(ProjectedTensorTest, ProbeOrthogonalToSpanIsRejected) {
  const Eigen::MatrixXd V = Eigen::MatrixXd::Identity(4, 2);
  auto T = BuildProjectedTensor(Eigen::VectorXd::Ones(3),
                                RowMatrixXd::Ones(3, 4), V, SoftplusHermite(),
                                Eigen::VectorXd::Unit(4, 3));
  EXPECT_EQ(T.status().code(), absl::StatusCode::kFailedPrecondition);
}

TEST(ProjectedTensorTest, ProbeInSpanResamples) {
  Eigen::MatrixXd V = Eigen::MatrixXd::Zero(4, 2);
  V(1, 0) = 1.0;
  V(2, 1) = 1.0;  // e_1 is orthogonal to span(V)
  const Eigen::VectorXd probe = ProbeInSpan(V, 3);
  EXPECT_NEAR(probe.norm(), 1.0, 1e-12);
  EXPECT_NEAR((V.transpose() * probe).norm(), 1.0, 1e-12);
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(4, 2);
  EXPECT_LT((ProbeInSpan(I, 3) - Eigen::VectorXd::Unit(4, 0)).norm(), 1e-15);
}

// E[sigma(w.x) H_p(w)] = E[sigma^(p)(z)] x^(x)p for unit x.
TEST(ProjectedTensorTest, SteinOracleFourthOrder) {
  const int d = 4, m = 1000000;
  Rng rng(21);
  const Eigen::VectorXd x = SampleUnitVector(d, rng);
  RowMatrixXd W(m, d);
  for (int j = 0; j < m; ++j) W.row(j) = SampleGaussianVector(d, 1.0, rng);
  const ActivationSpec act = ActivationSpec::Softplus();
  Eigen::VectorXd g(m);
  for (int j = 0; j < m; ++j) g[j] = act.Value(W.row(j).dot(x));
  const HermiteCoefficients h = SoftplusHermite();
  const Eigen::MatrixXd V = Eigen::MatrixXd::Identity(d, d);
  const Eigen::VectorXd probe = SampleUnitVector(d, rng);
  auto T = BuildProjectedTensor(g, W, V, h, probe);
  ASSERT_TRUE(T.ok());
  Tensor3 want(d);
  want.AddRankOne(h.SignedMoment(4) * x.dot(probe), x);
  double worst = 0.0;
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b)
      for (int c = 0; c < d; ++c)
        worst = std::max(worst, std::abs((*T)(a, b, c) - want(a, b, c)));
  EXPECT_LT(worst, 5e-2);
}

TEST(RemoveLowOrderTest, ResidualIsOrthogonalToFeatures) {
  const int d = 4, m = 300;
  Rng rng(30);
  RowMatrixXd W(m, d);
  for (int j = 0; j < m; ++j) W.row(j) = SampleGaussianVector(d, 1.0, rng);
  const Eigen::MatrixXd V = Eigen::MatrixXd::Identity(d, 2);
  // Pure low-order signal disappears entirely.
  Eigen::VectorXd g(m);
  for (int j = 0; j < m; ++j) {
    const double v0 = W(j, 0), v1 = W(j, 1);
    g[j] = 1.5 - W(j, 3) + (v0 * v0 - 1.0) + 0.3 * v0 * v1 * v1;
  }
  auto r = RemoveLowOrderComponents(g, W, &V, {2, 3});
  ASSERT_TRUE(r.ok());
  EXPECT_LT(r->norm(), 1e-10 * g.norm());
  // Degree-four content survives.
  Eigen::VectorXd q(m);
  for (int j = 0; j < m; ++j) q[j] = HermitePolynomial(4, W(j, 0));
  auto rq = RemoveLowOrderComponents(q, W, &V, {2, 3});
  ASSERT_TRUE(rq.ok());
  EXPECT_GT(rq->norm(), 0.5 * q.norm());
  EXPECT_FALSE(RemoveLowOrderComponents(Eigen::VectorXd::Ones(3),
                                        RowMatrixXd::Ones(3, 4), nullptr, {})
                   .ok());
}

TEST(DecompositionTest, ExactRankOne) {
  Tensor3 T(2);
  T.AddRankOne(2.0, Eigen::Vector2d(1, 0));
  auto dec = DecomposeTensor(T, 1, {}, 1);
  ASSERT_TRUE(dec.ok());
  ASSERT_EQ(dec->components.size(), 1u);
  EXPECT_NEAR(dec->components[0].lambda, 2.0, 1e-8);
  EXPECT_NEAR(std::abs(dec->components[0].u[0]), 1.0, 1e-8);
  EXPECT_FALSE(dec->partial);
}

TEST(DecompositionTest, OrthogonalPair) {
  const Eigen::Vector2d a = Eigen::Vector2d(1, 1).normalized();
  const Eigen::Vector2d b = Eigen::Vector2d(1, -1).normalized();
  Tensor3 T(2);
  T.AddRankOne(3.0, a);
  T.AddRankOne(1.0, b);
  for (bool refine : {false, true}) {
    DecompositionConfig config;
    config.refine = refine;
    auto dec = DecomposeTensor(T, 2, config, 5);
    ASSERT_TRUE(dec.ok());
    EXPECT_LT(LineAngle(dec->components[0].u, a), 1e-6);
    EXPECT_LT(LineAngle(dec->components[1].u, b), 1e-6);
    EXPECT_NEAR(dec->components[0].lambda, 3.0, 1e-8);
    EXPECT_NEAR(dec->components[1].lambda, 1.0, 1e-8);
  }
}

TEST(DecompositionTest, NoisyOrthogonalComponents) {
  const int n = 3;
  Tensor3 T(n);
  const Eigen::MatrixXd Q = Eigen::MatrixXd::Identity(n, n);
  for (int i = 0; i < n; ++i) T.AddRankOne(1.0 + i, Q.col(i));
  Rng rng(6);
  Tensor3 E(n);
  for (int a = 0; a < n; ++a)
    for (int b = a; b < n; ++b)
      for (int c = b; c < n; ++c) {
        const double v = SampleGaussianVector(1, 1.0, rng)[0];
        for (auto [p, q, r] : {std::tuple{a, b, c}, {a, c, b}, {b, a, c},
                               {b, c, a}, {c, a, b}, {c, b, a}}) {
          E(p, q, r) = v;
        }
      }
  E *= 0.01 / E.FrobeniusNorm();
  T += E;
  auto dec = DecomposeTensor(T, n, {}, 2);
  ASSERT_TRUE(dec.ok());
  for (int i = 0; i < n; ++i) {
    double best = 10.0;
    for (const TensorComponent& c : dec->components) {
      best = std::min(best, LineAngle(c.u, Q.col(i)));
    }
    EXPECT_LT(best, 0.1);
  }
}

TEST(DecompositionTest, RefinementRecoversNonOrthogonalComponents) {
  const Eigen::Vector3d a = Eigen::Vector3d(1, 0.4, 0).normalized();
  const Eigen::Vector3d b = Eigen::Vector3d(0.3, 1, 0.2).normalized();
  Tensor3 T(3);
  T.AddRankOne(1.0, a);
  T.AddRankOne(0.8, b);
  DecompositionConfig config;
  config.refine = true;
  auto dec = DecomposeTensor(T, 2, config, 3);
  ASSERT_TRUE(dec.ok());
  EXPECT_LT(dec->relative_residual, 1e-8);
  double err = std::min(
      LineAngle(dec->components[0].u, a) + LineAngle(dec->components[1].u, b),
      LineAngle(dec->components[0].u, b) + LineAngle(dec->components[1].u, a));
  EXPECT_LT(err, 1e-6);
}

TEST(DecompositionTest, RankAboveDimensionIsAnError) {
  EXPECT_EQ(DecomposeTensor(Tensor3(2), 3, {}, 0).status().code(),
            absl::StatusCode::kInvalidArgument);
}

TEST(TensorAttackTest, SingleSampleRecovery) {
  std::vector<double> rmse;
  for (uint64_t seed = 0; seed < 10; ++seed) {
    const Trial t = MakeTrial(8, 1 << 14, 1, seed);
    rmse.push_back(AttackRmse(t.gradient, t, 1, seed));
  }
  EXPECT_LT(Median(rmse), 0.15);
}

TEST(TensorAttackTest, OutputColumnsAreUnitNorm) {
  const Trial t = MakeTrial(10, 4096, 3, 4);
  auto result = TensorAttack(t.gradient, t.params, 3, {});
  ASSERT_TRUE(result.ok());
  for (int i = 0; i < 3; ++i) {
    EXPECT_NEAR(result->X_hat.col(i).norm(), 1.0, 1e-9);
  }
  EXPECT_EQ(result->weights.size(), 3);
}

TEST(TensorAttackTest, ClippingIsNeutral) {
  const Trial t = MakeTrial(16, 1 << 13, 2, 5);
  auto clipped = ApplyClip(t.gradient, t.gradient.Norm() / 5.0);
  ASSERT_TRUE(clipped.ok());
  auto plain = TensorAttack(t.gradient, t.params, 2, {});
  auto defended = TensorAttack(*clipped, t.params, 2, {});
  ASSERT_TRUE(plain.ok() && defended.ok());
  EXPECT_LT((plain->X_hat - defended->X_hat).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(TensorAttackTest, ScaleInvariance) {
  const Trial t = MakeTrial(12, 4096, 2, 6);
  auto base = TensorAttack(t.gradient, t.params, 2, {});
  ASSERT_TRUE(base.ok());
  for (double c : {1e-3, 0.7, 42.0}) {
    GradientObservation scaled = t.gradient;
    scaled.g_a *= c;
    scaled.g_W *= c;
    auto result = TensorAttack(scaled, t.params, 2, {});
    ASSERT_TRUE(result.ok());
    EXPECT_LT((result->X_hat - base->X_hat).cwiseAbs().maxCoeff(), 1e-9) << c;
  }
}

TEST(TensorAttackTest, PermutingTheBatchPermutesComponents) {
  const int d = 12, B = 3;
  const Trial t = MakeTrial(d, 1 << 13, B, 7);
  DataBatch permuted = t.batch;
  const std::vector<int> order = {2, 0, 1};
  for (int i = 0; i < B; ++i) {
    permuted.X.col(i) = t.batch.X.col(order[i]);
    permuted.y[i] = t.batch.y[order[i]];
  }
  auto g_perm = Gradient(t.params, permuted);
  ASSERT_TRUE(g_perm.ok());
  auto a = TensorAttack(t.gradient, t.params, B, {});
  auto b = TensorAttack(*g_perm, t.params, B, {});
  ASSERT_TRUE(a.ok() && b.ok());
  auto match = MinPermDistance(a->X_hat, b->X_hat, true);
  ASSERT_TRUE(match.ok());
  EXPECT_LT(match->rmse, 1e-6);
}

TEST(TensorAttackTest, HeavyPruningDegradesRecovery) {
  std::vector<double> base, pruned;
  for (uint64_t seed = 0; seed < 10; ++seed) {
    const Trial t = MakeTrial(8, 1 << 14, 1, seed);
    base.push_back(AttackRmse(t.gradient, t, 1, seed));
    auto p = ApplyPruneRatio(t.gradient, 0.99);
    ASSERT_TRUE(p.ok());
    pruned.push_back(AttackRmse(*p, t, 1, seed));
  }
  EXPECT_GE(Median(pruned), 2.0 * Median(base));
}

TEST(TensorAttackTest, ErrorGrowsWithBatchSize) {
  const int d = 16, m = 1 << 14;
  std::vector<double> medians;
  for (int B : {1, 2, 4}) {
    std::vector<double> rmse;
    for (uint64_t seed = 0; seed < 10; ++seed) {
      const Trial t = MakeTrial(d, m, B, seed);
      rmse.push_back(AttackRmse(t.gradient, t, B, seed));
    }
    medians.push_back(Median(rmse));
  }
  EXPECT_LE(medians[0], medians[1]);
  EXPECT_LE(medians[1], medians[2]);
}

TEST(TensorAttackTest, OtherActivations) {
  for (const ActivationSpec& act :
       {ActivationSpec::Exp(), ActivationSpec::Tanh()}) {
    const Trial t = MakeTrial(8, 1 << 13, 1, 3, act);
    auto result = TensorAttack(t.gradient, t.params, 1, {});
    ASSERT_TRUE(result.ok()) << act.name() << ": " << result.status();
    ASSERT_TRUE(ScoreReconstruction(t.batch.X, true, *result).ok());
    EXPECT_LT(result->rmse, 0.3) << act.name();
  }
}

TEST(TensorAttackTest, Errors) {
  const Trial t = MakeTrial(4, 64, 2, 8);
  EXPECT_FALSE(TensorAttack(t.gradient, t.params, 5, {}).ok());
  EXPECT_FALSE(TensorAttack(t.gradient, t.params, 0, {}).ok());
  GradientObservation zero = t.gradient;
  zero.g_a.setZero();
  auto status = TensorAttack(zero, t.params, 2, {}).status();
  EXPECT_EQ(status.code(), absl::StatusCode::kFailedPrecondition);
  NetworkParams linear = t.params;
  linear.activation = ActivationSpec::CubicPoly(0, 1, 0, 0);
  status = TensorAttack(t.gradient, linear, 2, {}).status();
  EXPECT_NE(status.message().find("hermite_moments"), std::string::npos);
}

}  // namespace
}  // namespace gradleak
