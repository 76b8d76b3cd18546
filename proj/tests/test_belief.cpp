// Copyright 2026 The bddp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "bddp/layout.hpp"

#include <random>

#include <gtest/gtest.h>

#include "bddp/gaussian.hpp"

namespace bddp {
namespace {

TEST(GaussianBelief, InvariantChecksCatchViolations) {
  GaussianBelief ok(Vector::Zero(2), Matrix::Identity(2, 2));
  EXPECT_NO_THROW(check_gaussian(ok));

  GaussianBelief shape(Vector::Zero(2), Matrix::Identity(3, 3));
  EXPECT_THROW(check_gaussian(shape), ContractError);

  Matrix asym(2, 2);
  asym << 1.0, 0.5, -0.5, 1.0;
  EXPECT_THROW(check_gaussian(GaussianBelief(Vector::Zero(2), asym)), NumericalError);

  Matrix indef(2, 2);
  indef << 1.0, 0.0, 0.0, -0.5;
  EXPECT_THROW(check_gaussian(GaussianBelief(Vector::Zero(2), indef)), NumericalError);

  // Tiny negative eigenvalues inside the tolerance band are accepted.
  Matrix nearly(2, 2);
  nearly << 1.0, 0.0, 0.0, -1e-12;
  EXPECT_NO_THROW(check_gaussian(GaussianBelief(Vector::Zero(2), nearly)));
}

TEST(ConstrainedBelief, WeightRangeEnforced) {
  ConstrainedBelief cb;
  cb.free = GaussianBelief(Vector::Zero(2), Matrix::Identity(2, 2));
  cb.surface = GaussianBelief(Vector::Zero(2), Matrix::Zero(2, 2));
  cb.weight = 0.5;
  EXPECT_NO_THROW(check_constrained(cb));
  cb.weight = 1.2;
  EXPECT_THROW(check_constrained(cb), ContractError);
}

TEST(Layout, OneDimensionalFullRoundTrip) {
  const BeliefLayout l = BeliefLayout::full(1);
  GaussianBelief b(Vector::Zero(1), Matrix::Identity(1, 1));
  const Vector v = vectorize(b, l);
  ASSERT_EQ(v.size(), 2);
  EXPECT_EQ(v[0], 0.0);
  EXPECT_EQ(v[1], 1.0);
  const GaussianBelief back = devectorize_gaussian(v, l);
  EXPECT_EQ(back.mean[0], 0.0);
  EXPECT_EQ(back.cov(0, 0), 1.0);
}

TEST(Layout, DiagonalEncodingOrder) {
  const BeliefLayout l = BeliefLayout::diagonal(2);
  Vector mean(2);
  mean << 0.5, -1.0;
  Matrix cov = Matrix::Zero(2, 2);
  cov(0, 0) = 4.0;
  cov(1, 1) = 9.0;
  const Vector v = vectorize(GaussianBelief(mean, cov), l);
  ASSERT_EQ(v.size(), 4);
  EXPECT_EQ(v[0], 0.5);
  EXPECT_EQ(v[1], -1.0);
  EXPECT_EQ(v[2], 4.0);
  EXPECT_EQ(v[3], 9.0);
}

TEST(Layout, NegativeDiagonalVarianceClampsToZero) {
  const BeliefLayout l = BeliefLayout::diagonal(1);
  Vector v(2);
  v << 0.0, -1e-15;
  const GaussianBelief b = devectorize_gaussian(v, l);
  EXPECT_EQ(b.cov(0, 0), 0.0);
}

TEST(Layout, FullRoundTripOnRandomBeliefs) {
  std::mt19937_64 rng(13);
  std::normal_distribution<double> dist;
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 1 + trial % 5;
    Matrix m(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) m(i, j) = dist(rng);
    const Matrix cov = symmetrized(m * m.transpose());
    const GaussianBelief b(Vector::Random(n), cov);
    const BeliefLayout l = BeliefLayout::full(n);
    const Vector v = vectorize(b, l);
    ASSERT_EQ(v.size(), n + n * (n + 1) / 2);
    const GaussianBelief back = devectorize_gaussian(v, l);
    const double scale = 1.0 + cov.cwiseAbs().maxCoeff();
    EXPECT_LT((back.mean - b.mean).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((back.cov - b.cov).cwiseAbs().maxCoeff() / scale, 1e-12);
    // Vector-level inverse as well.
    EXPECT_LT((vectorize(back, l) - v).cwiseAbs().maxCoeff() / scale, 1e-12);
  }
}

TEST(Layout, ConstrainedVectorHoldsTwoBlocksAndWeight) {
  const BeliefLayout l = BeliefLayout::full(2, /*constrained=*/true);
  EXPECT_EQ(l.dim(), 11);  // 2 * (2 means + 3 cov slots) + weight
  ConstrainedBelief cb;
  cb.free = GaussianBelief(Vector::Ones(2), Matrix::Identity(2, 2));
  cb.surface = GaussianBelief(Vector::Zero(2), Matrix::Zero(2, 2));
  cb.weight = 0.75;
  const Vector v = vectorize(cb, l);
  EXPECT_EQ(v[10], 0.75);
  const ConstrainedBelief back = devectorize_constrained(v, l);
  EXPECT_EQ(back.weight, 0.75);
  EXPECT_LT((back.free.mean - cb.free.mean).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LT((back.surface.cov - cb.surface.cov).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Layout, WeightPerturbationsClampToUnitInterval) {
  const BeliefLayout l = BeliefLayout::full(1, /*constrained=*/true);
  Vector v = Vector::Zero(l.dim());
  v[1] = 1.0;  // free variance
  v[l.dim() - 1] = 1.0 + 1e-9;
  EXPECT_EQ(devectorize_constrained(v, l).weight, 1.0);
  v[l.dim() - 1] = -1e-9;
  EXPECT_EQ(devectorize_constrained(v, l).weight, 0.0);
}

TEST(Layout, FullDecodeRepairsIndefinitePerturbations) {
  const BeliefLayout l = BeliefLayout::full(2);
  Vector v(5);
  // Off-diagonal exceeding the diagonal: indefinite before repair.
  v << 0.0, 0.0, 1.0, 1.5, 1.0;
  const GaussianBelief b = devectorize_gaussian(v, l);
  EXPECT_NO_THROW(check_gaussian(b));
  Eigen::SelfAdjointEigenSolver<Matrix> eig(b.cov);
  EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-14);
}

TEST(Layout, GroupedDiagonalSharesAndAveragesVariance) {
  // Two state pairs share one slot each; index 4 is in no group, so its
  // variance is pinned at zero.
  const BeliefLayout l = BeliefLayout::grouped_diagonal(5, {{0, 1}, {2, 3}});
  EXPECT_EQ(l.cov_slots(), 2);
  EXPECT_EQ(l.dim(), 7);

  Matrix cov = Matrix::Zero(5, 5);
  cov(0, 0) = 1.0;
  cov(1, 1) = 3.0;  // group average 2.0
  cov(2, 2) = 5.0;
  cov(3, 3) = 5.0;
  cov(4, 4) = 7.0;  // dropped by the layout
  const Vector v = vectorize(GaussianBelief(Vector::Zero(5), cov), l);
  EXPECT_EQ(v[5], 2.0);
  EXPECT_EQ(v[6], 5.0);
  const GaussianBelief back = devectorize_gaussian(v, l);
  EXPECT_EQ(back.cov(0, 0), 2.0);
  EXPECT_EQ(back.cov(1, 1), 2.0);
  EXPECT_EQ(back.cov(4, 4), 0.0);
}

TEST(Layout, HandEyeShapeIsTwentyThree) {
  const BeliefLayout l = BeliefLayout::grouped_diagonal(
      16, {{2, 3}, {4, 5}, {6, 7}, {8, 9}, {10, 11}, {12, 13}, {14, 15}});
  EXPECT_EQ(l.dim(), 23);
}

TEST(Layout, MismatchesThrow) {
  const BeliefLayout plain = BeliefLayout::full(2);
  const BeliefLayout constrained = BeliefLayout::full(2, true);
  const GaussianBelief g(Vector::Zero(2), Matrix::Identity(2, 2));
  EXPECT_THROW(vectorize(g, constrained), ContractError);
  EXPECT_THROW(devectorize(Vector::Zero(3), plain), ContractError);
  EXPECT_THROW(BeliefLayout::grouped_diagonal(3, {{0, 1}, {1, 2}}), ContractError);
  EXPECT_THROW(BeliefLayout::grouped_diagonal(3, {{0, 5}}), ContractError);
}

}  // namespace
}  // namespace bddp
