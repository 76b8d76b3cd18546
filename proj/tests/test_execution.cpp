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

#include "bddp/execution.hpp"

#include <cmath>

#include <gtest/gtest.h>

#include "bddp/belief_mdp.hpp"
#include "bddp/domains/lqg.hpp"
#include "bddp/domains/planar_nav.hpp"

namespace bddp {
namespace {

LinearPolicy one_step_policy(const Vector& xbar, const Vector& abar, const Matrix& gain) {
  return LinearPolicy{{xbar, xbar}, {abar}, {gain}};
}

TEST(PolicyAction, ZeroDeviationReturnsNominal) {
  Vector xbar(2), abar(1);
  xbar << 0.3, -1.2;
  abar << 0.7;
  Matrix gain(1, 2);
  gain << 5.0, -5.0;
  const LinearPolicy p = one_step_policy(xbar, abar, gain);
  EXPECT_EQ(policy_action(p, xbar, 0)[0], 0.7);
}

TEST(PolicyAction, ZeroGainIgnoresDeviation) {
  Vector xbar(2), abar(1), x(2);
  xbar << 0.0, 0.0;
  abar << 0.7;
  x << 10.0, -3.0;
  const LinearPolicy p = one_step_policy(xbar, abar, Matrix::Zero(1, 2));
  EXPECT_EQ(policy_action(p, x, 0)[0], 0.7);
}

TEST(PolicyAction, FeedbackScalesTheDeviation) {
  // abar = 1, K = 2, deviation 0.5: action = 1 + 2 * 0.5 = 2.
  const LinearPolicy p =
      one_step_policy(Vector::Zero(1), Vector::Constant(1, 1.0), Matrix::Constant(1, 1, 2.0));
  EXPECT_DOUBLE_EQ(policy_action(p, Vector::Constant(1, 0.5), 0)[0], 2.0);
}

TEST(PolicyAction, OutOfRangeStepOrShapeThrows) {
  const LinearPolicy p =
      one_step_policy(Vector::Zero(2), Vector::Zero(1), Matrix::Zero(1, 2));
  EXPECT_THROW(policy_action(p, Vector::Zero(2), -1), ContractError);
  EXPECT_THROW(policy_action(p, Vector::Zero(2), 1), ContractError);
  EXPECT_THROW(policy_action(p, Vector::Zero(3), 0), ContractError);
}

class LqgRollout : public ::testing::Test {
 protected:
  void SetUp() override {
    params_ = make_lqg_params(3, 2, 11);
    domain_ = make_lqg_test(params_);
    mdp_ = make_belief_mdp(domain_);
    const Vector x0 = vectorize(domain_.initial_belief, domain_.layout);
    std::vector<Vector> init(domain_.horizon, Vector::Zero(2));
    result_ = solve(mdp_, x0, init);
    ASSERT_TRUE(result_.converged);
    policy_ = LinearPolicy::from_result(result_);
  }

  LqgParams params_;
  DomainSpec domain_;
  BeliefMdp mdp_;
  DdpResult result_;
  LinearPolicy policy_;
};

TEST_F(LqgRollout, NoiseFreeReplayTracksThePlannedBeliefs) {
  RolloutOptions opt;
  opt.noise_free = true;
  const RolloutRecord rec = rollout(domain_, policy_, 0, opt);
  ASSERT_FALSE(rec.estimator_failed);
  ASSERT_EQ(rec.steps_completed, domain_.horizon);
  // Without noise the truth starts at the belief mean, every innovation
  // vanishes, and the executed beliefs retrace the planner's nominal ones.
  for (int i = 0; i <= domain_.horizon; ++i) {
    ASSERT_LT((rec.beliefs[i] - result_.states[i]).cwiseAbs().maxCoeff(), 1e-8) << "step " << i;
  }
  for (int i = 0; i < domain_.horizon; ++i) {
    ASSERT_LT((rec.actions[i] - result_.actions[i]).cwiseAbs().maxCoeff(), 1e-8);
  }
  EXPECT_NEAR(rec.states.back().squaredNorm(), rec.beliefs.back().head(3).squaredNorm(), 1e-12);
}

TEST_F(LqgRollout, InitialStateOverrideIsUsed) {
  RolloutOptions opt;
  opt.initial_state = Vector(Vector::Constant(3, 0.25));
  const RolloutRecord rec = rollout(domain_, policy_, 5, opt);
  EXPECT_EQ(rec.states[0], *opt.initial_state);
}

TEST_F(LqgRollout, HorizonMismatchThrows) {
  LinearPolicy truncated = policy_;
  truncated.nominal_actions.pop_back();
  truncated.nominal_states.pop_back();
  truncated.gains.pop_back();
  EXPECT_THROW(rollout(domain_, truncated, 0), ContractError);
}

TEST_F(LqgRollout, EstimateIsStatisticallyConsistent) {
  // The model is exactly linear-Gaussian, so the squared Mahalanobis distance
  // of the truth under the final belief is chi-squared with n = 3 degrees of
  // freedom. The mean over 200 independent rollouts pins the calibration.
  const int trials = 200;
  double acc = 0.0;
  for (int t = 0; t < trials; ++t) {
    const RolloutRecord rec = rollout(domain_, policy_, 1000 + t);
    ASSERT_FALSE(rec.estimator_failed);
    ASSERT_EQ(rec.steps_completed, domain_.horizon);
    const GaussianBelief b = devectorize_gaussian(rec.beliefs.back(), domain_.layout);
    const Vector err = rec.states.back() - b.mean;
    acc += err.dot(b.cov.ldlt().solve(err));
  }
  const double mean_d2 = acc / trials;
  EXPECT_GT(mean_d2, 0.7 * 3.0);
  EXPECT_LT(mean_d2, 1.3 * 3.0);
}

TEST(ConstrainedRollout, SeededRunsAreReproducibleAndStayInTheRoom) {
  const PlanarNavConfig cfg;
  const DomainSpec d = make_planar_nav(cfg);
  const BeliefMdp mdp = make_belief_mdp(d);

  // Hand-built open-loop policy: nominal beliefs from the planner's own step,
  // straight-line actions, no feedback. Exercises the constrained estimator
  // path without requiring a full solve.
  LinearPolicy policy;
  policy.nominal_states.push_back(vectorize(d.initial_belief, d.layout));
  for (int i = 0; i < d.horizon; ++i) {
    policy.nominal_actions.push_back(d.initial_action(i));
    policy.gains.push_back(Matrix::Zero(2, mdp.state_dim));
    policy.nominal_states.push_back(
        mdp.step(policy.nominal_states.back(), policy.nominal_actions.back()));
  }

  const RolloutRecord a = rollout(d, policy, 42);
  const RolloutRecord b = rollout(d, policy, 42);
  const RolloutRecord c = rollout(d, policy, 43);
  ASSERT_EQ(a.steps_completed, d.horizon);
  ASSERT_FALSE(a.estimator_failed);

  ASSERT_EQ(a.states.size(), b.states.size());
  for (size_t i = 0; i < a.states.size(); ++i) ASSERT_EQ(a.states[i], b.states[i]);
  for (size_t i = 0; i < a.actions.size(); ++i) ASSERT_EQ(a.actions[i], b.actions[i]);
  ASSERT_EQ(a.realized_reward, b.realized_reward);
  EXPECT_NE(a.states.back(), c.states.back());

  // Projection keeps every simulated state on or inside the boundary, and
  // the mixture weight stays a probability.
  for (const Vector& s : a.states) {
    ASSERT_GE(d.constraint->distance(s), -1e-9);
  }
  for (const Vector& x : a.beliefs) {
    const ConstrainedBelief cb = devectorize_constrained(x, d.layout);
    ASSERT_GE(cb.weight, 0.0);
    ASSERT_LE(cb.weight, 1.0);
  }
}

TEST(ConstrainedRollout, NoiseFreeRunCompletesTheHorizon) {
  const DomainSpec d = make_planar_nav(PlanarNavConfig{});
  const BeliefMdp mdp = make_belief_mdp(d);
  LinearPolicy policy;
  policy.nominal_states.push_back(vectorize(d.initial_belief, d.layout));
  for (int i = 0; i < d.horizon; ++i) {
    policy.nominal_actions.push_back(d.initial_action(i));
    policy.gains.push_back(Matrix::Zero(2, mdp.state_dim));
    policy.nominal_states.push_back(
        mdp.step(policy.nominal_states.back(), policy.nominal_actions.back()));
  }
  RolloutOptions opt;
  opt.noise_free = true;
  const RolloutRecord rec = rollout(d, policy, 0, opt);
  ASSERT_FALSE(rec.estimator_failed);
  EXPECT_EQ(rec.steps_completed, d.horizon);
  EXPECT_TRUE(std::isfinite(rec.realized_reward));
  EXPECT_EQ(rec.states[0], d.initial_state);
}

}  // namespace
}  // namespace bddp
