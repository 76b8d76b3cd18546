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

#include "bddp/ddp.hpp"

#include <cmath>

#include <gtest/gtest.h>

#include "bddp/domains/lqg.hpp"
#include "oracles/oracles.hpp"

namespace bddp {
namespace {

std::vector<Vector> zero_actions(int horizon, int m) {
  return std::vector<Vector>(horizon, Vector::Zero(m));
}

double riccati_objective(const oracles::RiccatiSolution& ric, const Vector& x0) {
  return -x0.dot(ric.P[0] * x0);
}

TEST(Ddp, LqrMatchesRiccatiOracle) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const LqgParams p = make_lqg_params(4, 2, seed);
    const BeliefMdp mdp = make_lqr_mdp(p);
    const auto ric = oracles::riccati_recursion(p.A, p.B, symmetrized(p.Qr), symmetrized(p.R),
                                                symmetrized(p.Qf), p.horizon);

    const DdpResult res = solve(mdp, p.x0, zero_actions(p.horizon, 2));
    ASSERT_TRUE(res.converged);
    EXPECT_LE(res.iterations, 3);
    EXPECT_NEAR(res.total_reward, riccati_objective(ric, p.x0),
                1e-8 * (1.0 + std::abs(res.total_reward)));
    for (int i = 0; i < p.horizon; ++i) {
      // Policy gains are feedback on the deviation: a = abar + K (x - xbar),
      // so K must equal the negated Riccati gain.
      ASSERT_LT((res.gains[i] + ric.K[i]).cwiseAbs().maxCoeff(), 1e-8) << "stage " << i;
      // Optimal open-loop actions satisfy abar_i = -K_i xbar_i.
      ASSERT_LT((res.actions[i] + ric.K[i] * res.states[i]).cwiseAbs().maxCoeff(), 1e-8);
    }
  }
}

TEST(Ddp, NominalSequenceIsDynamicallyConsistent) {
  const LqgParams p = make_lqg_params(3, 2, 5);
  const BeliefMdp mdp = make_lqr_mdp(p);
  const DdpResult res = solve(mdp, p.x0, zero_actions(p.horizon, 2));
  for (int i = 0; i < p.horizon; ++i) {
    const Vector next = mdp.step(res.states[i], res.actions[i]);
    ASSERT_LT((next - res.states[i + 1]).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Ddp, ZeroRewardGivesZeroGainsAndNoImprovement) {
  BeliefMdp mdp;
  mdp.state_dim = 2;
  mdp.action_dim = 1;
  mdp.horizon = 5;
  mdp.step = [](const Vector& x, const Vector& a) {
    Vector y = x;
    y[0] += a[0];
    return y;
  };
  mdp.reward = [](const Vector&, const Vector&, int) { return 0.0; };
  mdp.terminal_reward = [](const Vector&) { return 0.0; };

  const std::vector<Vector> as = zero_actions(5, 1);
  std::vector<Vector> xs(6, Vector::Zero(2));
  const auto derivs = detail::trajectory_derivatives(mdp, xs, as, DdpOptions{});
  const BackwardPassResult bp = backward_pass(derivs, 1e-6);
  ASSERT_TRUE(bp.ok);
  EXPECT_NEAR(bp.expected_improvement, 0.0, 1e-12);
  for (const auto& k : bp.k) EXPECT_LT(k.cwiseAbs().maxCoeff(), 1e-9);
  for (const auto& K : bp.K) EXPECT_LT(K.cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Ddp, HorizonOneGainMatchesDirectFormula) {
  const LqgParams p = [] {
    LqgParams q = make_lqg_params(3, 2, 8);
    q.horizon = 1;
    return q;
  }();
  const BeliefMdp mdp = make_lqr_mdp(p);
  const std::vector<Vector> as = zero_actions(1, 2);
  std::vector<Vector> xs{p.x0, mdp.step(p.x0, as[0])};
  const auto derivs = detail::trajectory_derivatives(mdp, xs, as, DdpOptions{});
  const double reg = 1e-12;
  const BackwardPassResult bp = backward_pass(derivs, reg);
  ASSERT_TRUE(bp.ok);

  // Hand-built single-step quadratics: V = terminal reward.
  const Matrix qf2 = symmetrized(p.Qf) * 2.0;
  const Matrix r2 = symmetrized(p.R) * 2.0;
  const Matrix quu = -r2 - p.B.transpose() * qf2 * p.B;
  const Matrix qux = -p.B.transpose() * qf2 * p.A;
  const Matrix gain_direct = (-quu).inverse() * qux;  // maximizer K = -Quu^{-1} Qux
  EXPECT_LT((bp.K[0] - gain_direct).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Ddp, ForwardPassAtZeroStepReproducesNominal) {
  const LqgParams p = make_lqg_params(3, 1, 12);
  const BeliefMdp mdp = make_lqr_mdp(p);
  std::vector<Vector> as = zero_actions(p.horizon, 1);
  for (auto& a : as) a.setConstant(0.1);
  std::vector<Vector> xs(p.horizon + 1);
  xs[0] = p.x0;
  for (int i = 0; i < p.horizon; ++i) xs[i + 1] = mdp.step(xs[i], as[i]);

  const auto derivs = detail::trajectory_derivatives(mdp, xs, as, DdpOptions{});
  const BackwardPassResult bp = backward_pass(derivs, 1e-6);
  ASSERT_TRUE(bp.ok);
  const ForwardPassResult fp = forward_pass(mdp, xs, as, bp, 0.0);
  ASSERT_TRUE(fp.ok);
  for (int i = 0; i < p.horizon; ++i) {
    ASSERT_LT((fp.actions[i] - as[i]).cwiseAbs().maxCoeff(), 1e-12);
    ASSERT_LT((fp.states[i + 1] - xs[i + 1]).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Ddp, LqrSingleFullStepReachesOptimum) {
  const LqgParams p = make_lqg_params(4, 2, 21);
  const BeliefMdp mdp = make_lqr_mdp(p);
  const auto ric = oracles::riccati_recursion(p.A, p.B, symmetrized(p.Qr), symmetrized(p.R),
                                              symmetrized(p.Qf), p.horizon);
  std::vector<Vector> as = zero_actions(p.horizon, 2);
  std::vector<Vector> xs(p.horizon + 1);
  xs[0] = p.x0;
  for (int i = 0; i < p.horizon; ++i) xs[i + 1] = mdp.step(xs[i], as[i]);

  const auto derivs = detail::trajectory_derivatives(mdp, xs, as, DdpOptions{});
  const BackwardPassResult bp = backward_pass(derivs, 1e-12);
  ASSERT_TRUE(bp.ok);
  const ForwardPassResult fp = forward_pass(mdp, xs, as, bp, 1.0);
  ASSERT_TRUE(fp.ok);
  EXPECT_NEAR(fp.total_reward, riccati_objective(ric, p.x0),
              1e-8 * (1.0 + std::abs(fp.total_reward)));
}

TEST(Ddp, AlreadyOptimalInitializationConvergesWithoutChanges) {
  const LqgParams p = make_lqg_params(3, 2, 31);
  const BeliefMdp mdp = make_lqr_mdp(p);
  const DdpResult first = solve(mdp, p.x0, zero_actions(p.horizon, 2));
  ASSERT_TRUE(first.converged);
  const DdpResult second = solve(mdp, p.x0, first.actions);
  EXPECT_TRUE(second.converged);
  // No accepted line-search pass: the log holds only the initial value.
  EXPECT_EQ(second.reward_log.size(), 1u);
  EXPECT_NEAR(second.total_reward, first.total_reward,
              1e-10 * (1.0 + std::abs(first.total_reward)));
}

TEST(Ddp, RewardLogIsMonotone) {
  const DomainSpec d = make_lqg_test(make_lqg_params(3, 2, 17));
  const BeliefMdp mdp = make_belief_mdp(d);
  const Vector x0 = vectorize(d.initial_belief, d.layout);
  const DdpResult res = solve(mdp, x0, zero_actions(d.horizon, 2));
  ASSERT_GE(res.reward_log.size(), 2u);
  for (size_t i = 1; i < res.reward_log.size(); ++i) {
    ASSERT_GE(res.reward_log[i], res.reward_log[i - 1]);
  }
  EXPECT_TRUE(res.converged);
}

TEST(Ddp, BackwardPassGradientMatchesFiniteDifferences) {
  // At very high regularization the value recursion reduces to the plain
  // adjoint, so qu must equal the objective gradient w.r.t. each action.
  BeliefMdp mdp;
  mdp.state_dim = 2;
  mdp.action_dim = 1;
  mdp.horizon = 6;
  mdp.step = [](const Vector& x, const Vector& a) {
    Vector y(2);
    y << x[0] + 0.1 * x[1] + 0.05 * std::sin(a[0]), 0.9 * x[1] + 0.2 * a[0] + 0.01 * x[0] * x[0];
    return y;
  };
  mdp.reward = [](const Vector& x, const Vector& a, int) {
    return -0.5 * x.squaredNorm() - 0.1 * a[0] * a[0];
  };
  mdp.terminal_reward = [](const Vector& x) { return -2.0 * x.squaredNorm(); };

  Vector x0(2);
  x0 << 1.0, -0.5;
  std::vector<Vector> as(6, Vector::Constant(1, 0.3));
  std::vector<Vector> xs(7);
  xs[0] = x0;
  for (int i = 0; i < 6; ++i) xs[i + 1] = mdp.step(xs[i], as[i]);

  DdpOptions opt;
  const auto derivs = detail::trajectory_derivatives(mdp, xs, as, opt);
  const double reg = 1e9;
  BackwardPassResult bp = backward_pass(derivs, reg);
  ASSERT_TRUE(bp.ok);
  // Recover qu_i = (reg I - Quu) k_i ~ reg * k_i at this regularization.

  const auto objective = [&](const Vector& flat) {
    std::vector<Vector> acts(6, Vector(1));
    for (int i = 0; i < 6; ++i) acts[i][0] = flat[i];
    Vector x = x0;
    double total = 0.0;
    for (int i = 0; i < 6; ++i) {
      total += mdp.reward(x, acts[i], i);
      x = mdp.step(x, acts[i]);
    }
    return total + mdp.terminal_reward(x);
  };
  Vector flat(6);
  for (int i = 0; i < 6; ++i) flat[i] = as[i][0];
  const Vector grad = gradient_fd(objective, flat, 1e-6);
  for (int i = 0; i < 6; ++i) {
    const double qu = reg * bp.k[i][0];
    ASSERT_NEAR(qu, grad[i], 1e-3 * (1.0 + std::abs(grad[i]))) << "stage " << i;
  }
}

TEST(Ddp, SecondOrderDynamicsEnterTheActionHessian) {
  // One stage, linear terminal value, quadratic dynamics: Gauss-Newton sees
  // zero action curvature, full DDP sees Vx-weighted f_aa.
  BeliefMdp mdp;
  mdp.state_dim = 1;
  mdp.action_dim = 1;
  mdp.horizon = 1;
  mdp.step = [](const Vector& x, const Vector& a) {
    return Vector(Vector::Constant(1, x[0] + a[0] * a[0]));
  };
  mdp.reward = [](const Vector&, const Vector&, int) { return 0.0; };
  mdp.terminal_reward = [](const Vector& x) { return -3.0 * x[0]; };  // Vx = -3

  std::vector<Vector> as{Vector::Constant(1, 0.5)};
  std::vector<Vector> xs{Vector::Zero(1), mdp.step(Vector::Zero(1), as[0])};

  DdpOptions gn;
  gn.second_order_dynamics = false;
  const auto d_gn = detail::trajectory_derivatives(mdp, xs, as, gn);
  EXPECT_TRUE(d_gn.stage[0].f.f_hess.empty());

  DdpOptions full;
  full.second_order_dynamics = true;
  const auto d_full = detail::trajectory_derivatives(mdp, xs, as, full);
  ASSERT_EQ(d_full.stage[0].f.f_hess.size(), 1u);
  // d2(step)/da2 = 2 in the (x, a) joint coordinates, bottom-right block.
  EXPECT_NEAR(d_full.stage[0].f.f_hess[0](1, 1), 2.0, 1e-6);

  // Same regularization: the full-DDP feedforward k = qu / (reg - quu)
  // differs from Gauss-Newton's exactly by quu = Vx * f_aa = -6.
  const double reg = 1.0;
  const BackwardPassResult bp_gn = backward_pass(d_gn, reg);
  const BackwardPassResult bp_full = backward_pass(d_full, reg);
  ASSERT_TRUE(bp_gn.ok && bp_full.ok);
  const double qu = -3.0 * 2.0 * 0.5;  // Vx * df/da at a = 0.5
  EXPECT_NEAR(bp_gn.k[0][0], qu / reg, 1e-5);
  EXPECT_NEAR(bp_full.k[0][0], qu / (reg + 6.0), 1e-5);
}

TEST(Ddp, WarmStartIsNoWorseThanColdStart) {
  // Continuation on a belief-space problem: sharpening the terminal cost,
  // warm-started from the previous stage, must end at least as good as a
  // cold solve of the final stage.
  LqgParams p = make_lqg_params(3, 2, 77);
  p.horizon = 20;
  LqgParams sharp = p;
  sharp.Qf = 4.0 * p.Qf;

  const DomainSpec d_soft = make_lqg_test(p);
  const DomainSpec d_sharp = make_lqg_test(sharp);
  const Vector x0 = vectorize(d_soft.initial_belief, d_soft.layout);

  const std::vector<BeliefMdp> stages{make_belief_mdp(d_soft), make_belief_mdp(d_sharp)};
  const auto reports = continuation_solve(stages, x0, zero_actions(20, 2));
  ASSERT_EQ(reports.size(), 2u);
  const DdpResult cold = solve(stages[1], x0, zero_actions(20, 2));
  EXPECT_GE(reports[1].total_reward,
            cold.total_reward - 1e-6 * (1.0 + std::abs(cold.total_reward)));
}

TEST(Ddp, SingleStageContinuationEqualsPlainSolve) {
  const LqgParams p = make_lqg_params(2, 1, 99);
  const BeliefMdp mdp = make_lqr_mdp(p);
  const auto reports = continuation_solve({mdp}, p.x0, zero_actions(p.horizon, 1));
  const DdpResult plain = solve(mdp, p.x0, zero_actions(p.horizon, 1));
  ASSERT_EQ(reports.size(), 1u);
  EXPECT_EQ(reports[0].total_reward, plain.total_reward);
  EXPECT_EQ(reports[0].iterations, plain.iterations);
}

TEST(Ddp, ContractViolationsThrow) {
  const LqgParams p = make_lqg_params(2, 1, 3);
  const BeliefMdp mdp = make_lqr_mdp(p);
  EXPECT_THROW(solve(mdp, p.x0, zero_actions(p.horizon - 1, 1)), ContractError);
  EXPECT_THROW(solve(mdp, Vector::Zero(3), zero_actions(p.horizon, 1)), ContractError);
  EXPECT_THROW(continuation_solve({}, p.x0, zero_actions(p.horizon, 1)), ContractError);
}

}  // namespace
}  // namespace bddp
