#include "oracles.hpp"

#include "zeroshot/environments.hpp"
#include "zeroshot/mdp.hpp"
#include "zeroshot/mdp_io.hpp"

#include <gtest/gtest.h>

using namespace zsrl;

namespace {

FiniteMdp self_loop(int A, double gamma) {
    return FiniteMdp(1, A, Mat::Ones(A, 1), Vec::Ones(1), gamma);
}

RewardFn dense(const FiniteMdp& m, std::uint64_t seed) {
    Rng rng(seed);
    return RewardFn{gaussian_matrix(m.n_pairs(), m.n_states(), rng)};
}

Policy stochastic(const FiniteMdp& m, std::uint64_t seed) {
    Rng rng(seed);
    std::uniform_real_distribution<double> u(0.05, 1.0);
    Mat p(m.n_states(), m.n_actions());
    for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = u(rng);
    for (int s = 0; s < m.n_states(); ++s) p.row(s) /= p.row(s).sum();
    return Policy(p);
}

}  // namespace

TEST(FiniteMdp, RejectsNonStochasticRows) {
    Mat P = Mat::Ones(2, 1);
    P(1, 0) = 0.9;
    EXPECT_THROW(FiniteMdp(1, 2, P, Vec::Ones(1), 0.9), InvalidModel);
    EXPECT_THROW(FiniteMdp(1, 1, Mat::Ones(1, 1), Vec::Ones(1), 1.0), InvalidModel);
    EXPECT_THROW(FiniteMdp(1, 1, Mat::Ones(1, 1), Vec::Constant(1, 0.5), 0.5), InvalidModel);
}

TEST(RewardFn, MarginalViewsMatchDirectSums) {
    const FiniteMdp m = random_mdp(4, 3, 2);
    const RewardFn r = dense(m, 3);
    const Vec rb = r.by_pair(m);
    for (int s = 0; s < 4; ++s)
        for (int a = 0; a < 3; ++a) EXPECT_NEAR(rb[m.sa(s, a)], oracle::rbar(m, r, s, a), 1e-12);
    const Policy pi = stochastic(m, 4);
    const Vec rs = r.by_state(m, pi);
    for (int s = 0; s < 4; ++s) {
        double x = 0;
        for (int a = 0; a < 3; ++a) x += pi.probs()(s, a) * oracle::rbar(m, r, s, a);
        EXPECT_NEAR(rs[s], x, 1e-12);
    }
}

TEST(EvaluatePolicy, Chain4AlwaysRight) {
    const FiniteMdp m = chain4();
    const RewardFn r = RewardFn::goal(m, 3);
    const Policy right = Policy::from_actions(2, {1, 1, 1, 1});
    const ValueTable vt = evaluate_policy(m, r, right);
    EXPECT_NEAR(vt.q(0, 1), 0.81 / 0.1, 1e-10);  // gamma^2 / (1 - gamma)
    const auto mc = oracle::rollout(m, r, right, 0, 1, 10000, 1);
    EXPECT_LE(std::abs(mc.mean - vt.q(0, 1)), std::max(3 * mc.stderr_, 1e-6));
}

TEST(EvaluatePolicy, ZeroRewardGivesZero) {
    const FiniteMdp m = random_mdp(5, 2, 9);
    const ValueTable vt = evaluate_policy(m, RewardFn::zeros(m), stochastic(m, 1));
    EXPECT_EQ(vt.q.cwiseAbs().maxCoeff(), 0.0);
}

TEST(EvaluatePolicy, SelfLoopGeometricSum) {
    const FiniteMdp m = self_loop(1, 0.5);
    const ValueTable vt = evaluate_policy(m, RewardFn::constant(m, 1.0), Policy::uniform(1, 1));
    EXPECT_NEAR(vt.q(0, 0), 2.0, 1e-12);
}

TEST(EvaluatePolicy, BellmanResidualAndLoopOracle) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const FiniteMdp m = random_mdp(2 + static_cast<int>(seed % 6), 1 + static_cast<int>(seed % 3), seed, 0.85);
        const RewardFn r = dense(m, seed + 100);
        const Policy pi = stochastic(m, seed + 200);
        const ValueTable vt = evaluate_policy(m, r, pi);
        EXPECT_LE(bellman_residual(m, r.by_pair(m), pi, vt.q), 1e-8);
        EXPECT_LE((vt.q - oracle::iterate_q(m, r, pi)).cwiseAbs().maxCoeff(), 1e-9);
        for (int s = 0; s < m.n_states(); ++s) EXPECT_NEAR(vt.v[s], pi.probs().row(s).dot(vt.q.row(s)), 1e-9);
        EXPECT_LE(vt.q.cwiseAbs().maxCoeff(), r.r.cwiseAbs().maxCoeff() / (1 - m.gamma()) + 1e-9);
    }
}

TEST(EvaluatePolicy, LinearInReward) {
    const FiniteMdp m = random_mdp(5, 3, 17);
    const RewardFn r1 = dense(m, 1), r2 = dense(m, 2);
    const Policy pi = stochastic(m, 3);
    const double a = 0.37, b = -1.9;
    const Mat lhs = evaluate_policy(m, r1 * a + r2 * b, pi).q;
    const Mat rhs = a * evaluate_policy(m, r1, pi).q + b * evaluate_policy(m, r2, pi).q;
    EXPECT_LE((lhs - rhs).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(EvaluatePolicy, MonteCarloWithinThreeStandardErrors) {
    const FiniteMdp m = random_mdp(4, 2, 5, 0.8);
    const RewardFn r = dense(m, 6);
    const Policy pi = stochastic(m, 7);
    const ValueTable vt = evaluate_policy(m, r, pi);
    const auto mc = oracle::rollout(m, r, pi, 2, 1, 100000, 11);
    EXPECT_LE(std::abs(mc.mean - vt.q(2, 1)), 3 * mc.stderr_);
}

TEST(EvaluatePolicy, DimensionMismatchThrows) {
    const FiniteMdp m = chain4();
    EXPECT_THROW(evaluate_policy(m, RewardFn{Mat::Zero(3, 3)}, Policy::uniform(4, 2)), DimensionError);
    EXPECT_THROW(evaluate_policy(m, RewardFn::zeros(m), Policy::uniform(3, 2)), DimensionError);
}

TEST(OptimalPolicy, Chain4Goal) {
    const FiniteMdp m = chain4();
    const OptimalResult opt = optimal_policy(m, RewardFn::goal(m, 3));
    const auto acts = opt.policy.actions();
    for (int s = 0; s < 3; ++s) EXPECT_EQ(acts[static_cast<std::size_t>(s)], 1);
    EXPECT_NEAR(opt.values.v[0], 8.1, 1e-9);
    EXPECT_NEAR(opt.values.expected(m.initial()), oracle::brute_force_return(m, RewardFn::goal(m, 3)), 1e-9);
    EXPECT_LE((opt.values.q - oracle::value_iteration(m, RewardFn::goal(m, 3))).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(OptimalPolicy, ConstantRewardLowestIndex) {
    const FiniteMdp m = random_mdp(5, 3, 1);
    const auto acts = optimal_policy(m, RewardFn::constant(m, 2.5)).policy.actions();
    for (int a : acts) EXPECT_EQ(a, 0);
}

TEST(OptimalPolicy, NegatedRewardFlipsInteriorToLeft) {
    const FiniteMdp m = chain4();
    const RewardFn neg = RewardFn::goal(m, 3) * -1.0;
    const auto acts = optimal_policy(m, neg).policy.actions();
    EXPECT_EQ(acts[1], 0);
    EXPECT_EQ(acts[2], 0);
    // exhaustive check: no deterministic policy beats it anywhere
    const ValueTable vstar = optimal_policy(m, neg).values;
    for (const auto& pi : enumerate_deterministic_policies(m))
        EXPECT_TRUE((vstar.v - evaluate_policy(m, neg, pi).v).minCoeff() >= -1e-9);
}

TEST(OptimalPolicy, DominatesEnumeratedPoliciesOnRandomMdps) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const FiniteMdp m = random_mdp(4, 3, seed + 50, 0.9);
        const RewardFn r = dense(m, seed);
        const OptimalResult opt = optimal_policy(m, r);
        EXPECT_LE((opt.values.q - oracle::value_iteration(m, r)).cwiseAbs().maxCoeff(), 1e-9);
        for (const auto& pi : enumerate_deterministic_policies(m))
            ASSERT_GE((opt.values.v - evaluate_policy(m, r, pi).v).minCoeff(), -1e-9);
    }
}

TEST(Enumerate, CountsAndOrder) {
    const FiniteMdp two(2, 2, Mat::Constant(4, 2, 0.5), Vec::Constant(2, 0.5), 0.9);
    const auto ps = enumerate_deterministic_policies(two);
    ASSERT_EQ(ps.size(), 4u);
    EXPECT_EQ(ps[0].actions(), (std::vector<int>{0, 0}));
    EXPECT_EQ(ps[1].actions(), (std::vector<int>{0, 1}));
    EXPECT_EQ(ps[2].actions(), (std::vector<int>{1, 0}));
    EXPECT_EQ(ps[3].actions(), (std::vector<int>{1, 1}));
    EXPECT_EQ(enumerate_deterministic_policies(self_loop(3, 0.5)).size(), 3u);
    const FiniteMdp c = chain4();
    const auto all = enumerate_deterministic_policies(c);
    EXPECT_EQ(all.size(), 16u);
    double best = -INFINITY;
    for (const auto& pi : all) best = std::max(best, policy_return(c, RewardFn::goal(c, 3).by_pair(c), pi));
    EXPECT_NEAR(best, optimal_policy(c, RewardFn::goal(c, 3)).values.expected(c.initial()), 1e-12);
}

TEST(Enumerate, CapExceeded) {
    const FiniteMdp m = random_mdp(8, 3, 0);
    EXPECT_THROW(enumerate_deterministic_policies(m, 100), CapExceeded);
}

TEST(Policy, Invariants) {
    EXPECT_THROW(Policy(Mat::Constant(2, 2, 0.6)), InvalidModel);
    const Policy d = Policy::from_actions(3, {2, 0});
    EXPECT_TRUE(d.is_deterministic());
    EXPECT_FALSE(Policy::uniform(2, 3).is_deterministic());
}

TEST(MdpIo, RoundTripAndLineErrors) {
    const FiniteMdp m = random_mdp(3, 2, 4);
    const FiniteMdp back = parse_mdp(dump_mdp(m));
    EXPECT_EQ(back.transition(), m.transition());
    EXPECT_EQ(back.initial(), m.initial());
    EXPECT_EQ(back.gamma(), m.gamma());

    const std::string bad =
        "n_states: 2\n"
        "n_actions: 1\n"
        "gamma: 0.9\n"
        "transition:\n"
        "  - [[0.5, 0.5]]\n"
        "  - [[0.5, 0.4]]\n"
        "initial: [1, 0]\n";
    try {
        parse_mdp(bad);
        FAIL() << "expected a parse error";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 6);
    }
    EXPECT_THROW(parse_mdp("n_states: 2\n"), ParseError);
}

TEST(MdpIo, BuiltinsResolve) {
    for (const std::string n : {"chain4", "grid3x3", "random8", "path5", "cycle6"})
        EXPECT_NO_THROW(resolve_mdp("builtin:" + n)) << n;
    EXPECT_THROW(resolve_mdp("builtin:nope"), std::invalid_argument);
    EXPECT_EQ(builtin_mdp("random8").n_states(), 8);
    EXPECT_EQ(builtin_mdp("grid3x3").n_actions(), 4);
}
