#include "oracles.hpp"

#include "zeroshot/environments.hpp"
#include "zeroshot/proto_sm.hpp"
#include "zeroshot/successor_measure.hpp"

#include <gtest/gtest.h>

#include <set>

using namespace zsrl;

namespace {

RewardFn dense(const FiniteMdp& m, std::uint64_t seed) {
    Rng rng(seed);
    return RewardFn{gaussian_matrix(m.n_pairs(), m.n_states(), rng)};
}

Policy random_policy(const FiniteMdp& m, Rng& rng) {
    std::uniform_real_distribution<double> u(0.05, 1.0);
    Mat p(m.n_states(), m.n_actions());
    for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = u(rng);
    for (int s = 0; s < m.n_states(); ++s) p.row(s) /= p.row(s).sum();
    return Policy(p);
}

}  // namespace

TEST(Codebook, Deterministic) {
    const FiniteMdp m = random_mdp(5, 3, 1);
    for (std::uint64_t v : {0ULL, 7ULL, 123456789ULL}) EXPECT_EQ(codebook_policy(v, m), codebook_policy(v, m));
    EXPECT_EQ(codebook_codes(10, 3), codebook_codes(10, 3));
}

TEST(Codebook, ActionFrequenciesLookUniform) {
    const FiniteMdp m = random_mdp(6, 2, 2);
    std::vector<long> ones(6, 0);
    for (std::uint64_t v = 0; v < 1000; ++v) {
        const auto acts = codebook_policy(v, m).actions();
        for (int s = 0; s < 6; ++s) ones[static_cast<std::size_t>(s)] += acts[static_cast<std::size_t>(s)];
    }
    for (int s = 0; s < 6; ++s) EXPECT_TRUE(oracle::binomial_ok(ones[static_cast<std::size_t>(s)], 1000, 0.5)) << s;
}

TEST(Codebook, SingleActionHasOnePolicy) {
    const FiniteMdp m(3, 1, Mat::Constant(3, 3, 1.0 / 3), Vec::Constant(3, 1.0 / 3), 0.9);
    for (std::uint64_t v = 0; v < 20; ++v) EXPECT_EQ(codebook_policy(v, m), Policy::uniform(3, 1));
}

TEST(PsmOracle, SingleStateDegenerate) {
    const FiniteMdp m(1, 1, Mat::Ones(1, 1), Vec::Ones(1), 0.5);
    const PsmModel model = fit_psm_oracle(m, 1, 4, 0);
    EXPECT_EQ(model.max_residual, 0.0);
    EXPECT_NEAR(model.b[0], 2.0, 1e-14);
    EXPECT_EQ(model.effective_rank, 0);
}

TEST(PsmOracle, TwoPointsSpanALine) {
    const FiniteMdp m = random_mdp(3, 2, 5);
    // find a seed whose two codes are distinct policies
    std::uint64_t seed = 0;
    while (true) {
        const auto c = codebook_codes(2, seed);
        if (!(codebook_policy(c[0], m) == codebook_policy(c[1], m))) break;
        ++seed;
    }
    const PsmModel model = fit_psm_oracle(m, 1, 2, seed);
    EXPECT_LE(model.max_residual, 1e-12);
    EXPECT_EQ(model.effective_rank, 1);
}

TEST(PsmOracle, Chain4FullCodebook) {
    const FiniteMdp m = chain4();
    const PsmModel model = fit_psm_oracle(m, 16, 128, 0);
    EXPECT_LE(model.max_residual, 1e-8);
    // row sums of every reconstructed measure stay 1/(1-gamma)
    for (Eigen::Index v = 0; v < model.W.rows(); ++v) {
        const Mat M = model.measure(model.W.row(v).transpose());
        EXPECT_LE((M.rowwise().sum().array() - 1.0 / (1.0 - m.gamma())).abs().maxCoeff(), 1e-6);
    }
    EXPECT_THROW(fit_psm_oracle(m, 16, 16, 0), std::invalid_argument);
}

TEST(PsmOracle, HeldOutPoliciesInAffineSpan) {
    const FiniteMdp m = random_mdp(3, 2, 31);
    const PsmModel model = fit_psm_oracle(m, m.n_pairs() * m.n_pairs() - 1, 128, 0);
    Rng rng(4);
    for (int t = 0; t < 20; ++t) {
        const Mat M = successor_measure(m, random_policy(m, rng)).m;
        EXPECT_LE(psm_affine_residual(model, M), std::max(2 * model.max_residual, 1e-12));
    }
}

TEST(PsmTd, OracleInitNonIncreasing) {
    const FiniteMdp m = random_mdp(3, 2, 7);
    const PsmModel oracle_fit = fit_psm_oracle(m, 7, 16, 1);
    PsmTdConfig cfg;
    cfg.steps = 200;
    cfg.seed = 1;
    cfg.adam = false;
    PsmTdReport rep;
    train_psm_td(m, 7, 16, cfg, &rep, &oracle_fit);
    EXPECT_LE(rep.initial_loss, 1e-12);
    EXPECT_LE(rep.final_loss, rep.initial_loss + 1e-12);
}

TEST(PsmTd, MyopicIdentity) {
    const FiniteMdp m = random_mdp(2, 2, 3, 0.0);
    PsmTdConfig cfg;
    PsmTdReport rep;
    const PsmModel model = train_psm_td(m, 3, 8, cfg, &rep);
    for (Eigen::Index v = 0; v < model.W.rows(); ++v)
        EXPECT_LE((model.measure(model.W.row(v).transpose()) - Mat::Identity(4, 4)).cwiseAbs().maxCoeff(), 1e-3);
}

TEST(PsmTd, MatchesOracleFit) {
    const FiniteMdp m = random_mdp(3, 2, 11);
    PsmTdConfig cfg;
    cfg.seed = 2;
    const PsmModel td = train_psm_td(m, 7, 16, cfg);
    const PsmModel exact = fit_psm_oracle(m, 7, 16, 2);
    EXPECT_LE(psm_relative_difference(td, exact), 0.05);
}

TEST(PsmZeroShot, MatchesValueIteration) {
    for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
        const FiniteMdp m = random_mdp(3, 2, seed + 40);
        const PsmModel model = fit_psm_oracle(m, 35, 128, seed);
        const RewardFn r = dense(m, seed);
        const PsmInference inf = psm_zero_shot(model, m, r);
        const double opt = oracle::optimal_return(m, r);
        const double tol = 1e-4 * std::max(1.0, std::abs(opt));
        EXPECT_NEAR(inf.claimed_value, opt, tol);
        EXPECT_NEAR(evaluate_policy(m, r, inf.policy).expected(m.initial()), opt, tol);
        EXPECT_LE(inf.report.feasibility_violation_max, 1e-8);
        EXPECT_GE(inf.report.min_occupancy, -1e-8);
        EXPECT_EQ(inf.report.status, LpStatus::optimal);
        // LP value dominates every deterministic policy
        for (const auto& pi : enumerate_deterministic_policies(m))
            EXPECT_GE(inf.claimed_value, evaluate_policy(m, r, pi).expected(m.initial()) - 1e-4);
    }
}

TEST(PsmZeroShot, ZeroAndConstantRewards) {
    const FiniteMdp m = random_mdp(3, 2, 2);
    const PsmModel model = fit_psm_oracle(m, 20, 64, 0);
    const PsmInference z = psm_zero_shot(model, m, RewardFn::zeros(m));
    EXPECT_EQ(z.w.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(z.values.q.cwiseAbs().maxCoeff(), 0.0);
    const PsmInference one = psm_zero_shot(model, m, RewardFn::constant(m, 1.0));
    EXPECT_NEAR(one.claimed_value, 1.0 / (1.0 - m.gamma()), 1e-6);
}

TEST(PsmZeroShot, SubgradientModeIsClose) {
    const FiniteMdp m = chain4();
    const PsmModel model = fit_psm_oracle(m, 15, 64, 0);
    const RewardFn r = RewardFn::goal(m, 3);
    PsmInferenceOptions opt;
    opt.method = LpMethod::subgradient;
    const PsmInference inf = psm_zero_shot(model, m, r, opt);
    EXPECT_LE(inf.report.feasibility_violation_max, 1e-8);
    EXPECT_GE(evaluate_policy(m, r, inf.policy).expected(m.initial()), 0.5 * oracle::optimal_return(m, r));
}

TEST(Simplex, SmallLp) {
    // max x + y  s.t.  x + 2y <= 4, 3x + y <= 6
    Mat A(2, 2);
    A << 1, 2, 3, 1;
    Vec b(2), c(2);
    b << 4, 6;
    c << 1, 1;
    const LpSolution sol = simplex_max(A, b, c);
    EXPECT_EQ(sol.status, LpStatus::optimal);
    EXPECT_NEAR(sol.objective, 2.8, 1e-12);
    EXPECT_NEAR(sol.x[0], 1.6, 1e-12);
    EXPECT_NEAR(sol.x[1], 1.2, 1e-12);
    // unbounded direction
    Mat U(1, 2);
    U << 1, -1;
    c << 0, 1;
    EXPECT_EQ(simplex_max(U, Vec::Constant(1, 1.0), c).status, LpStatus::unbounded);
}
