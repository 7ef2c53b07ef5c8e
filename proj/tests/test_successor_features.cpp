#include "oracles.hpp"

#include "zeroshot/environments.hpp"
#include "zeroshot/successor_features.hpp"

#include <gtest/gtest.h>

using namespace zsrl;

namespace {

Vec gaussian_vec(int d, Rng& rng) { return gaussian_matrix(d, 1, rng).col(0); }

}  // namespace

TEST(ExactSf, OneFeatureEqualsQ) {
    const FiniteMdp m = random_mdp(4, 2, 3);
    Rng rng(4);
    const RewardFn r{gaussian_matrix(m.n_pairs(), m.n_states(), rng)};
    Mat phi(r.r.size(), 1);
    for (int i = 0; i < m.n_pairs(); ++i)
        for (int t = 0; t < m.n_states(); ++t) phi(i * m.n_states() + t, 0) = r.r(i, t);
    const FeatureMap f(phi, "reward");
    const Policy pi = Policy::uniform(4, 2);
    const SuccessorFeatures sf = exact_sf(m, pi, f);
    const Mat q = sf.q(Vec::Ones(1), 2);
    EXPECT_LE((q - oracle::iterate_q(m, r, pi)).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(ExactSf, ZeroFeatures) {
    const FiniteMdp m = random_mdp(3, 2, 1);
    const FeatureMap f(Mat::Zero(m.n_pairs() * m.n_states(), 2));
    EXPECT_EQ(exact_sf(m, Policy::uniform(3, 2), f).psi.cwiseAbs().maxCoeff(), 0.0);
}

TEST(ExactSf, LinearRewardIdentityOnRandomInstances) {
    Rng rng(5);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const FiniteMdp m = random_mdp(4, 2 + static_cast<int>(seed % 2), seed);
        const FeatureMap f = random_features(m, 3, seed);
        const Policy pi = Policy::uniform(4, m.n_actions());
        const Vec w = gaussian_vec(3, rng);
        const Mat q = exact_sf(m, pi, f).q(w, m.n_actions());
        EXPECT_LE((q - oracle::iterate_q(m, f.reward(m, w), pi)).cwiseAbs().maxCoeff(), 1e-7);
        EXPECT_LE(sf_bellman_residual(m, pi, f, exact_sf(m, pi, f)), 1e-8);
    }
}

TEST(TdSf, Chain4GoalFeatures) {
    const FiniteMdp m = chain4();
    const FeatureMap f = state_indicator_features(m, {2, 3});
    const Policy right = Policy::from_actions(2, {1, 1, 1, 1});
    const TdSfResult td = td_sf(m, right, f);
    EXPECT_LE((td.sf.psi - exact_sf(m, right, f).psi).cwiseAbs().maxCoeff(), 1e-3);
}

TEST(TdSf, ZeroFeaturesAndMyopic) {
    const FiniteMdp m = random_mdp(3, 2, 8);
    const FeatureMap zero(Mat::Zero(m.n_pairs() * m.n_states(), 2));
    const TdSfResult z = td_sf(m, Policy::uniform(3, 2), zero);
    EXPECT_EQ(z.sf.psi.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_TRUE(z.converged);

    const FiniteMdp myopic = m.with_gamma(0.0);
    const FeatureMap f = random_features(myopic, 2, 1);
    const TdSfResult td = td_sf(myopic, Policy::uniform(3, 2), f);
    EXPECT_LE((td.sf.psi - f.by_pair(myopic)).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(TdSf, SampleStream) {
    const FiniteMdp m = chain4();
    const FeatureMap f = state_indicator_features(m, {3});
    const Policy right = Policy::from_actions(2, {1, 1, 1, 1});
    std::vector<Transition> samples;
    for (int s = 0; s < 4; ++s)
        for (int a = 0; a < 2; ++a)
            for (int t = 0; t < 4; ++t)
                if (m.p(s, a, t) > 0) samples.push_back({s, a, t});
    TdSfConfig cfg;
    cfg.updates = 200000;
    const TdSfResult td = td_sf(samples, m, right, f, cfg);
    EXPECT_LE((td.sf.psi - exact_sf(m, right, f).psi).cwiseAbs().maxCoeff(), 1e-3);
}

TEST(Linearize, RealizableZeroAndOrthogonal) {
    const FiniteMdp m = random_mdp(4, 2, 11);
    const FeatureMap f = random_features(m, 3, 2);
    Rng rng(1);
    const Vec w0 = gaussian_vec(3, rng);
    const Linearization lin = linearize_reward(m, f.reward(m, w0), f);
    EXPECT_LE((lin.w - w0).cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_LE(lin.residual, 1e-8);

    EXPECT_LE(linearize_reward(m, RewardFn::zeros(m), f).w.norm(), 1e-15);

    // reward orthogonal to span(phi) under the sampling weights (Gram-Schmidt)
    const Vec D = default_sampling(m);
    Vec x = gaussian_matrix(D.size(), 1, rng).col(0);
    const Mat G = f.phi.transpose() * D.asDiagonal() * f.phi;
    x -= f.phi * G.ldlt().solve(f.phi.transpose() * D.asDiagonal() * x);
    Mat rm(m.n_pairs(), m.n_states());
    for (int i = 0; i < m.n_pairs(); ++i) rm.row(i) = x.segment(static_cast<Eigen::Index>(i) * m.n_states(), m.n_states()).transpose();
    const RewardFn orth{rm};
    const Linearization lo = linearize_reward(m, orth, f);
    EXPECT_LE(lo.w.norm(), 1e-8);
    EXPECT_NEAR(lo.residual, std::sqrt(D.dot(x.cwiseAbs2())), 1e-10);
}

TEST(Linearize, RankDeficientWarns) {
    const FiniteMdp m = random_mdp(3, 2, 4);
    Mat phi(m.n_pairs() * m.n_states(), 2);
    phi.col(0) = Vec::Ones(phi.rows());
    phi.col(1) = Vec::Ones(phi.rows());
    const Linearization lin = linearize_reward(m, RewardFn::constant(m, 1.0), FeatureMap(phi));
    EXPECT_TRUE(lin.rank_deficient);
    EXPECT_FALSE(lin.warning.empty());
    EXPECT_LE(lin.residual, 1e-6);
}

TEST(Linearize, LocalOptimality) {
    const FiniteMdp m = random_mdp(4, 3, 13);
    const FeatureMap f = random_features(m, 3, 7);
    Rng rng(3);
    const RewardFn r{gaussian_matrix(m.n_pairs(), m.n_states(), rng)};
    const Linearization lin = linearize_reward(m, r, f);
    for (int k = 0; k < 20; ++k) {
        const Vec w = lin.w + 1e-3 * gaussian_vec(3, rng);
        EXPECT_GE(linearization_error(m, r, f, w), lin.residual - 1e-12);
    }
}

TEST(Gpi, SingleAndDuplicate) {
    const FiniteMdp m = random_mdp(4, 3, 2);
    Rng rng(6);
    const RewardFn r{gaussian_matrix(m.n_pairs(), m.n_states(), rng)};
    const Policy pi = Policy::uniform(4, 3);
    const Mat q = evaluate_policy(m, r, pi).q;
    const Policy g1 = gpi_policy({q});
    EXPECT_EQ(g1, greedy_policy(q));
    EXPECT_GE((evaluate_policy(m, r, g1).q - q).minCoeff(), -1e-9);
    EXPECT_EQ(gpi_policy({q, q}), g1);
    EXPECT_THROW(gpi_policy(std::vector<Mat>{}), std::invalid_argument);
}

TEST(Gpi, TwoGoalGridStrictlyDominates) {
    // 1x5 corridor; entering s0 pays 1, entering s1 pays 0.5.  pi1 heads left
    // only near the left end, pi2 only from the right half.
    const FiniteMdp m = gridworld(1, 5, 0.0, 0.9);
    RewardFn r = RewardFn::zeros(m);
    r.r.col(0).setConstant(1.0);
    r.r.col(1).setConstant(0.5);
    const Policy pi1 = Policy::from_actions(4, {3, 3, 0, 0, 0});
    const Policy pi2 = Policy::from_actions(4, {0, 0, 3, 3, 3});
    const Mat q1 = evaluate_policy(m, r, pi1).q, q2 = evaluate_policy(m, r, pi2).q;
    const Mat qg = evaluate_policy(m, r, gpi_policy({q1, q2})).q;
    const Mat best = q1.cwiseMax(q2);
    EXPECT_GE((qg - best).minCoeff(), -1e-9);
    EXPECT_GT((qg - best).maxCoeff(), 1e-6);
    EXPECT_GT(qg(3, 3), best(3, 3) + 1e-6);
}

TEST(Usf, RealizableSingleTaskIsOptimal) {
    const FiniteMdp m = random_mdp(5, 2, 19);
    const FeatureMap f = random_features(m, 3, 4);
    Rng rng(8);
    const Vec w = gaussian_vec(3, rng);
    const UsfModel model = train_usf(m, f, {w});
    const Mat qstar = oracle::value_iteration(m, f.reward(m, w));
    const Mat qpi = evaluate_policy(m, f.reward(m, w), model.grid[0].policy).q;
    EXPECT_LE((qstar - qpi).cwiseAbs().maxCoeff(), 1e-8);
    const UsfInference inf = usf_zero_shot(model, f.reward(m, w));
    EXPECT_LE((qstar - evaluate_policy(m, f.reward(m, w), inf.policy).q).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Usf, ZeroTaskIsLexicographic) {
    const FiniteMdp m = random_mdp(4, 3, 2);
    const UsfModel model = train_usf(m, random_features(m, 2, 1), {Vec::Zero(2)});
    for (int a : model.grid[0].policy.actions()) EXPECT_EQ(a, 0);
    for (int a : usf_zero_shot(model, RewardFn::zeros(m)).policy.actions()) EXPECT_EQ(a, 0);
}

TEST(Usf, Chain4GoalGrid) {
    const FiniteMdp m = chain4();
    const FeatureMap f = one_hot_state_features(m);
    std::vector<Vec> grid;
    for (int g = 0; g < 4; ++g) grid.push_back(Vec::Unit(4, g));
    const UsfModel model = train_usf(m, f, grid);
    for (int g = 0; g < 4; ++g) {
        // each stored policy reaches its goal along the shortest path
        const auto acts = model.grid[static_cast<std::size_t>(g)].policy.actions();
        for (int s = 0; s < 4; ++s) {
            if (s == g || s == 3) continue;  // s3 is absorbing
            EXPECT_EQ(acts[static_cast<std::size_t>(s)], s < g ? 1 : 0) << "goal " << g << " state " << s;
        }
        const RewardFn r = RewardFn::goal(m, g);
        const UsfInference inf = usf_zero_shot(model, r);
        EXPECT_NEAR(evaluate_policy(m, r, inf.policy).expected(m.initial()), oracle::optimal_return(m, r), 1e-8);
    }
}

TEST(GapBound, RealizableInGridIsTight) {
    const FiniteMdp m = random_mdp(3, 2, 23);
    const FeatureMap f = random_features(m, 2, 3);
    const Vec w = Vec::Unit(2, 0);
    const UsfModel model = train_usf(m, f, {w, Vec::Unit(2, 1)});
    const BoundReport b = theorem2_bound(model, f.reward(m, w));
    EXPECT_LE(b.gap, 1e-8);
    EXPECT_LE(*b.termA_exact, 1e-6);
    EXPECT_LE(b.termB, 1e-6);
    EXPECT_LE(b.termC, 1e-12);
    EXPECT_TRUE(b.holds());
}

TEST(GapBound, RealizableOffGrid) {
    const FiniteMdp m = random_mdp(4, 2, 29);
    const FeatureMap f = random_features(m, 2, 5);
    const UsfModel model = train_usf(m, f, {Vec::Unit(2, 0), Vec::Unit(2, 1)});
    Vec w(2);
    w << 0.7, -0.4;
    const BoundReport b = theorem2_bound(model, f.reward(m, w));
    EXPECT_LE(*b.termA_exact, 1e-6);
    EXPECT_LE(b.gap, b.termB + b.termC + 1e-9);
}

TEST(GapBound, NonRealizableRandomInstances) {
    Rng rng(31);
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const FiniteMdp m = random_mdp(3, 2, seed + 1000);
        const FeatureMap f = random_features(m, 2, seed);
        const UsfModel model = train_usf(m, f, sphere_points(2, 3, rng));
        const RewardFn r{gaussian_matrix(m.n_pairs(), m.n_states(), rng)};
        const BoundReport b = theorem2_bound(model, r);
        ASSERT_TRUE(b.holds()) << "seed " << seed << " gap " << b.gap << " bound " << b.bound();
        ASSERT_TRUE(b.surrogate_dominates()) << "seed " << seed;
        // brute-force gap: Q* by loops vs the inferred policy's Q
        const Mat qstar = oracle::value_iteration(m, r);
        const Mat qpi = oracle::iterate_q(m, r, usf_zero_shot(model, r).policy);
        ASSERT_NEAR(b.gap, (qstar - qpi).cwiseAbs().maxCoeff(), 1e-8);
    }
}

TEST(Features, BuiltinsHaveExpectedShape) {
    const FiniteMdp m = gridworld(3, 3);
    EXPECT_EQ(one_hot_state_features(m).d, 9);
    EXPECT_EQ(one_hot_pair_features(m).d, 36);
    EXPECT_EQ(laplacian_features(m, 4).d, 4);
    EXPECT_THROW(laplacian_features(m, 10), DimensionError);
    EXPECT_THROW(make_features(m, "nope", 2, 0), std::invalid_argument);
    EXPECT_NEAR(one_hot_state_features(m).sup_norm(), 1.0, 1e-15);
}
