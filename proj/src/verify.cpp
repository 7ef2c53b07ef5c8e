#include "zeroshot/verify.hpp"

#include "zeroshot/bench.hpp"
#include "zeroshot/environments.hpp"
#include "zeroshot/util.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <map>
#include <sstream>

namespace zsrl {

void SuiteResult::expect(bool ok, const std::string& what) {
    if (ok) return;
    pass = false;
    ++violations;
    if (failures.size() < 10) failures.push_back(what);
}

namespace {

constexpr std::uint64_t kSalt = 0x5eedULL;

struct Instance {
    FiniteMdp mdp;
    Rng rng;
};

// Random MDP with S <= max_s, A <= max_a and gamma in [0.5, 0.95].
Instance random_instance(std::uint64_t seed, int max_s, int max_a, const SuiteOptions& opt, int min_s = 1) {
    Rng rng(splitmix64(seed ^ kSalt));
    if (opt.mdp) return {*opt.mdp, rng};
    const int S = std::uniform_int_distribution<int>(min_s, max_s)(rng);
    const int A = std::uniform_int_distribution<int>(1, max_a)(rng);
    const double g = std::uniform_real_distribution<double>(0.5, 0.95)(rng);
    return {random_mdp(S, A, splitmix64(seed), g), rng};
}

Policy random_policy(const FiniteMdp& mdp, Rng& rng) {
    const int S = mdp.n_states(), A = mdp.n_actions();
    std::uniform_real_distribution<double> u(0.0, 1.0);
    if (u(rng) < 0.5) {
        std::vector<int> acts(static_cast<std::size_t>(S));
        for (auto& a : acts) a = std::uniform_int_distribution<int>(0, A - 1)(rng);
        return Policy::from_actions(A, acts);
    }
    Mat p(S, A);
    for (int s = 0; s < S; ++s) {
        for (int a = 0; a < A; ++a) p(s, a) = u(rng) + 1e-3;
        p.row(s) /= p.row(s).sum();
    }
    return Policy(p);
}

RewardFn random_reward(const FiniteMdp& mdp, Rng& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    RewardFn r = RewardFn::zeros(mdp);
    for (Eigen::Index i = 0; i < r.r.rows(); ++i)
        for (Eigen::Index j = 0; j < r.r.cols(); ++j) r.r(i, j) = n(rng);
    return r;
}

int count_or(const SuiteOptions& opt, int def) { return opt.seeds > 0 ? opt.seeds : def; }

std::string sci(double x) {
    std::ostringstream os;
    os.precision(3);
    os << std::scientific << x;
    return os.str();
}

// ---------------------------------------------------------------- suites

SuiteResult suite_smb(const SuiteOptions& opt) {
    SuiteResult res;
    std::ostringstream csv;
    csv << "seed,n_states,n_actions,gamma,bellman_residual,rowsum_error,value_error\n";
    double wr = 0, ws = 0, wv = 0;
    const int n = count_or(opt, 100);
    for (int seed = 0; seed < n; ++seed) {
        auto [mdp, rng] = random_instance(static_cast<std::uint64_t>(seed), 8, 3, opt);
        const Policy pi = random_policy(mdp, rng);
        const RewardFn r = random_reward(mdp, rng);
        const SuccessorMeasure sm = successor_measure(mdp, pi);
        const double resid = sm_bellman_residual(mdp, pi, sm);
        const double rows = (sm.m.rowwise().sum().array() - 1.0 / (1.0 - mdp.gamma())).abs().maxCoeff();
        const double verr = (value_from_sm(mdp, sm, r, pi).q - evaluate_policy(mdp, r, pi).q).cwiseAbs().maxCoeff();
        res.expect(resid <= 1e-8, "seed " + std::to_string(seed) + ": Bellman residual " + sci(resid));
        res.expect(rows <= 1e-8, "seed " + std::to_string(seed) + ": row sums off by " + sci(rows));
        res.expect(verr <= 1e-7, "seed " + std::to_string(seed) + ": value mismatch " + sci(verr));
        wr = std::max(wr, resid);
        ws = std::max(ws, rows);
        wv = std::max(wv, verr);
        csv << seed << ',' << mdp.n_states() << ',' << mdp.n_actions() << ',' << fmt(mdp.gamma()) << ','
            << fmt(resid) << ',' << fmt(rows) << ',' << fmt(verr) << '\n';
    }
    res.summary = std::to_string(n) + " instances; max residual " + sci(wr) + ", max row-sum error " + sci(ws) +
                  ", max value error " + sci(wv);
    res.csv = csv.str();
    return res;
}

SuiteResult suite_sf(const SuiteOptions& opt) {
    SuiteResult res;
    std::ostringstream csv;
    csv << "part,seed,mdp,d,error\n";
    double worst = 0.0;
    const int n = count_or(opt, 100);
    for (int seed = 0; seed < n; ++seed) {
        auto [mdp, rng] = random_instance(static_cast<std::uint64_t>(seed), 8, 3, opt);
        const int d = std::uniform_int_distribution<int>(1, 6)(rng);
        const FeatureMap f = random_features(mdp, d, static_cast<std::uint64_t>(seed));
        const Policy pi = random_policy(mdp, rng);
        Vec w(d);
        std::normal_distribution<double> nd(0.0, 1.0);
        for (int j = 0; j < d; ++j) w[j] = nd(rng);
        const SuccessorFeatures sf = exact_sf(mdp, pi, f);
        const double err = (sf.q(w, mdp.n_actions()) - evaluate_policy(mdp, f.reward(mdp, w), pi).q).cwiseAbs().maxCoeff();
        res.expect(err <= 1e-7, "seed " + std::to_string(seed) + ": |psi^T w - Q| = " + sci(err));
        worst = std::max(worst, err);
        csv << "linear-identity," << seed << ',' << opt.mdp_id << ',' << d << ',' << fmt(err) << '\n';
    }
    // TD-trained psi on the desk suite (or the given mdp)
    std::vector<std::pair<std::string, FiniteMdp>> suite =
        opt.mdp ? std::vector<std::pair<std::string, FiniteMdp>>{{opt.mdp_id, *opt.mdp}} : desk_suite();
    double td_worst = 0.0;
    for (const auto& [name, mdp] : suite) {
        const int d = std::min(mdp.n_states(), 4);
        const FeatureMap f = laplacian_features(mdp, d);
        const Policy pis[] = {Policy::uniform(mdp.n_states(), mdp.n_actions()),
                              optimal_policy(mdp, RewardFn::goal(mdp, mdp.n_states() - 1)).policy};
        int k = 0;
        for (const auto& pi : pis) {
            TdSfConfig tc;
            tc.seed = static_cast<std::uint64_t>(k);
            const TdSfResult td = td_sf(mdp, pi, f, tc);
            const double err = (td.sf.psi - exact_sf(mdp, pi, f).psi).cwiseAbs().maxCoeff();
            res.expect(err <= 1e-3, name + " policy " + std::to_string(k) + ": TD psi error " + sci(err));
            td_worst = std::max(td_worst, err);
            csv << "td," << k++ << ',' << name << ',' << d << ',' << fmt(err) << '\n';
        }
    }
    res.summary = std::to_string(n) + " linear-reward instances, max error " + sci(worst) + "; TD psi max error " +
                  sci(td_worst);
    res.csv = csv.str();
    return res;
}

SuiteResult suite_gpi(const SuiteOptions& opt) {
    SuiteResult res;
    std::ostringstream csv;
    csv << "part,seed,epsilon,n_policies,shortfall,slack\n";
    const int n = count_or(opt, 100);
    double worst0 = -INFINITY, worst_eps = -INFINITY;
    for (int part = 0; part < 2; ++part) {
        for (int seed = 0; seed < n; ++seed) {
            auto [mdp, rng] = random_instance(static_cast<std::uint64_t>(seed + 1000 * part), 8, 3, opt);
            const int k = std::uniform_int_distribution<int>(1, 5)(rng);
            const RewardFn r = random_reward(mdp, rng);
            std::vector<Mat> qs, noisy;
            Mat best;
            double eps = 0.0;
            if (part == 1) eps = std::uniform_real_distribution<double>(1e-3, 0.5)(rng);
            std::uniform_real_distribution<double> u(-1.0, 1.0);
            for (int i = 0; i < k; ++i) {
                const Mat q = evaluate_policy(mdp, r, random_policy(mdp, rng)).q;
                best = i == 0 ? q : best.cwiseMax(q);
                qs.push_back(q);
                Mat qn = q;
                for (Eigen::Index a = 0; a < qn.size(); ++a) qn.data()[a] += eps * u(rng);
                noisy.push_back(qn);
            }
            const Policy pi = gpi_policy(part == 0 ? qs : noisy);
            const Mat q = evaluate_policy(mdp, r, pi).q;
            const double shortfall = (best - q).maxCoeff();
            const double slack = part == 0 ? 1e-9 : 2.0 * eps / (1.0 - mdp.gamma()) + 1e-9;
            res.expect(shortfall <= slack, std::string(part ? "eps>0" : "eps=0") + " seed " + std::to_string(seed) +
                                               ": shortfall " + sci(shortfall) + " > " + sci(slack));
            (part == 0 ? worst0 : worst_eps) =
                std::max(part == 0 ? worst0 : worst_eps, part == 0 ? shortfall : shortfall / slack);
            csv << (part ? "perturbed," : "exact,") << seed << ',' << fmt(eps) << ',' << k << ','
                << fmt(shortfall) << ',' << fmt(slack) << '\n';
        }
    }
    res.summary = std::to_string(n) + "+" + std::to_string(n) + " trials; exact max shortfall " + sci(worst0) +
                  ", perturbed max shortfall/slack " + fmt(worst_eps);
    res.csv = csv.str();
    return res;
}

SuiteResult suite_theorem2(const SuiteOptions& opt) {
    SuiteResult res;
    std::ostringstream csv;
    csv << "seed,mdp_id,psi,gap,termA_exact,termA_surrogate,termB,termC,termC_gpi,bound\n";
    const int n = count_or(opt, 200);
    int noisy_literal_misses = 0, noisy = 0;
    double tightest = INFINITY;
    for (int seed = 0; seed < n; ++seed) {
        auto [mdp, rng] = random_instance(static_cast<std::uint64_t>(seed + 7000), 5, 3, opt, 2);
        const int d = std::uniform_int_distribution<int>(1, 4)(rng);
        const bool lap = seed % 3 == 0 && d <= mdp.n_states();
        const FeatureMap f = lap ? laplacian_features(mdp, d) : random_features(mdp, d, static_cast<std::uint64_t>(seed));
        const int ne = std::uniform_int_distribution<int>(1, 6)(rng);
        std::vector<Vec> grid = sphere_points(d, ne, rng);
        // rewards: dense, or linear plus a perturbation of random size
        RewardFn r = random_reward(mdp, rng);
        if (seed % 2 == 0) {
            Vec w(d);
            std::normal_distribution<double> nd(0.0, 1.0);
            for (int j = 0; j < d; ++j) w[j] = nd(rng);
            r = f.reward(mdp, w) + r * std::pow(10.0, std::uniform_real_distribution<double>(-4.0, 0.0)(rng));
        }
        UsfModel model = train_usf(mdp, f, grid);
        const bool inexact = seed % 4 == 3;
        if (inexact) {
            // perturbed successor features: the GPI slack for approximate Q applies
            const double scale = std::pow(10.0, std::uniform_real_distribution<double>(-4.0, -1.0)(rng));
            for (auto& e : model.grid)
                e.psi_tilde = SuccessorFeatures{e.psi.psi + gaussian_matrix(e.psi.psi.rows(), e.psi.psi.cols(), rng,
                                                                            scale * (1.0 + e.psi.psi.cwiseAbs().maxCoeff())),
                                                "noisy"};
        }
        const BoundReport b = theorem2_bound(model, r);
        const std::string id = "seed " + std::to_string(seed);
        res.expect(b.termA_exact.has_value(), id + ": exhaustive termA unavailable");
        res.expect(b.surrogate_dominates(), id + ": termA_exact " + sci(b.termA()) + " > surrogate " +
                                                sci(b.termA_surrogate));
        if (inexact) {
            ++noisy;
            if (!b.holds()) ++noisy_literal_misses;
            res.expect(b.gap <= b.termA() + b.termB + b.termC_gpi + 1e-9,
                       id + " (approximate psi): gap " + sci(b.gap) + " exceeds bound with GPI slack");
        } else {
            res.expect(b.holds(), id + ": gap " + sci(b.gap) + " > bound " + sci(b.bound()));
            tightest = std::min(tightest, b.bound() - b.gap);
        }
        csv << seed << ',' << opt.mdp_id << ',' << (inexact ? "approx" : "exact") << ',' << fmt(b.gap) << ','
            << (b.termA_exact ? fmt(*b.termA_exact) : "") << ',' << fmt(b.termA_surrogate) << ',' << fmt(b.termB)
            << ',' << fmt(b.termC) << ',' << fmt(b.termC_gpi) << ',' << fmt(b.bound()) << '\n';
    }
    res.summary = std::to_string(n) + " instances (" + std::to_string(noisy) +
                  " with approximate psi); smallest bound - gap " + sci(tightest) +
                  "; approximate-psi instances exceeding the un-slacked bound: " + std::to_string(noisy_literal_misses);
    res.csv = csv.str();
    return res;
}

SuiteResult suite_eq31(const SuiteOptions& opt) {
    SuiteResult res;
    std::ostringstream csv;
    csv << "seed,lhs,rhs\n";
    const int n = count_or(opt, 500);
    double ratio = 0.0;
    for (int seed = 0; seed < n; ++seed) {
        auto [mdp, rng] = random_instance(static_cast<std::uint64_t>(seed + 20000), 8, 3, opt);
        const Policy pi = random_policy(mdp, rng);
        const RewardFn r = random_reward(mdp, rng);
        RewardFn r2 = random_reward(mdp, rng);
        if (seed % 2 == 0) r2 = r + r2 * std::pow(10.0, std::uniform_real_distribution<double>(-6.0, 0.0)(rng));
        const double lhs = (evaluate_policy(mdp, r, pi).q - evaluate_policy(mdp, r2, pi).q).cwiseAbs().maxCoeff();
        const double rhs = (r.by_pair(mdp) - r2.by_pair(mdp)).norm() / (1.0 - mdp.gamma());
        res.expect(lhs <= rhs + 1e-9, "seed " + std::to_string(seed) + ": " + sci(lhs) + " > " + sci(rhs));
        if (rhs > 0) ratio = std::max(ratio, lhs / rhs);
        csv << seed << ',' << fmt(lhs) << ',' << fmt(rhs) << '\n';
    }
    res.summary = std::to_string(n) + " triples; max lhs/rhs " + fmt(ratio);
    res.csv = csv.str();
    return res;
}

SuiteResult suite_fb(const SuiteOptions& opt) {
    SuiteResult res;
    std::ostringstream csv;
    csv << "part,seed,mdp,d,value\n";
    // full-rank oracle fit
    std::vector<std::pair<std::string, FiniteMdp>> suite =
        opt.mdp ? std::vector<std::pair<std::string, FiniteMdp>>{{opt.mdp_id, *opt.mdp}} : desk_suite();
    double fit_worst = 0.0;
    for (const auto& [name, mdp] : suite) {
        FbFitReport rep;
        const FbModel m = fit_fb_oracle(mdp, mdp.n_pairs(), fb_anchor_tasks(mdp, 8, 0), {}, &rep);
        double err = 0.0;
        for (double e : fb_reconstruction_error(m, mdp)) err = std::max(err, e);
        res.expect(err <= 1e-6, name + ": full-rank reconstruction error " + sci(err));
        fit_worst = std::max(fit_worst, err);
        csv << "oracle,0," << name << ',' << mdp.n_pairs() << ',' << fmt(err) << '\n';
    }
    // TD-trained FB at d = 8 on Chain-4, in-span goal tasks
    const FiniteMdp chain = chain4();
    std::vector<RewardFn> goals;
    for (int g = 0; g < chain.n_states(); ++g) goals.push_back(RewardFn::goal(chain, g));
    double td_worst = 0.0;
    try {
        const FbModel m = train_fb_td(chain, 8, goals);
        for (int g = 0; g < chain.n_states(); ++g) {
            const FbInference inf = fb_zero_shot(m, chain, goals[static_cast<std::size_t>(g)]);
            const double vstar = optimal_policy(chain, goals[static_cast<std::size_t>(g)]).values.expected(chain.initial());
            const double got = evaluate_policy(chain, goals[static_cast<std::size_t>(g)], inf.policy).expected(chain.initial());
            const double rel = (vstar - got) / std::abs(vstar);
            res.expect(rel <= 0.05, "chain4 goal " + std::to_string(g) + ": TD FB regret " + fmt(100 * rel) + "% of oracle");
            td_worst = std::max(td_worst, rel);
            csv << "td_regret," << g << ",chain4,8," << fmt(rel) << '\n';
        }
    } catch (const TrainingDiverged& e) {
        res.expect(false, std::string("TD FB diverged: ") + e.what());
    }
    // rank monotonicity with the policies held fixed
    const int seeds = count_or(opt, 5);
    int mono_fail = 0;
    for (int seed = 0; seed < seeds; ++seed) {
        const FiniteMdp mdp = opt.mdp ? *opt.mdp : random_mdp(4, 2, static_cast<std::uint64_t>(seed + 300));
        const auto anchors = fb_anchor_tasks(mdp, 6, static_cast<std::uint64_t>(seed));
        std::vector<Policy> pols;
        std::vector<Mat> ms;
        double total = 0.0;
        for (const auto& a : anchors) {
            pols.push_back(optimal_policy(mdp, a).policy);
            ms.push_back(successor_measure(mdp, pols.back()).m);
            total += ms.back().squaredNorm();
        }
        double prev = INFINITY;
        for (int d = 1; d <= mdp.n_pairs(); ++d) {
            FbOracleConfig oc;
            oc.fixed_policies = pols;
            const FbModel m = fit_fb_oracle(mdp, d, anchors, oc);
            const auto rel = fb_reconstruction_error(m, mdp);
            double sq = 0.0;
            for (std::size_t k = 0; k < rel.size(); ++k) sq += rel[k] * rel[k] * ms[k].squaredNorm();
            const double agg = std::sqrt(sq / total);
            const bool ok = agg <= prev * (1.0 + 1e-9) + 1e-12;
            if (!ok) ++mono_fail;
            res.expect(ok, "seed " + std::to_string(seed) + ": error rose from " + sci(prev) + " to " + sci(agg) +
                               " at d=" + std::to_string(d));
            prev = agg;
            csv << "rank," << seed << ',' << opt.mdp_id << ',' << d << ',' << fmt(agg) << '\n';
        }
    }
    res.summary = "full-rank fit max error " + sci(fit_worst) + "; TD (d=8, Chain-4) max regret " +
                  fmt(100 * td_worst) + "% of oracle; rank-monotonicity breaks " + std::to_string(mono_fail) +
                  " over " + std::to_string(seeds) + " seeds";
    res.csv = csv.str();
    return res;
}

SuiteResult suite_psm(const SuiteOptions& opt) {
    SuiteResult res;
    std::ostringstream csv;
    csv << "part,mdp,index,value,reference\n";
    std::vector<std::pair<std::string, FiniteMdp>> mdps;
    if (opt.mdp) {
        mdps.push_back({opt.mdp_id, *opt.mdp});
    } else {
        mdps = {{"chain4", chain4()},
                {"random3x2", random_mdp(3, 2, 31)},
                {"random4x2", random_mdp(4, 2, 41)},
                {"random3x3", random_mdp(3, 3, 33)}};
    }
    const int held = count_or(opt, 50);
    double ratio_worst = 0.0, lp_worst = 0.0, feas_worst = 0.0;
    for (const auto& [name, mdp] : mdps) {
        const PsmModel model = fit_psm_oracle(mdp, 127, 128, 0);
        const double floor = std::max(2.0 * model.max_residual, 1e-12);
        Rng rng(splitmix64(kSalt + 77));
        double worst = 0.0;
        for (int i = 0; i < held; ++i) {
            Mat p(mdp.n_states(), mdp.n_actions());
            for (Eigen::Index k = 0; k < p.size(); ++k) p.data()[k] = std::uniform_real_distribution<double>(1e-3, 1.0)(rng);
            for (int s = 0; s < mdp.n_states(); ++s) p.row(s) /= p.row(s).sum();
            const double r = psm_affine_residual(model, successor_measure(mdp, Policy(p)).m);
            worst = std::max(worst, r);
            csv << "affine," << name << ',' << i << ',' << fmt(r) << ',' << fmt(model.max_residual) << '\n';
        }
        res.expect(worst <= floor, name + ": held-out residual " + sci(worst) + " > max(2 x codebook residual " +
                                       sci(model.max_residual) + ", 1e-12)");
        ratio_worst = std::max(ratio_worst, worst);
        // LP inference against value iteration
        for (int t = 0; t < 10; ++t) {
            const RewardFn r = random_reward(mdp, rng);
            const PsmInference inf = psm_zero_shot(model, mdp, r);
            const double vstar = value_iteration(mdp, r.by_pair(mdp)).values.expected(mdp.initial());
            const double got = evaluate_policy(mdp, r, inf.policy).expected(mdp.initial());
            const double den = std::max(std::abs(vstar), 1e-12);
            const double rel = std::max(std::abs(inf.claimed_value - vstar), std::abs(got - vstar)) / den;
            res.expect(rel <= 1e-4, name + " task " + std::to_string(t) + ": LP vs value iteration " + sci(rel));
            res.expect(inf.report.feasibility_violation_max <= 1e-8,
                       name + " task " + std::to_string(t) + ": infeasible occupancy " +
                           sci(inf.report.feasibility_violation_max));
            lp_worst = std::max(lp_worst, rel);
            feas_worst = std::max(feas_worst, inf.report.feasibility_violation_max);
            csv << "lp," << name << ',' << t << ',' << fmt(inf.claimed_value) << ',' << fmt(vstar) << '\n';
        }
    }
    res.summary = "held-out affine residual max " + sci(ratio_worst) + "; LP vs VI max relative error " +
                  sci(lp_worst) + "; max feasibility violation " + sci(feas_worst);
    res.csv = csv.str();
    return res;
}

// shortest-path lengths to g by backward BFS over positive-probability moves
std::vector<int> bfs_to(const FiniteMdp& mdp, int g) {
    std::vector<int> d(static_cast<std::size_t>(mdp.n_states()), -1);
    d[static_cast<std::size_t>(g)] = 0;
    std::deque<int> q{g};
    while (!q.empty()) {
        const int v = q.front();
        q.pop_front();
        for (int s = 0; s < mdp.n_states(); ++s) {
            if (d[static_cast<std::size_t>(s)] >= 0) continue;
            for (int a = 0; a < mdp.n_actions(); ++a)
                if (mdp.p(s, a, v) > 0.0) {
                    d[static_cast<std::size_t>(s)] = d[static_cast<std::size_t>(v)] + 1;
                    q.push_back(s);
                    break;
                }
        }
    }
    return d;
}

SuiteResult suite_hilp(const SuiteOptions& opt) {
    SuiteResult res;
    std::ostringstream csv;
    csv << "part,mdp,seed,value\n";
    // expectile close to 1: the per-hop bias of the expectile is 2(1 - tau)
    const double tau = 0.995;
    std::vector<std::pair<std::string, FiniteMdp>> paths;
    if (opt.mdp) {
        paths.push_back({opt.mdp_id, *opt.mdp});
    } else {
        paths = {{"chain4", chain4()}, {"path6", path_graph(6)}, {"path8", path_graph(8)}};
    }
    const int seeds = count_or(opt, 1);
    double dist_worst = 0.0, regret_worst = 0.0;
    for (const auto& [name, mdp] : paths) {
        for (int seed = 0; seed < seeds; ++seed) {
            HilbertConfig hc;
            hc.seed = static_cast<std::uint64_t>(seed);
            HilbertEmbedding emb;
            try {
                emb = train_hilbert(mdp, 1, tau, hc);
            } catch (const TrainingDiverged& e) {
                res.expect(false, name + ": " + e.what());
                continue;
            }
            res.expect(emb.distortion <= 0.1, name + " seed " + std::to_string(seed) + ": distortion " + fmt(emb.distortion));
            dist_worst = std::max(dist_worst, emb.distortion);
            csv << "distortion," << name << ',' << seed << ',' << fmt(emb.distortion) << '\n';
            // realizable rewards
            Rng rng(splitmix64(static_cast<std::uint64_t>(seed) + 5));
            for (int t = 0; t < 5; ++t) {
                Vec z(1);
                z[0] = std::normal_distribution<double>(0.0, 1.0)(rng);
                const RewardFn r = latent_reward(emb, mdp, z);
                const HilbertInference inf = hilbert_zero_shot(emb, mdp, r);
                const double regret = optimal_policy(mdp, r).values.expected(mdp.initial()) -
                                      evaluate_policy(mdp, r, inf.policy).expected(mdp.initial());
                res.expect(regret <= 1e-6, name + ": realizable regret " + sci(regret));
                regret_worst = std::max(regret_worst, regret);
                csv << "regret," << name << ',' << t << ',' << fmt(regret) << '\n';
            }
        }
    }
    // goal-conditioned policies vs BFS on the deterministic desk MDPs
    std::vector<std::pair<std::string, FiniteMdp>> det;
    if (opt.mdp) {
        if (opt.mdp->deterministic()) det.push_back({opt.mdp_id, *opt.mdp});
    } else {
        for (auto& [n, m] : desk_suite())
            if (m.deterministic()) det.push_back({n, m});
        det.push_back({"path6", path_graph(6)});
        det.push_back({"cycle5", cycle_graph(5)});
        det.push_back({"two_components", two_components(3, 3)});
    }
    int checked = 0;
    for (const auto& [name, mdp] : det) {
        for (int g = 0; g < mdp.n_states(); ++g) {
            const auto dist = bfs_to(mdp, g);
            const auto acts = gcrl_oracle(mdp, g).policy.actions();
            for (int s = 0; s < mdp.n_states(); ++s) {
                if (s == g || dist[static_cast<std::size_t>(s)] < 0) continue;
                int next = 0;
                for (int t = 0; t < mdp.n_states(); ++t)
                    if (mdp.p(s, acts[static_cast<std::size_t>(s)], t) > 0.5) next = t;
                const bool ok = dist[static_cast<std::size_t>(next)] == dist[static_cast<std::size_t>(s)] - 1;
                res.expect(ok, name + ": goal " + std::to_string(g) + ", state " + std::to_string(s) +
                                   " does not step along a shortest path");
                ++checked;
            }
        }
    }
    res.summary = "k=1 distortion max " + fmt(dist_worst) + " (tau " + fmt(tau) + "); realizable regret max " +
                  sci(regret_worst) + "; " + std::to_string(checked) + " goal-policy steps checked against BFS";
    res.csv = csv.str();
    return res;
}

std::vector<std::unique_ptr<ZeroShotAgent>> all_agents(const FiniteMdp& mdp, std::uint64_t seed) {
    std::vector<std::unique_ptr<ZeroShotAgent>> out;
    for (const auto& m : method_ids()) {
        AgentConfig c;
        c.method = m;
        c.seed = seed;
        out.push_back(make_agent(c, mdp));
    }
    return out;
}

SuiteResult suite_harness(const SuiteOptions& opt) {
    SuiteResult res;
    std::ostringstream csv;
    const FiniteMdp mdp = opt.mdp ? *opt.mdp : chain4();
    const std::string mdp_id = opt.mdp ? opt.mdp_id : "chain4";
    TaskDistribution mix;
    mix.kind = TaskKind::mixture;
    mix.components.resize(2);
    mix.components[0].kind = TaskKind::goal;
    mix.components[1].kind = TaskKind::random_dense;
    const auto tasks = sample_tasks(mdp, mix, 16, 3);

    // purity and determinism
    auto run = [&](std::string& out) {
        auto agents = all_agents(mdp, 0);
        std::vector<EvalReport> reps;
        for (const auto& a : agents) {
            const std::uint64_t h = a->state_hash();
            try {
                reps.push_back(evaluate(*a, mdp, tasks, mdp_id));
            } catch (const PurityViolation& e) {
                res.expect(false, e.what());
                continue;
            }
            res.expect(a->state_hash() == h, a->method_id() + ": state hash changed across evaluate");
            for (const auto& t : reps.back().tasks)
                res.expect(t.regret >= -1e-8, a->method_id() + " " + t.task_id + ": negative regret " + sci(t.regret));
            if (a->method_id() == "sm-oracle")
                for (const auto& t : reps.back().tasks)
                    res.expect(t.regret <= 1e-8, "sm-oracle " + t.task_id + ": regret " + sci(t.regret));
        }
        out = report_csv(reps, true);
    };
    std::string a, b;
    run(a);
    run(b);
    res.expect(a == b, "reports differ between two runs with equal seeds");

    // inference-time split on the 8-state random MDP
    const FiniteMdp r8 = builtin_mdp("random8");
    const auto tasks8 = sample_tasks(r8, mix, 32, 5);
    std::map<std::string, double> ms;
    for (const std::string m : {"sm-oracle", "psm", "fb", "usf"}) {
        AgentConfig c;
        c.method = m;
        const auto agent = make_agent(c, r8);
        ms[m] = evaluate(*agent, r8, tasks8, "random8").mean_inference_ms;
    }
    const double slow = std::min(ms["sm-oracle"], ms["psm"]);
    const double fast = std::max(ms["fb"], ms["usf"]);
    res.expect(slow >= 2.0 * fast, "reward-free inference " + fmt(slow) + " ms is not 2x pseudo-reward-free " +
                                       fmt(fast) + " ms");
    csv << "method,mean_inference_ms\n";
    for (const auto& [m, v] : ms) csv << m << ',' << fmt(v) << '\n';
    std::ostringstream sum;
    sum.precision(3);
    sum << "8 agents pure and deterministic on " << mdp_id << "; random8 mean inference ms: sm-oracle "
        << ms["sm-oracle"] << ", psm " << ms["psm"] << ", fb " << ms["fb"] << ", usf " << ms["usf"]
        << " (ratio " << slow / fast << ")";
    res.summary = sum.str();
    res.csv = a + "\n" + csv.str();
    return res;
}

}  // namespace

const std::vector<std::string>& suite_names() {
    static const std::vector<std::string> names = {"smb",        "sf",        "gpi",       "theorem2", "eq31",
                                                   "fb-recon",   "psm-affine", "hilp-path", "harness"};
    return names;
}

SuiteResult run_suite(const std::string& name, const SuiteOptions& opt) {
    static const std::map<std::string, std::function<SuiteResult(const SuiteOptions&)>> table = {
        {"smb", suite_smb},           {"sf", suite_sf},           {"gpi", suite_gpi},
        {"theorem2", suite_theorem2}, {"eq31", suite_eq31},       {"fb-recon", suite_fb},
        {"psm-affine", suite_psm},    {"hilp-path", suite_hilp}, {"harness", suite_harness},
    };
    const auto it = table.find(name);
    if (it == table.end()) throw std::invalid_argument("unknown suite '" + name + "'");
    Stopwatch sw;
    SuiteResult r = it->second(opt);
    r.suite = name;
    r.seconds = sw.ms() / 1000.0;
    return r;
}

}  // namespace zsrl
