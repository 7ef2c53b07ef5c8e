#include "zeroshot/hilbert.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>

namespace zsrl {

double TemporalDistanceTable::triangle_violation() const {
    const Eigen::Index S = dist.rows();
    double worst = 0.0;
    for (Eigen::Index s = 0; s < S; ++s)
        for (Eigen::Index m = 0; m < S; ++m) {
            if (!std::isfinite(dist(s, m))) continue;
            for (Eigen::Index g = 0; g < S; ++g)
                if (std::isfinite(dist(m, g))) worst = std::max(worst, dist(s, g) - dist(s, m) - dist(m, g));
        }
    return worst;
}

namespace {

std::vector<std::vector<int>> successors(const FiniteMdp& mdp) {
    const int S = mdp.n_states(), A = mdp.n_actions();
    std::vector<std::vector<int>> out(static_cast<std::size_t>(S));
    for (int s = 0; s < S; ++s)
        for (int t = 0; t < S; ++t)
            for (int a = 0; a < A; ++a)
                if (mdp.p(s, a, t) > 0.0) {
                    out[static_cast<std::size_t>(s)].push_back(t);
                    break;
                }
    return out;
}

// Distances for one goal under SSP semantics.
Vec ssp_distances(const FiniteMdp& mdp, int g) {
    const int S = mdp.n_states(), A = mdp.n_actions();
    std::vector<char> in(static_cast<std::size_t>(S), 1);
    std::vector<std::vector<char>> safe;
    // States that can reach g with probability one under some policy: shrink
    // the candidate set until every state keeps a safe action that can make
    // progress towards g.
    while (true) {
        safe.assign(static_cast<std::size_t>(S), std::vector<char>(static_cast<std::size_t>(A), 0));
        for (int s = 0; s < S; ++s) {
            if (!in[static_cast<std::size_t>(s)]) continue;
            for (int a = 0; a < A; ++a) {
                bool ok = true;
                for (int t = 0; t < S && ok; ++t)
                    if (mdp.p(s, a, t) > 0.0 && !in[static_cast<std::size_t>(t)]) ok = false;
                safe[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)] = ok;
            }
        }
        std::vector<char> reach(static_cast<std::size_t>(S), 0);
        reach[static_cast<std::size_t>(g)] = in[static_cast<std::size_t>(g)];
        bool grew = true;
        while (grew) {
            grew = false;
            for (int s = 0; s < S; ++s) {
                if (reach[static_cast<std::size_t>(s)] || !in[static_cast<std::size_t>(s)]) continue;
                for (int a = 0; a < A && !reach[static_cast<std::size_t>(s)]; ++a) {
                    if (!safe[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)]) continue;
                    for (int t = 0; t < S; ++t)
                        if (mdp.p(s, a, t) > 0.0 && reach[static_cast<std::size_t>(t)]) {
                            reach[static_cast<std::size_t>(s)] = 1;
                            grew = true;
                            break;
                        }
                }
            }
        }
        if (reach == in) break;
        in = reach;
    }
    Vec D = Vec::Zero(S);
    for (int it = 0; it < 1000000; ++it) {
        double change = 0.0;
        for (int s = 0; s < S; ++s) {
            if (s == g || !in[static_cast<std::size_t>(s)]) continue;
            double best = INFINITY;
            for (int a = 0; a < A; ++a) {
                if (!safe[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)]) continue;
                double v = 1.0;
                for (int t = 0; t < S; ++t) v += mdp.p(s, a, t) * D[t];
                best = std::min(best, v);
            }
            change = std::max(change, std::abs(best - D[s]));
            D[s] = best;
        }
        if (change < 1e-13) break;
    }
    for (int s = 0; s < S; ++s)
        if (!in[static_cast<std::size_t>(s)]) D[s] = kUnreachable;
    return D;
}

}  // namespace

TemporalDistanceTable temporal_distance(const FiniteMdp& mdp) {
    const int S = mdp.n_states();
    TemporalDistanceTable td{Mat::Constant(S, S, kUnreachable)};
    if (mdp.deterministic()) {
        const auto succ = successors(mdp);
        for (int s = 0; s < S; ++s) {
            td.dist(s, s) = 0.0;
            std::deque<int> q{s};
            while (!q.empty()) {
                const int u = q.front();
                q.pop_front();
                for (int v : succ[static_cast<std::size_t>(u)])
                    if (!std::isfinite(td.dist(s, v))) {
                        td.dist(s, v) = td.dist(s, u) + 1.0;
                        q.push_back(v);
                    }
            }
        }
    } else {
        for (int g = 0; g < S; ++g) td.dist.col(g) = ssp_distances(mdp, g);
    }
    return td;
}

std::uint64_t HilbertEmbedding::hash() const {
    Fnv1a h;
    h.add(phi);
    h.add(tau);
    return h.value();
}

double expectile_loss(double u, double tau) { return std::abs(tau - (u < 0.0 ? 1.0 : 0.0)) * u * u; }

double embedding_distortion(const Mat& phi, const TemporalDistanceTable& td) {
    double worst = 0.0;
    for (Eigen::Index s = 0; s < phi.rows(); ++s)
        for (Eigen::Index g = 0; g < phi.rows(); ++g)
            if (std::isfinite(td.dist(s, g)))
                worst = std::max(worst, std::abs((phi.row(s) - phi.row(g)).norm() - td.dist(s, g)));
    return worst;
}

HilbertEmbedding train_hilbert(const FiniteMdp& mdp, int k, double tau, const HilbertConfig& cfg) {
    if (k < 1) throw DimensionError("latent dimension k must be positive");
    if (!(tau > 0.0 && tau < 1.0)) throw std::invalid_argument("expectile tau must lie in (0,1)");
    const int S = mdp.n_states(), A = mdp.n_actions();
    const TemporalDistanceTable td = temporal_distance(mdp);
    Rng rng(cfg.seed);

    Mat phi = gaussian_matrix(S, k, rng, 1e-3);
    if (cfg.spectral_init && S > 1) {
        Mat W = Mat::Zero(S, S);
        for (int s = 0; s < S; ++s)
            for (int a = 0; a < A; ++a) W.row(s) += mdp.transition().row(s * A + a) / A;
        W = 0.5 * (W + W.transpose());
        W.diagonal().setZero();
        Mat L = -W;
        L.diagonal() = W.rowwise().sum();
        Eigen::SelfAdjointEigenSolver<Mat> es(L);
        const int m = std::min(k, S - 1);
        phi.leftCols(m) += es.eigenvectors().middleCols(1, m) * cfg.init_scale;
    } else {
        phi *= cfg.init_scale / 1e-3;
    }

    // goals reachable from each state (reaching an unreachable goal has no
    // finite value, so those pairs carry no training signal)
    std::vector<std::vector<int>> goals(static_cast<std::size_t>(S));
    for (int s = 0; s < S; ++s)
        for (int g = 0; g < S; ++g)
            if (td.reachable(s, g)) goals[static_cast<std::size_t>(s)].push_back(g);

    std::vector<std::discrete_distribution<int>> next;
    for (int i = 0; i < S * A; ++i) {
        const Vec row = mdp.transition().row(i).transpose();
        next.emplace_back(row.data(), row.data() + row.size());
    }
    std::uniform_int_distribution<int> us(0, S - 1), ua(0, A - 1);
    std::uniform_real_distribution<double> u01(0.0, 1.0);

    Mat target = phi;
    Adam opt(S, k, cfg.lr);
    const double eps = 1e-12;
    for (long step = 0; step < cfg.steps; ++step) {
        opt.lr = cosine_lr(cfg.lr, step, cfg.steps);
        Mat grad = Mat::Zero(S, k);
        for (int j = 0; j < cfg.batch; ++j) {
            const int s = us(rng), a = ua(rng);
            const int s2 = next[static_cast<std::size_t>(s * A + a)](rng);
            int g;
            if (u01(rng) < cfg.p_hindsight) {
                g = s2;
            } else {
                const auto& gs = goals[static_cast<std::size_t>(s)];
                g = gs[std::uniform_int_distribution<std::size_t>(0, gs.size() - 1)(rng)];
            }
            if (s == g) continue;  // goal reached: no loss
            const Eigen::RowVectorXd ds = phi.row(s) - phi.row(g);
            const double ns = std::sqrt(ds.squaredNorm() + eps);
            const double nn = std::sqrt((target.row(s2) - target.row(g)).squaredNorm() + eps);
            const double u = -1.0 - cfg.gamma * nn + ns;  // target V - V with V = -norm
            const double w = u < 0.0 ? 1.0 - tau : tau;
            const double coef = 2.0 * w * u / ns / cfg.batch;
            grad.row(s) += coef * ds;
            grad.row(g) -= coef * ds;
        }
        opt.step(phi, grad);
        target = (1.0 - cfg.target_mix) * target + cfg.target_mix * phi;
        if (!phi.allFinite()) {
            std::ostringstream os;
            os << "Hilbert embedding training diverged at step " << step;
            throw TrainingDiverged(os.str());
        }
    }
    HilbertEmbedding emb{phi, k, tau, 0.0};
    emb.distortion = embedding_distortion(phi, td);
    return emb;
}

RewardFn latent_reward(const HilbertEmbedding& emb, const FiniteMdp& mdp, const Vec& z) {
    if (z.size() != emb.k) throw DimensionError("latent z does not match embedding dimension");
    if (emb.phi.rows() != mdp.n_states()) throw DimensionError("embedding does not match mdp");
    const Vec pz = emb.phi * z;
    const int S = mdp.n_states(), A = mdp.n_actions();
    RewardFn r = RewardFn::zeros(mdp);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a)
            for (int t = 0; t < S; ++t) r.r(s * A + a, t) = pz[t] - pz[s];
    return r;
}

FeatureMap hilbert_features(const HilbertEmbedding& emb, const FiniteMdp& mdp) {
    const int S = mdp.n_states(), A = mdp.n_actions();
    if (emb.phi.rows() != S) throw DimensionError("embedding does not match mdp");
    Mat f(static_cast<Eigen::Index>(S) * A * S, emb.k);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a)
            for (int t = 0; t < S; ++t)
                f.row((static_cast<Eigen::Index>(s) * A + a) * S + t) = emb.phi.row(t) - emb.phi.row(s);
    return FeatureMap(f, "hilbert");
}

HilbertBank build_hilbert_bank(const HilbertEmbedding& emb, const FiniteMdp& mdp, int n, std::uint64_t seed) {
    Rng rng(seed);
    HilbertBank bank;
    bank.directions = sphere_points(emb.k, n, rng);
    for (const auto& z : bank.directions) bank.policies.push_back(optimal_policy(mdp, latent_reward(emb, mdp, z)).policy);
    return bank;
}

HilbertInference hilbert_zero_shot(const HilbertEmbedding& emb, const FiniteMdp& mdp, const RewardFn& reward,
                                   const HilbertBank* bank) {
    Stopwatch sw;
    const Linearization lin = linearize_reward(mdp, reward, hilbert_features(emb, mdp));
    HilbertInference out{Policy::uniform(1, 1), lin.w, lin.residual, false, lin.rank_deficient, lin.warning, 0.0};
    const double rnorm = std::sqrt(default_sampling(mdp).dot(
        Eigen::Map<const Vec>(Mat(reward.r.transpose()).data(), reward.r.size()).cwiseAbs2()));
    out.degenerate = out.z.norm() <= 1e-9 * (1.0 + reward.r.cwiseAbs().maxCoeff()) ||
                     (rnorm > 0.0 && lin.residual >= rnorm * (1.0 - 1e-9));
    if (bank && !bank->directions.empty() && out.z.norm() > 0.0) {
        std::size_t best = 0;
        double bc = -INFINITY;
        for (std::size_t i = 0; i < bank->directions.size(); ++i) {
            const double c = bank->directions[i].dot(out.z);
            if (c > bc) {
                bc = c;
                best = i;
            }
        }
        out.policy = bank->policies[best];
    } else {
        out.policy = optimal_policy(mdp, latent_reward(emb, mdp, out.z)).policy;
    }
    out.inference_ms = sw.ms();
    return out;
}

GoalPolicy gcrl_oracle(const FiniteMdp& mdp, int goal) {
    const int S = mdp.n_states(), A = mdp.n_actions();
    if (goal < 0 || goal >= S) throw DimensionError("goal out of range");
    Mat P = mdp.transition();
    for (int a = 0; a < A; ++a) {
        P.row(goal * A + a).setZero();
        P(goal * A + a, goal) = 1.0;
    }
    const FiniteMdp absorbing(S, A, P, mdp.initial(), mdp.gamma());
    RewardFn r = RewardFn::constant(absorbing, -1.0);
    r.r.col(goal).setZero();
    const OptimalResult opt = optimal_policy(absorbing, r);
    GoalPolicy out{opt.policy, opt.values, false};
    // reachability by positive-probability paths into the goal
    std::vector<char> reach(static_cast<std::size_t>(S), 0);
    reach[static_cast<std::size_t>(goal)] = 1;
    bool grew = true;
    while (grew) {
        grew = false;
        for (int s = 0; s < S; ++s) {
            if (reach[static_cast<std::size_t>(s)]) continue;
            for (int a = 0; a < A && !reach[static_cast<std::size_t>(s)]; ++a)
                for (int t = 0; t < S; ++t)
                    if (mdp.p(s, a, t) > 0.0 && reach[static_cast<std::size_t>(t)]) {
                        reach[static_cast<std::size_t>(s)] = 1;
                        grew = true;
                        break;
                    }
        }
    }
    out.unreachable = S > 1 && std::count(reach.begin(), reach.end(), 1) == 1;
    return out;
}

}  // namespace zsrl
