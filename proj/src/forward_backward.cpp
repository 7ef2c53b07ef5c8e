#include "zeroshot/forward_backward.hpp"

#include "zeroshot/successor_measure.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <cmath>
#include <sstream>

namespace zsrl {

Mat FbModel::covariance() const { return B.transpose() * rho.asDiagonal() * B; }

std::uint64_t FbModel::hash() const {
    Fnv1a h;
    h.add(static_cast<std::int64_t>(d));
    h.add(B);
    h.add(rho);
    for (const auto& z : z_grid) h.add(z);
    for (const auto& f : F) h.add(f);
    for (const auto& p : policies) h.add(p.probs());
    for (const auto& a : anchors) h.add(a);
    for (const auto& st : stages)
        for (const auto& [code, tab] : st.tables) {
            for (int c : code) h.add(static_cast<std::int64_t>(c));
            h.add(tab);
        }
    return h.value();
}

Vec embed_pairs(const FbModel& model, const Vec& rbar) {
    if (rbar.size() != model.n_pairs()) throw DimensionError("reward does not match model");
    return model.B.transpose() * model.rho.cwiseProduct(rbar);
}

TaskEmbedding embed_task(const FbModel& model, const FiniteMdp& mdp, const RewardFn& reward, bool z_normalize) {
    Vec z = embed_pairs(model, reward.by_pair(mdp));
    if (z_normalize && z.norm() > 0.0) z *= std::sqrt(static_cast<double>(model.d)) / z.norm();
    return {z, std::nullopt};
}

namespace {

Mat exact_density(const FiniteMdp& mdp, const Policy& pi) {
    // m = M D^{-1} with D = diag(rho) uniform
    return successor_measure(mdp, pi).m * static_cast<double>(mdp.n_pairs());
}

// rho-projection of rbar onto span(B).
Vec project_on_span(const Mat& B, const Vec& rho, const Vec& rbar) {
    const Mat C = B.transpose() * rho.asDiagonal() * B;
    const Vec z = B.transpose() * rho.cwiseProduct(rbar);
    return B * C.completeOrthogonalDecomposition().solve(z);
}

void fit_factors(const std::vector<Mat>& dens, int d, int sweeps, Mat& B, std::vector<Mat>& F, bool& normalized) {
    const Eigen::Index N = dens[0].rows();
    const Eigen::Index K = static_cast<Eigen::Index>(dens.size());
    Mat X(K * N, N);
    for (Eigen::Index k = 0; k < K; ++k) X.middleRows(k * N, N) = dens[static_cast<std::size_t>(k)];
    // spectral initialization: the truncated SVD is the rank-d optimum
    Eigen::BDCSVD<Mat> svd(X, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const double rootN = std::sqrt(static_cast<double>(N));
    B = svd.matrixV().leftCols(d) * rootN;
    Mat Fs = X * B / static_cast<double>(N);
    // alternating least-squares sweeps (ridge keeps zero directions finite)
    const double ridge = 1e-12;
    for (int it = 0; it < sweeps; ++it) {
        const Mat I = Mat::Identity(d, d);
        Fs = (X * B) * (B.transpose() * B + ridge * I).ldlt().solve(I);
        B = (X.transpose() * Fs) * (Fs.transpose() * Fs + ridge * I).ldlt().solve(I);
    }
    // normalize E_rho[B B^T] = I
    const Mat C = B.transpose() * B / static_cast<double>(N);
    Eigen::SelfAdjointEigenSolver<Mat> es(C);
    normalized = es.eigenvalues().minCoeff() > 1e-12 * std::max(1.0, es.eigenvalues().maxCoeff());
    if (normalized) {
        const Mat Q = es.eigenvectors();
        const Vec l = es.eigenvalues();
        B = B * Q * l.cwiseSqrt().cwiseInverse().asDiagonal();
        Fs = Fs * Q * l.cwiseSqrt().asDiagonal();
    }
    F.clear();
    for (Eigen::Index k = 0; k < K; ++k) F.push_back(Fs.middleRows(k * N, N));
}

}  // namespace

std::vector<double> fb_reconstruction_error(const FbModel& model, const FiniteMdp& mdp) {
    std::vector<double> out;
    for (std::size_t k = 0; k < model.F.size(); ++k) {
        const Mat M = successor_measure(mdp, model.policies[k]).m;
        const Mat R = model.F[k] * model.B.transpose() * model.rho.asDiagonal();
        out.push_back((R - M).norm() / M.norm());
    }
    return out;
}

FbModel fit_fb_oracle(const FiniteMdp& mdp, int d, const std::vector<RewardFn>& anchors,
                      const FbOracleConfig& cfg, FbFitReport* report) {
    const int N = mdp.n_pairs();
    if (d < 1 || d > N) throw DimensionError("rank d must lie in [1, S*A]");
    if (anchors.empty() && !cfg.fixed_policies) throw std::invalid_argument("need at least one anchor reward");
    FbModel model;
    model.n_states = mdp.n_states();
    model.n_actions = mdp.n_actions();
    model.d = d;
    model.rho = Vec::Constant(N, 1.0 / N);
    model.seed = cfg.seed;
    for (const auto& r : anchors) model.anchors.push_back(r.by_pair(mdp));

    std::vector<Policy> pols;
    if (cfg.fixed_policies) {
        pols = *cfg.fixed_policies;
        if (!anchors.empty() && pols.size() != anchors.size())
            throw DimensionError("fixed policies must match the anchors");
    } else {
        for (const auto& rb : model.anchors) pols.push_back(optimal_policy_pairs(mdp, rb).policy);
    }
    FbFitReport rep;
    bool normalized = false;
    for (int round = 0; round < std::max(1, cfg.max_rounds); ++round) {
        std::vector<Mat> dens;
        for (const auto& p : pols) dens.push_back(exact_density(mdp, p));
        fit_factors(dens, d, cfg.als_sweeps, model.B, model.F, normalized);
        rep.rounds = round + 1;
        if (cfg.fixed_policies) break;
        bool changed = false;
        for (std::size_t k = 0; k < pols.size(); ++k) {
            const Vec rhat = project_on_span(model.B, model.rho, model.anchors[k]);
            Policy next = optimal_policy_pairs(mdp, rhat).policy;
            if (!(next == pols[k])) {
                pols[k] = next;
                changed = true;
            }
        }
        if (!changed) break;
    }
    model.policies = pols;
    model.z_grid.clear();
    for (std::size_t k = 0; k < pols.size(); ++k)
        model.z_grid.push_back(k < model.anchors.size() ? embed_pairs(model, model.anchors[k]) : Vec::Zero(d));
    Fnv1a h;
    h.add(static_cast<std::int64_t>(cfg.max_rounds));
    h.add(static_cast<std::int64_t>(cfg.als_sweeps));
    h.add(static_cast<std::int64_t>(d));
    model.config_hash = h.value();

    rep.rel_error = fb_reconstruction_error(model, mdp);
    rep.normalized = normalized;
    for (double e : rep.rel_error) rep.max_rel_error = std::max(rep.max_rel_error, e);
    if (report) *report = rep;
    return model;
}

// ---------------------------------------------------------------- TD training

double fb_loss(const FbModel& model, const FiniteMdp& mdp) {
    const int N = model.n_pairs();
    const Mat Dinv = Mat::Identity(N, N) * static_cast<double>(N);
    double loss = 0.0;
    for (std::size_t k = 0; k < model.F.size(); ++k) {
        const Mat P = pair_transition(mdp, model.policies[k]);
        const Mat m = model.F[k] * model.B.transpose();
        const Mat R = m - Dinv - mdp.gamma() * P * m;
        loss += weighted_sq(R, model.rho, model.rho);
    }
    return loss;
}

namespace {

void update_policies(FbModel& model, const FiniteMdp& mdp, std::vector<std::vector<int>>& acts, double hyst) {
    const int S = model.n_states, A = model.n_actions;
    for (std::size_t k = 0; k < model.F.size(); ++k) {
        const Vec z = embed_pairs(model, model.anchors[k]);
        const Vec qf = model.F[k] * z;
        const double tol = hyst * std::max(1e-300, qf.cwiseAbs().maxCoeff());
        for (int s = 0; s < S; ++s) {
            const int b = argmax_lowest(qf.segment(s * A, A));
            int& cur = acts[k][static_cast<std::size_t>(s)];
            if (qf[s * A + b] > qf[s * A + cur] + tol) cur = b;
        }
        model.policies[k] = Policy::from_actions(A, acts[k]);
    }
    (void)mdp;
}

}  // namespace

FbModel train_fb_td(const FiniteMdp& mdp, int d, const std::vector<RewardFn>& anchors, const FbTdConfig& cfg,
                    FbTdReport* report, const FbModel* init) {
    const int N = mdp.n_pairs(), S = mdp.n_states(), A = mdp.n_actions();
    if (d < 1) throw DimensionError("rank d must be positive");
    if (anchors.empty()) throw std::invalid_argument("need at least one anchor reward");
    const double g = mdp.gamma();
    FbModel model;
    model.n_states = S;
    model.n_actions = A;
    model.d = d;
    model.rho = Vec::Constant(N, 1.0 / N);
    model.seed = cfg.seed;
    for (const auto& r : anchors) model.anchors.push_back(r.by_pair(mdp));
    const std::size_t K = anchors.size();

    std::vector<std::vector<int>> acts(K, std::vector<int>(static_cast<std::size_t>(S), 0));
    if (init) {
        if (init->d != d || init->F.size() != K || init->n_pairs() != N)
            throw DimensionError("initial model does not match");
        model.B = init->B;
        model.F = init->F;
        for (std::size_t k = 0; k < K; ++k) acts[k] = init->policies[k].actions();
    } else {
        Rng rng(cfg.seed);
        model.B = gaussian_matrix(N, d, rng, cfg.init_scale);
        for (std::size_t k = 0; k < K; ++k) model.F.push_back(gaussian_matrix(N, d, rng, cfg.init_scale));
    }
    model.policies.assign(K, Policy::from_actions(A, acts[0]));
    for (std::size_t k = 0; k < K; ++k) model.policies[k] = Policy::from_actions(A, acts[k]);

    const Vec& rho = model.rho;
    const Mat D = rho.asDiagonal();
    const Mat Dinv = Mat::Identity(N, N) * static_cast<double>(N);
    const Mat Id = Mat::Identity(d, d);
    std::vector<Mat> Ft = model.F;
    Mat Bt = model.B;
    std::vector<Adam> optF(K, Adam(N, d, cfg.lr));
    Adam optB(N, d, cfg.lr);
    std::vector<Mat> P(K);
    FbTdReport rep;

    auto total_loss = [&](bool use_target) {
        double loss = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
            const Mat m = model.F[k] * model.B.transpose();
            const Mat next = use_target ? Mat(Ft[k] * Bt.transpose()) : m;
            loss += weighted_sq(m - Dinv - g * P[k] * next, rho, rho);
        }
        const Mat C = model.B.transpose() * D * model.B;
        return loss + cfg.lambda_cov * (C - Id).squaredNorm();
    };

    for (std::size_t k = 0; k < K; ++k) P[k] = pair_transition(mdp, model.policies[k]);
    rep.initial_loss = total_loss(false);
    const double limit = 10.0 * std::max(rep.initial_loss, 1e-8);

    for (long step = 0; step < cfg.steps; ++step) {
        if (cfg.policy_every > 0 && step % cfg.policy_every == 0) {
            update_policies(model, mdp, acts, cfg.hysteresis);
            for (std::size_t k = 0; k < K; ++k) P[k] = pair_transition(mdp, model.policies[k]);
            const double l = total_loss(false);
            rep.loss_trace.push_back(l);
            if (!std::isfinite(l) || l > limit) {
                std::ostringstream os;
                os << "FB training diverged at step " << step << ": loss " << l << " (initial "
                   << rep.initial_loss << ")";
                throw TrainingDiverged(os.str());
            }
        }
        const double lr = cosine_lr(cfg.lr, step, cfg.steps);
        const Mat C = model.B.transpose() * D * model.B;
        Mat gB = cfg.lambda_cov * 4.0 * D * model.B * (C - Id);
        std::vector<Mat> gF(K);
        for (std::size_t k = 0; k < K; ++k) {
            const Mat& Fs = cfg.target_network ? Ft[k] : model.F[k];
            const Mat& Bs = cfg.target_network ? Bt : model.B;
            const Mat m = model.F[k] * model.B.transpose();
            const Mat R = m - Dinv - g * P[k] * (Fs * Bs.transpose());
            const Mat G = 2.0 * D * R * D;
            gF[k] = G * model.B;
            gB += G.transpose() * model.F[k];
            if (cfg.lambda_diag > 0.0) {
                const Vec z = embed_pairs(model, model.anchors[k]);
                const Vec e = model.F[k] * z - (model.anchors[k] + g * P[k] * (Fs * z));
                gF[k] += cfg.lambda_diag * 2.0 * D * e * z.transpose();
            }
        }
        if (cfg.adam) {
            for (std::size_t k = 0; k < K; ++k) {
                optF[k].lr = lr;
                optF[k].step(model.F[k], gF[k]);
            }
            optB.lr = lr;
            optB.step(model.B, gB);
        } else {
            for (std::size_t k = 0; k < K; ++k) model.F[k] -= lr * gF[k];
            model.B -= lr * gB;
        }
        if (cfg.target_network) {
            for (std::size_t k = 0; k < K; ++k) Ft[k] = cfg.polyak * Ft[k] + (1.0 - cfg.polyak) * model.F[k];
            Bt = cfg.polyak * Bt + (1.0 - cfg.polyak) * model.B;
        } else {
            Ft = model.F;
            Bt = model.B;
        }
    }
    update_policies(model, mdp, acts, cfg.hysteresis);
    for (std::size_t k = 0; k < K; ++k) P[k] = pair_transition(mdp, model.policies[k]);
    rep.final_loss = total_loss(false);
    model.z_grid.clear();
    for (std::size_t k = 0; k < K; ++k) model.z_grid.push_back(embed_pairs(model, model.anchors[k]));
    Fnv1a h;
    h.add(cfg.lr);
    h.add(static_cast<std::int64_t>(cfg.steps));
    h.add(cfg.lambda_cov);
    h.add(cfg.lambda_diag);
    h.add(cfg.polyak);
    h.add(static_cast<std::int64_t>(cfg.target_network));
    model.config_hash = h.value();
    rep.rel_error = fb_reconstruction_error(model, mdp);
    if (report) *report = rep;
    return model;
}

// ---------------------------------------------------------------- inference

FbInference fb_zero_shot_pairs(const FbModel& model, const Vec& rbar, const FbInferenceOptions& opt) {
    if (model.F.empty()) throw std::invalid_argument("FB model has an empty z grid");
    const int S = model.n_states, A = model.n_actions;
    Vec z = embed_pairs(model, rbar);
    const double scale = 1.0 + rbar.cwiseAbs().maxCoeff() * model.B.cwiseAbs().maxCoeff();
    FbInference out{Policy::uniform(1, 1), {}, z, -1, z.norm() <= 1e-12 * scale};
    const double root_d = std::sqrt(static_cast<double>(model.d));
    auto normalize = [&](const Vec& v) { return v.norm() > 0.0 ? Vec(v * root_d / v.norm()) : v; };
    if (opt.z_normalize) z = normalize(z);
    out.z = z;

    std::vector<double> dist(model.z_grid.size());
    for (std::size_t k = 0; k < model.z_grid.size(); ++k) {
        const Vec zk = opt.z_normalize ? normalize(model.z_grid[k]) : model.z_grid[k];
        dist[k] = (zk - z).norm();
        if (out.grid_index < 0 || dist[k] < dist[static_cast<std::size_t>(out.grid_index)])
            out.grid_index = static_cast<int>(k);
    }
    Mat Fz;
    if (opt.f_interp && dist[static_cast<std::size_t>(out.grid_index)] > 1e-12) {
        Fz = Mat::Zero(model.n_pairs(), model.d);
        double wsum = 0.0;
        for (std::size_t k = 0; k < dist.size(); ++k) {
            const double w = 1.0 / (dist[k] * dist[k]);
            Fz += w * model.F[k];
            wsum += w;
        }
        Fz /= wsum;
    } else {
        Fz = model.F[static_cast<std::size_t>(out.grid_index)];
    }
    const Vec qf = Fz * z;
    out.values.q = Eigen::Map<const Mat>(qf.data(), A, S).transpose();
    out.policy = greedy_policy(out.values.q);
    out.values.v = out.policy.probs().cwiseProduct(out.values.q).rowwise().sum();
    return out;
}

FbInference fb_zero_shot(const FbModel& model, const FiniteMdp& mdp, const RewardFn& reward,
                         const FbInferenceOptions& opt) {
    if (mdp.n_states() != model.n_states || mdp.n_actions() != model.n_actions)
        throw DimensionError("mdp does not match FB model");
    return fb_zero_shot_pairs(model, reward.by_pair(mdp), opt);
}

// ---------------------------------------------------------------- AWARE

namespace {

std::vector<int> quantize(const AwareStage& st, const Vec& prefix, int bins) {
    std::vector<int> code(static_cast<std::size_t>(prefix.size()));
    for (Eigen::Index j = 0; j < prefix.size(); ++j) {
        const auto u = static_cast<std::size_t>(j);
        const double x = (prefix[j] - st.lo[u]) / st.width[u] + st.dither[u];
        code[u] = static_cast<int>(std::clamp(std::floor(x), 0.0, static_cast<double>(bins - 1)));
    }
    return code;
}

const Mat& lookup(const AwareStage& st, const std::vector<int>& code) {
    if (auto it = st.tables.find(code); it != st.tables.end()) return it->second;
    // unseen code: nearest trained code in L1 over bins (first in key order on ties)
    const Mat* best = nullptr;
    long bd = 0;
    for (const auto& [c, tab] : st.tables) {
        long dist = 0;
        for (std::size_t j = 0; j < c.size(); ++j) dist += std::labs(static_cast<long>(c[j] - code[j]));
        if (!best || dist < bd) {
            best = &tab;
            bd = dist;
        }
    }
    return *best;
}

}  // namespace

void train_aware(FbModel& model, const AwareConfig& cfg) {
    if (cfg.K < 1) throw std::invalid_argument("K must be at least 1");
    if (cfg.bins < 1) throw std::invalid_argument("AWARE quantizer needs at least one bin");
    const int N = model.n_pairs();
    const int di = cfg.stage_dim > 0 ? cfg.stage_dim : model.d;
    const double rootN = std::sqrt(static_cast<double>(N));
    model.stages.clear();
    const std::size_t K0 = model.anchors.size();
    // running prefixes and bases per anchor
    std::vector<Vec> prefix(K0);
    std::vector<Mat> basis(K0);
    for (std::size_t k = 0; k < K0; ++k) {
        prefix[k] = embed_pairs(model, model.anchors[k]);
        basis[k] = model.B;
    }
    for (int i = 2; i <= cfg.K; ++i) {
        AwareStage st;
        st.bins = cfg.bins;
        const Eigen::Index L = prefix.empty() ? 0 : prefix[0].size();
        for (Eigen::Index j = 0; j < L; ++j) {
            double lo = INFINITY, hi = -INFINITY;
            for (const auto& p : prefix) {
                lo = std::min(lo, p[j]);
                hi = std::max(hi, p[j]);
            }
            double w = (hi - lo) / cfg.bins;
            if (!(w > 1e-12)) w = 1.0;
            st.lo.push_back(lo);
            st.width.push_back(w);
            // dither depends only on the coordinate, so codes nest across stages
            const std::uint64_t hsh = splitmix64(cfg.seed ^ splitmix64(static_cast<std::uint64_t>(j)));
            st.dither.push_back(static_cast<double>(hsh >> 11) * 0x1.0p-53 * 0.5);
        }
        std::map<std::vector<int>, std::vector<std::size_t>> cells;
        for (std::size_t k = 0; k < K0; ++k) cells[quantize(st, prefix[k], cfg.bins)].push_back(k);
        for (const auto& [code, members] : cells) {
            const Mat& prev = basis[members.front()];
            Mat R(N, static_cast<Eigen::Index>(members.size()));
            for (std::size_t m = 0; m < members.size(); ++m)
                R.col(static_cast<Eigen::Index>(m)) =
                    model.anchors[members[m]] - project_on_span(prev, model.rho, model.anchors[members[m]]);
            Mat Bi = Mat::Zero(N, di);
            if (R.norm() > 1e-12) {
                Eigen::BDCSVD<Mat> svd(R, Eigen::ComputeThinU);
                const Vec& sv = svd.singularValues();
                for (Eigen::Index c = 0; c < std::min<Eigen::Index>(di, sv.size()); ++c)
                    if (sv[c] > 1e-10 * sv[0]) Bi.col(c) = svd.matrixU().col(c) * rootN;
            }
            st.tables.emplace(code, Bi);
        }
        for (std::size_t k = 0; k < K0; ++k) {
            const Mat& Bi = lookup(st, quantize(st, prefix[k], cfg.bins));
            const Vec zi = Bi.transpose() * model.rho.cwiseProduct(model.anchors[k]);
            Vec np(prefix[k].size() + zi.size());
            np << prefix[k], zi;
            prefix[k] = np;
            Mat nb(N, basis[k].cols() + Bi.cols());
            nb << basis[k], Bi;
            basis[k] = nb;
        }
        model.stages.push_back(std::move(st));
    }
}

TaskEmbedding aware_embed(const FbModel& model, const Vec& rbar, int K) {
    if (K < 1) throw std::invalid_argument("K must be at least 1");
    if (K > 1 + static_cast<int>(model.stages.size()))
        throw std::out_of_range("K = " + std::to_string(K) + " exceeds the trained stages (" +
                                std::to_string(1 + model.stages.size()) + ")");
    Vec z = embed_pairs(model, rbar);
    for (int i = 2; i <= K; ++i) {
        const AwareStage& st = model.stages[static_cast<std::size_t>(i - 2)];
        const Mat& Bi = lookup(st, quantize(st, z, st.bins));
        const Vec zi = Bi.transpose() * model.rho.cwiseProduct(rbar);
        Vec nz(z.size() + zi.size());
        nz << z, zi;
        z = nz;
    }
    return {z, std::nullopt};
}

TaskEmbedding aware_embed(const FbModel& model, const FiniteMdp& mdp, const RewardFn& reward, int K) {
    return aware_embed(model, reward.by_pair(mdp), K);
}

}  // namespace zsrl
