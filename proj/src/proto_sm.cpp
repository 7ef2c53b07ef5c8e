#include "zeroshot/proto_sm.hpp"

#include "zeroshot/successor_measure.hpp"
#include "zeroshot/util.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace zsrl {

Policy codebook_policy(std::uint64_t v, const FiniteMdp& mdp) {
    std::vector<int> acts(static_cast<std::size_t>(mdp.n_states()));
    const auto A = static_cast<std::uint64_t>(mdp.n_actions());
    for (int s = 0; s < mdp.n_states(); ++s)
        acts[static_cast<std::size_t>(s)] =
            static_cast<int>(splitmix64(v ^ splitmix64(static_cast<std::uint64_t>(s))) % A);
    return Policy::from_actions(mdp.n_actions(), acts);
}

std::vector<std::uint64_t> codebook_codes(std::size_t size, std::uint64_t seed) {
    std::vector<std::uint64_t> out(size);
    const std::uint64_t base = splitmix64(seed);
    for (std::size_t i = 0; i < size; ++i) out[i] = base + i;
    return out;
}

Mat PsmModel::measure(const Vec& w) const {
    const Vec flat = Phi * w + b;
    const int N = n_pairs();
    return Eigen::Map<const Mat>(flat.data(), N, N).transpose();
}

std::uint64_t PsmModel::hash() const {
    Fnv1a h;
    h.add(Phi);
    h.add(b);
    h.add(W);
    for (auto c : codes) h.add(static_cast<std::int64_t>(c));
    h.add(gamma);
    return h.value();
}

namespace {

Vec flatten_rowmajor(const Mat& M) {
    const Mat Mt = M.transpose();
    return Eigen::Map<const Vec>(Mt.data(), Mt.size());
}

}  // namespace

Mat codebook_measures(const FiniteMdp& mdp, const std::vector<std::uint64_t>& codes) {
    const Eigen::Index NN = static_cast<Eigen::Index>(mdp.n_pairs()) * mdp.n_pairs();
    Mat X(static_cast<Eigen::Index>(codes.size()), NN);
    for (std::size_t i = 0; i < codes.size(); ++i)
        X.row(static_cast<Eigen::Index>(i)) =
            flatten_rowmajor(successor_measure(mdp, codebook_policy(codes[i], mdp)).m).transpose();
    return X;
}

PsmModel fit_psm_oracle(const FiniteMdp& mdp, int d, std::size_t codebook_size, std::uint64_t seed) {
    if (d < 1) throw DimensionError("rank d must be positive");
    if (codebook_size < static_cast<std::size_t>(d) + 1)
        throw std::invalid_argument("codebook_size must be at least d + 1");
    PsmModel model;
    model.n_states = mdp.n_states();
    model.n_actions = mdp.n_actions();
    model.gamma = mdp.gamma();
    model.d = d;
    model.seed = seed;
    model.codes = codebook_codes(codebook_size, seed);
    const Mat X = codebook_measures(mdp, model.codes);
    model.b = X.colwise().mean().transpose();
    const Mat Xc = X.rowwise() - model.b.transpose();
    model.Phi = Mat::Zero(X.cols(), d);
    if (Xc.norm() > 0.0) {
        Eigen::BDCSVD<Mat> svd(Xc, Eigen::ComputeThinV);
        const Vec& sv = svd.singularValues();
        for (Eigen::Index i = 0; i < sv.size(); ++i)
            if (sv[i] > 1e-10 * sv[0]) ++model.effective_rank;
        const Eigen::Index keep = std::min<Eigen::Index>(d, model.effective_rank);
        model.Phi.leftCols(keep) = svd.matrixV().leftCols(keep);
    }
    model.W = Xc * model.Phi;
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        const Vec rec = model.Phi * model.W.row(i).transpose() + model.b;
        model.max_residual = std::max(model.max_residual, (X.row(i).transpose() - rec).norm() / X.row(i).norm());
    }
    return model;
}

double psm_affine_residual(const PsmModel& model, const Mat& M) {
    const Vec x = flatten_rowmajor(M);
    if (x.size() != model.b.size()) throw DimensionError("measure does not match model");
    // least squares in case Phi is not orthonormal (e.g. after TD training)
    const Vec w = model.Phi.colPivHouseholderQr().solve(x - model.b);
    return (x - model.Phi * w - model.b).norm() / x.norm();
}

// ---------------------------------------------------------------- TD training

namespace {

struct PsmTdState {
    std::vector<Mat> P;  // pair transitions per code
};

double code_loss(const Mat& M, const Mat& Mnext, const Mat& P, double g) {
    const Eigen::Index N = M.rows();
    return (M - Mat::Identity(N, N) - g * P * Mnext).squaredNorm();
}

}  // namespace

double psm_loss(const PsmModel& model, const FiniteMdp& mdp) {
    double loss = 0.0;
    for (std::size_t v = 0; v < model.codes.size(); ++v) {
        const Mat M = model.measure(model.W.row(static_cast<Eigen::Index>(v)).transpose());
        loss += code_loss(M, M, pair_transition(mdp, codebook_policy(model.codes[v], mdp)), mdp.gamma());
    }
    return loss / static_cast<double>(model.codes.size());
}

PsmModel train_psm_td(const FiniteMdp& mdp, int d, std::size_t codebook_size, const PsmTdConfig& cfg,
                      PsmTdReport* report, const PsmModel* init) {
    const int N = mdp.n_pairs();
    const Eigen::Index NN = static_cast<Eigen::Index>(N) * N;
    const double g = mdp.gamma();
    PsmModel model;
    model.n_states = mdp.n_states();
    model.n_actions = mdp.n_actions();
    model.gamma = g;
    model.d = d;
    model.seed = cfg.seed;
    model.codes = codebook_codes(codebook_size, cfg.seed);
    const auto V = static_cast<Eigen::Index>(codebook_size);
    Rng rng(cfg.seed);
    if (init) {
        if (init->d != d || init->codes != model.codes || init->n_pairs() != N)
            throw DimensionError("initial PSM model does not match");
        model.Phi = init->Phi;
        model.b = init->b;
        model.W = init->W;
    } else {
        model.Phi = gaussian_matrix(NN, d, rng, cfg.init_scale);
        model.b = Vec::Constant(NN, 1.0 / (1.0 - g) / N);
        model.W = gaussian_matrix(V, d, rng, cfg.init_scale);
    }
    std::vector<Mat> P;
    for (auto c : model.codes) P.push_back(pair_transition(mdp, codebook_policy(c, mdp)));
    const Mat I = Mat::Identity(N, N);

    Mat Pt = model.Phi, Wt = model.W;
    Vec bt = model.b;
    Adam oP(NN, d, cfg.lr), ob(NN, 1, cfg.lr), oW(V, d, cfg.lr);
    PsmTdReport rep;
    rep.initial_loss = psm_loss(model, mdp);
    const double limit = 10.0 * std::max(rep.initial_loss, 1e-8);
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(V));
    for (Eigen::Index v = 0; v < V; ++v) idx[static_cast<std::size_t>(v)] = v;
    const std::size_t batch = cfg.batch == 0 ? codebook_size : std::min(cfg.batch, codebook_size);

    for (long step = 0; step < cfg.steps; ++step) {
        if (step % 100 == 0) {
            const double l = psm_loss(model, mdp);
            rep.loss_trace.push_back(l);
            if (!std::isfinite(l) || l > limit) {
                std::ostringstream os;
                os << "PSM training diverged at step " << step << ": loss " << l << " (initial "
                   << rep.initial_loss << ")";
                throw TrainingDiverged(os.str());
            }
        }
        if (batch < codebook_size) std::shuffle(idx.begin(), idx.end(), rng);
        Mat gPhi = Mat::Zero(NN, d), gW = Mat::Zero(V, d);
        Vec gb = Vec::Zero(NN);
        const Mat& Ps = cfg.target_network ? Pt : model.Phi;
        const Mat& Ws = cfg.target_network ? Wt : model.W;
        const Vec& bs = cfg.target_network ? bt : model.b;
        for (std::size_t k = 0; k < batch; ++k) {
            const Eigen::Index v = idx[k];
            const Vec mflat = model.Phi * model.W.row(v).transpose() + model.b;
            const Vec tflat = Ps * Ws.row(v).transpose() + bs;
            const Mat M = Eigen::Map<const Mat>(mflat.data(), N, N).transpose();
            const Mat Mn = Eigen::Map<const Mat>(tflat.data(), N, N).transpose();
            const Mat G = 2.0 * (M - I - g * P[static_cast<std::size_t>(v)] * Mn) / static_cast<double>(batch);
            const Vec gflat = flatten_rowmajor(G);
            gPhi.noalias() += gflat * model.W.row(v);
            gb += gflat;
            gW.row(v) = (model.Phi.transpose() * gflat).transpose();
        }
        const double lr = cosine_lr(cfg.lr, step, cfg.steps);
        if (cfg.adam) {
            oP.lr = ob.lr = oW.lr = lr;
            oP.step(model.Phi, gPhi);
            Mat bm = model.b;
            ob.step(bm, gb);
            model.b = bm;
            oW.step(model.W, gW);
        } else {
            model.Phi -= lr * gPhi;
            model.b -= lr * gb;
            model.W -= lr * gW;
        }
        if (cfg.target_network) {
            Pt = cfg.polyak * Pt + (1.0 - cfg.polyak) * model.Phi;
            Wt = cfg.polyak * Wt + (1.0 - cfg.polyak) * model.W;
            bt = cfg.polyak * bt + (1.0 - cfg.polyak) * model.b;
        }
    }
    rep.final_loss = psm_loss(model, mdp);
    // report the fitted codebook residual against the exact measures
    const Mat X = codebook_measures(mdp, model.codes);
    for (Eigen::Index i = 0; i < V; ++i) {
        const Vec rec = model.Phi * model.W.row(i).transpose() + model.b;
        model.max_residual = std::max(model.max_residual, (X.row(i).transpose() - rec).norm() / X.row(i).norm());
    }
    model.effective_rank = d;
    if (report) *report = rep;
    return model;
}

double psm_relative_difference(const PsmModel& a, const PsmModel& b) {
    if (a.codes != b.codes) throw DimensionError("models use different codebooks");
    double worst = 0.0;
    for (Eigen::Index v = 0; v < a.W.rows(); ++v) {
        const Vec ma = a.Phi * a.W.row(v).transpose() + a.b;
        const Vec mb = b.Phi * b.W.row(v).transpose() + b.b;
        worst = std::max(worst, (ma - mb).norm() / mb.norm());
    }
    return worst;
}

// ---------------------------------------------------------------- LP inference

namespace {

// Continuation occupancy from the start weights mu, mu^T (M - I), decides the
// action wherever it has mass; states it never reaches (the start state of a
// policy that leaves it, for one) act greedily on the LP's own Q.
Policy extract_policy(const Mat& M, const Vec& mu, const Mat& q, int S, int A) {
    const Eigen::Index N = M.rows();
    const Vec occ = ((M - Mat::Identity(N, N)).transpose() * mu).cwiseMax(0.0);
    std::vector<int> acts(static_cast<std::size_t>(S), 0);
    const double scale = std::max(1.0, occ.maxCoeff());
    for (int s = 0; s < S; ++s) {
        const Vec row = occ.segment(s * A, A);
        if (row.sum() > 1e-10 * scale) acts[static_cast<std::size_t>(s)] = argmax_lowest(row);
        else acts[static_cast<std::size_t>(s)] = argmax_lowest(q.row(s).transpose());
    }
    return Policy::from_actions(A, acts);
}

Vec subgradient_lp(const Mat& Phi, const Vec& rhs, const Vec& cw, double R, int iters, int& used) {
    // maximize cw^T w - kappa * sum max(0, -(Phi w) - ... ) with rhs = b - I, i.e. Phi w >= -rhs
    const Eigen::Index d = Phi.cols();
    Vec w = Vec::Zero(d), best = w;
    const double kappa = 10.0 * std::max(1.0, cw.norm()) * static_cast<double>(Phi.rows());
    double best_val = -INFINITY;
    for (int t = 0; t < iters; ++t) {
        const Vec slack = Phi * w + rhs;  // must be >= 0
        const double viol = std::max(0.0, -slack.minCoeff());
        const double val = cw.dot(w) - kappa * (-slack.cwiseMin(0.0)).sum();
        if (viol <= 1e-9 && val > best_val) {
            best_val = val;
            best = w;
        }
        Vec gsub = cw;
        for (Eigen::Index i = 0; i < slack.size(); ++i)
            if (slack[i] < 0.0) gsub += kappa * Phi.row(i).transpose();
        const double step = 1.0 / (std::sqrt(static_cast<double>(t) + 1.0) * std::max(1e-12, gsub.norm()));
        w += step * gsub;
        w = w.cwiseMax(-R).cwiseMin(R);
    }
    used = iters;
    return best;
}

}  // namespace

PsmInference psm_zero_shot_pairs(const PsmModel& model, const Vec& p0, const Vec& rbar,
                                 const PsmInferenceOptions& opt) {
    Stopwatch sw;
    const int S = model.n_states, A = model.n_actions, N = model.n_pairs();
    if (rbar.size() != N || p0.size() != S) throw DimensionError("reward does not match PSM model");
    const Eigen::Index NN = static_cast<Eigen::Index>(N) * N;
    Vec mu(N);
    for (int s = 0; s < S; ++s) mu.segment(s * A, A).setConstant(p0[s] / A);
    // objective coefficients over vec(M): kron(mu, rbar)
    Vec C(NN);
    for (int i = 0; i < N; ++i) C.segment(static_cast<Eigen::Index>(i) * N, N) = mu[i] * rbar;
    Vec Ivec = Vec::Zero(NN);
    for (int i = 0; i < N; ++i) Ivec[static_cast<Eigen::Index>(i) * N + i] = 1.0;

    // drop zero directions and all-zero constraint rows
    std::vector<Eigen::Index> cols;
    for (Eigen::Index j = 0; j < model.Phi.cols(); ++j)
        if (model.Phi.col(j).cwiseAbs().maxCoeff() > 0.0) cols.push_back(j);
    const auto d = static_cast<Eigen::Index>(cols.size());
    Mat Phi(NN, d);
    for (Eigen::Index j = 0; j < d; ++j) Phi.col(j) = model.Phi.col(cols[static_cast<std::size_t>(j)]);
    const Vec rhs = (model.b - Ivec);
    std::vector<Eigen::Index> rows;
    for (Eigen::Index i = 0; i < NN; ++i)
        if (d > 0 && Phi.row(i).cwiseAbs().maxCoeff() > 1e-13) rows.push_back(i);

    double R = opt.trust_radius;
    if (R <= 0.0) {
        double wmax = 0.0;
        for (Eigen::Index v = 0; v < model.W.rows(); ++v) wmax = std::max(wmax, model.W.row(v).norm());
        R = 1e3 * (1.0 + wmax);
    }
    const Vec cw = d > 0 ? Vec(Phi.transpose() * C) : Vec(0);

    Vec wred = Vec::Zero(d);
    PsmInference out{Policy::uniform(1, 1), {}, 0.0, Vec::Zero(model.Phi.cols()), {}};
    if (d > 0) {
        const auto m = static_cast<Eigen::Index>(rows.size());
        if (opt.method == LpMethod::simplex) {
            // x = [w+; w-], rows: -Phi w <= b - I, w+ <= R, w- <= R
            Mat Alp = Mat::Zero(m + 2 * d, 2 * d);
            Vec blp(m + 2 * d);
            for (Eigen::Index i = 0; i < m; ++i) {
                const Eigen::Index r = rows[static_cast<std::size_t>(i)];
                Alp.block(i, 0, 1, d) = -Phi.row(r);
                Alp.block(i, d, 1, d) = Phi.row(r);
                blp[i] = std::max(0.0, rhs[r]);
            }
            Alp.block(m, 0, 2 * d, 2 * d).setIdentity();
            blp.tail(2 * d).setConstant(R);
            Vec clp(2 * d);
            clp << cw, -cw;
            const LpSolution sol = simplex_max(Alp, blp, clp, opt.pivot);
            wred = sol.x.head(d) - sol.x.tail(d);
            out.report.iterations = sol.iterations;
            out.report.status = sol.status;
            if (sol.status != LpStatus::optimal)
                throw std::runtime_error("PSM LP did not reach an optimum (iteration limit)");
        } else {
            Mat Pr(m, d);
            Vec rr(m);
            for (Eigen::Index i = 0; i < m; ++i) {
                Pr.row(i) = Phi.row(rows[static_cast<std::size_t>(i)]);
                rr[i] = rhs[rows[static_cast<std::size_t>(i)]];
            }
            int used = 0;
            wred = subgradient_lp(Pr, rr, cw, R, opt.subgradient_iters, used);
            out.report.iterations = used;
        }
        out.report.trust_region_active = (wred.cwiseAbs().array() >= R * (1.0 - 1e-9)).any();
        for (Eigen::Index j = 0; j < d; ++j) out.w[cols[static_cast<std::size_t>(j)]] = wred[j];
    }
    const Vec occ = model.Phi * out.w + model.b;
    out.report.feasibility_violation_max = std::max(0.0, (Ivec - occ).maxCoeff());
    out.report.min_occupancy = occ.minCoeff();
    out.report.objective = C.dot(occ);
    const Mat M = Eigen::Map<const Mat>(occ.data(), N, N).transpose();
    const Vec qf = M * rbar;
    out.values.q = Eigen::Map<const Mat>(qf.data(), A, S).transpose();
    out.policy = extract_policy(M, mu, out.values.q, S, A);
    out.values.v = out.policy.probs().cwiseProduct(out.values.q).rowwise().sum();
    out.claimed_value = p0.dot(out.values.q.rowwise().maxCoeff());
    out.report.inference_ms = sw.ms();
    return out;
}

PsmInference psm_zero_shot(const PsmModel& model, const FiniteMdp& mdp, const RewardFn& reward,
                           const PsmInferenceOptions& opt) {
    if (mdp.n_states() != model.n_states || mdp.n_actions() != model.n_actions)
        throw DimensionError("mdp does not match PSM model");
    return psm_zero_shot_pairs(model, mdp.initial(), reward.by_pair(mdp), opt);
}

}  // namespace zsrl
