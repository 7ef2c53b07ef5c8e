#include "zeroshot/successor_features.hpp"

#include "zeroshot/successor_measure.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <sstream>

namespace zsrl {

// ---------------------------------------------------------------- features

FeatureMap::FeatureMap(Mat phi_, std::string name_)
    : phi(std::move(phi_)), d(static_cast<int>(phi.cols())), name(std::move(name_)) {
    if (!phi.allFinite()) throw InvalidModel("features have non-finite entries");
}

void FeatureMap::check(const FiniteMdp& mdp) const {
    if (phi.rows() != static_cast<Eigen::Index>(mdp.n_pairs()) * mdp.n_states())
        throw DimensionError("feature map does not match mdp");
}

Mat FeatureMap::by_pair(const FiniteMdp& mdp) const {
    check(mdp);
    const int S = mdp.n_states();
    Mat out(mdp.n_pairs(), d);
    for (int i = 0; i < mdp.n_pairs(); ++i)
        out.row(i) = mdp.transition().row(i) * phi.middleRows(static_cast<Eigen::Index>(i) * S, S);
    return out;
}

double FeatureMap::sup_norm() const {
    return phi.rows() == 0 || d == 0 ? 0.0 : phi.rowwise().norm().maxCoeff();
}

RewardFn FeatureMap::reward(const FiniteMdp& mdp, const Vec& w) const {
    check(mdp);
    if (w.size() != d) throw DimensionError("task weights do not match feature dimension");
    const Vec flat = phi * w;
    // flat is ordered (sa, s') with s' fastest
    return {Eigen::Map<const Mat>(flat.data(), mdp.n_states(), mdp.n_pairs()).transpose()};
}

FeatureMap one_hot_state_features(const FiniteMdp& mdp) {
    const int S = mdp.n_states();
    Mat phi = Mat::Zero(static_cast<Eigen::Index>(mdp.n_pairs()) * S, S);
    for (int i = 0; i < mdp.n_pairs(); ++i)
        for (int t = 0; t < S; ++t) phi(static_cast<Eigen::Index>(i) * S + t, t) = 1.0;
    return FeatureMap(phi, "onehot-state");
}

FeatureMap one_hot_pair_features(const FiniteMdp& mdp) {
    const int S = mdp.n_states(), N = mdp.n_pairs();
    Mat phi = Mat::Zero(static_cast<Eigen::Index>(N) * S, N);
    for (int i = 0; i < N; ++i)
        for (int t = 0; t < S; ++t) phi(static_cast<Eigen::Index>(i) * S + t, i) = 1.0;
    return FeatureMap(phi, "onehot-pair");
}

FeatureMap random_features(const FiniteMdp& mdp, int d, std::uint64_t seed) {
    Rng rng(seed);
    return FeatureMap(gaussian_matrix(static_cast<Eigen::Index>(mdp.n_pairs()) * mdp.n_states(), d, rng),
                      "random");
}

FeatureMap state_indicator_features(const FiniteMdp& mdp, const std::vector<int>& states) {
    const int S = mdp.n_states();
    Mat phi = Mat::Zero(static_cast<Eigen::Index>(mdp.n_pairs()) * S, static_cast<Eigen::Index>(states.size()));
    for (std::size_t k = 0; k < states.size(); ++k) {
        if (states[k] < 0 || states[k] >= S) throw DimensionError("indicator state out of range");
        for (int i = 0; i < mdp.n_pairs(); ++i)
            phi(static_cast<Eigen::Index>(i) * S + states[k], static_cast<Eigen::Index>(k)) = 1.0;
    }
    return FeatureMap(phi, "indicator");
}

FeatureMap laplacian_features(const FiniteMdp& mdp, int d) {
    const int S = mdp.n_states(), A = mdp.n_actions();
    if (d < 1 || d > S) throw DimensionError("laplacian feature dimension must be in [1, S]");
    Mat W = Mat::Zero(S, S);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) W.row(s) += mdp.transition().row(s * A + a) / A;
    W = 0.5 * (W + W.transpose());
    W.diagonal().setZero();
    Mat L = -W;
    L.diagonal() = W.rowwise().sum();
    Eigen::SelfAdjointEigenSolver<Mat> es(L);
    Mat U = es.eigenvectors().leftCols(d);
    // fix the sign so the largest-magnitude entry of each vector is positive
    for (int k = 0; k < d; ++k) {
        Eigen::Index idx;
        U.col(k).cwiseAbs().maxCoeff(&idx);
        if (U(idx, k) < 0) U.col(k) *= -1.0;
    }
    Mat phi(static_cast<Eigen::Index>(mdp.n_pairs()) * S, d);
    for (int i = 0; i < mdp.n_pairs(); ++i) phi.middleRows(static_cast<Eigen::Index>(i) * S, S) = U;
    return FeatureMap(phi, "laplacian");
}

FeatureMap make_features(const FiniteMdp& mdp, const std::string& kind, int d, std::uint64_t seed) {
    if (kind == "onehot-state") return one_hot_state_features(mdp);
    if (kind == "onehot-pair") return one_hot_pair_features(mdp);
    if (kind == "random") return random_features(mdp, d, seed);
    if (kind == "laplacian") return laplacian_features(mdp, d);
    throw std::invalid_argument("unknown feature kind '" + kind + "'");
}

// ---------------------------------------------------------------- successor features

Mat SuccessorFeatures::q(const Vec& w, int n_actions) const {
    const Vec qf = psi * w;
    return Eigen::Map<const Mat>(qf.data(), n_actions, qf.size() / n_actions).transpose();
}

SuccessorFeatures exact_sf(const FiniteMdp& mdp, const Policy& pi, const FeatureMap& features,
                           std::string policy_id) {
    const Mat phibar = features.by_pair(mdp);
    const Mat sys = Mat::Identity(mdp.n_pairs(), mdp.n_pairs()) - mdp.gamma() * pair_transition(mdp, pi);
    return {sys.partialPivLu().solve(phibar), std::move(policy_id)};
}

double sf_bellman_residual(const FiniteMdp& mdp, const Policy& pi, const FeatureMap& features,
                           const SuccessorFeatures& sf) {
    const Mat target = features.by_pair(mdp) + mdp.gamma() * pair_transition(mdp, pi) * sf.psi;
    const Mat diff = sf.psi - target;
    return diff.size() ? diff.cwiseAbs().maxCoeff() : 0.0;
}

namespace {

double projected_residual(const FiniteMdp& mdp, const Policy& pi, const FeatureMap& f, const Mat& psi,
                          const TdSfConfig& cfg) {
    const Mat diff = psi - (f.by_pair(mdp) + mdp.gamma() * pair_transition(mdp, pi) * psi);
    if (diff.size() == 0) return 0.0;
    if (cfg.projection) return (diff * *cfg.projection).cwiseAbs().maxCoeff();
    return diff.cwiseAbs().maxCoeff();
}

void apply_update(Mat& psi, Eigen::Index i, const Eigen::RowVectorXd& delta, double lr, const TdSfConfig& cfg) {
    if (cfg.projection) {
        const Vec& w = *cfg.projection;
        const double n2 = w.squaredNorm();
        if (n2 > 0.0) psi.row(i) += lr * (delta.dot(w) / n2) * w.transpose();
    } else {
        psi.row(i) += lr * delta;
    }
}

}  // namespace

TdSfResult td_sf(const FiniteMdp& mdp, const Policy& pi, const FeatureMap& features, const TdSfConfig& cfg) {
    const int N = mdp.n_pairs();
    const Mat phibar = features.by_pair(mdp);
    const Mat Ppi = pair_transition(mdp, pi);
    Mat psi = Mat::Zero(N, features.d);
    Mat target = psi;
    Rng rng(cfg.seed);
    std::uniform_int_distribution<int> pick(0, N - 1);
    TdSfResult out;
    const double g = mdp.gamma();
    long k = 0;
    double res = projected_residual(mdp, pi, features, psi, cfg);
    for (; k < cfg.updates && res > cfg.tol; ++k) {
        const int i = pick(rng);
        const Mat& src = cfg.target_network ? target : psi;
        const Eigen::RowVectorXd y = phibar.row(i) + g * Ppi.row(i) * src;
        const Eigen::RowVectorXd delta = y - psi.row(i);
        apply_update(psi, i, delta, cfg.lr, cfg);
        if (cfg.target_network) target = cfg.polyak * target + (1.0 - cfg.polyak) * psi;
        if ((k + 1) % N == 0) res = projected_residual(mdp, pi, features, psi, cfg);
    }
    res = projected_residual(mdp, pi, features, psi, cfg);
    out.sf = {psi, "td"};
    out.residual = res;
    out.updates = k;
    out.converged = res <= cfg.tol;
    return out;
}

TdSfResult td_sf(const std::vector<Transition>& samples, const FiniteMdp& shape, const Policy& pi,
                 const FeatureMap& features, const TdSfConfig& cfg) {
    features.check(shape);
    if (samples.empty()) throw std::invalid_argument("empty transition stream");
    const int S = shape.n_states(), A = shape.n_actions();
    Mat psi = Mat::Zero(shape.n_pairs(), features.d);
    Mat target = psi;
    const Mat& probs = pi.probs();
    const double g = shape.gamma();
    for (long k = 0; k < cfg.updates; ++k) {
        const Transition& t = samples[static_cast<std::size_t>(k) % samples.size()];
        if (t.s < 0 || t.s >= S || t.a < 0 || t.a >= A || t.s2 < 0 || t.s2 >= S)
            throw DimensionError("transition index out of range");
        const Mat& src = cfg.target_network ? target : psi;
        Eigen::RowVectorXd next = Eigen::RowVectorXd::Zero(features.d);
        for (int b = 0; b < A; ++b) next += probs(t.s2, b) * src.row(t.s2 * A + b);
        const Eigen::Index i = t.s * A + t.a;
        const Eigen::RowVectorXd y =
            features.phi.row(static_cast<Eigen::Index>(i) * S + t.s2) + g * next;
        const double lr = cfg.lr_decay > 0.0 ? cfg.lr / (1.0 + static_cast<double>(k) / cfg.lr_decay) : cfg.lr;
        apply_update(psi, i, y - psi.row(i), lr, cfg);
        if (cfg.target_network) target = cfg.polyak * target + (1.0 - cfg.polyak) * psi;
    }
    TdSfResult out;
    out.sf = {psi, "td-samples"};
    out.updates = cfg.updates;
    out.residual = projected_residual(shape, pi, features, psi, cfg);
    out.converged = out.residual <= cfg.tol;
    return out;
}

// ---------------------------------------------------------------- linearization

Vec default_sampling(const FiniteMdp& mdp) {
    const Mat Pt = mdp.transition().transpose();
    return Eigen::Map<const Vec>(Pt.data(), Pt.size()) / mdp.n_pairs();
}

namespace {

Vec flat_reward(const FiniteMdp& mdp, const RewardFn& reward) {
    reward.check(mdp);
    const Mat rt = reward.r.transpose();
    return Eigen::Map<const Vec>(rt.data(), rt.size());
}

}  // namespace

double linearization_error(const FiniteMdp& mdp, const RewardFn& reward, const FeatureMap& features,
                           const Vec& w, const std::optional<Vec>& sampling) {
    features.check(mdp);
    const Vec D = sampling ? *sampling : default_sampling(mdp);
    const Vec e = flat_reward(mdp, reward) - features.phi * w;
    return std::sqrt(std::max(0.0, D.dot(e.cwiseAbs2())));
}

Linearization linearize_reward(const FiniteMdp& mdp, const RewardFn& reward, const FeatureMap& features,
                               const std::optional<Vec>& sampling, double ridge) {
    features.check(mdp);
    const Vec D = sampling ? *sampling : default_sampling(mdp);
    if (D.size() != features.phi.rows()) throw DimensionError("sampling weights do not match transitions");
    if ((D.array() < 0).any()) throw std::invalid_argument("sampling weights must be nonnegative");
    const Vec r = flat_reward(mdp, reward);
    Linearization out;
    if (features.d == 0) {
        out.w = Vec(0);
        out.residual = std::sqrt(D.dot(r.cwiseAbs2()));
        return out;
    }
    const Mat G = features.phi.transpose() * D.asDiagonal() * features.phi;
    Eigen::SelfAdjointEigenSolver<Mat> es(G, Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues().minCoeff(), hi = es.eigenvalues().maxCoeff();
    if (hi <= 0.0 || lo <= 1e-12 * hi) {
        out.rank_deficient = true;
        std::ostringstream os;
        os << "feature Gram matrix is rank deficient (eigenvalues in [" << lo << ", " << hi
           << "]); ridge " << ridge << " applied";
        out.warning = os.str();
    }
    const Mat Greg = G + ridge * Mat::Identity(features.d, features.d);
    out.w = Greg.ldlt().solve(features.phi.transpose() * D.asDiagonal() * r);
    out.residual = linearization_error(mdp, reward, features, out.w, D);
    return out;
}

// ---------------------------------------------------------------- GPI

Policy gpi_policy(const std::vector<Mat>& q_tables, std::vector<int>& winners) {
    if (q_tables.empty()) throw std::invalid_argument("gpi_policy needs at least one Q table");
    const Eigen::Index S = q_tables[0].rows(), A = q_tables[0].cols();
    for (const auto& q : q_tables)
        if (q.rows() != S || q.cols() != A) throw DimensionError("Q tables differ in shape");
    Mat best = q_tables[0];
    Eigen::MatrixXi who = Eigen::MatrixXi::Zero(S, A);
    for (std::size_t i = 1; i < q_tables.size(); ++i)
        for (Eigen::Index s = 0; s < S; ++s)
            for (Eigen::Index a = 0; a < A; ++a)
                if (q_tables[i](s, a) > best(s, a)) {
                    best(s, a) = q_tables[i](s, a);
                    who(s, a) = static_cast<int>(i);
                }
    Policy pi = greedy_policy(best);
    const auto acts = pi.actions();
    winners.assign(static_cast<std::size_t>(S), 0);
    for (Eigen::Index s = 0; s < S; ++s) winners[static_cast<std::size_t>(s)] = who(s, acts[static_cast<std::size_t>(s)]);
    return pi;
}

Policy gpi_policy(const std::vector<Mat>& q_tables) {
    std::vector<int> w;
    return gpi_policy(q_tables, w);
}

// ---------------------------------------------------------------- USF

std::vector<Vec> default_task_grid(int d, std::uint64_t seed, int n_sphere) {
    Rng rng(seed);
    std::vector<Vec> grid = sphere_points(d, n_sphere, rng);
    for (int i = 0; i < d; ++i) grid.push_back(Vec::Unit(d, i));
    return grid;
}

UsfEntry sf_policy_iteration(const FiniteMdp& mdp, const FeatureMap& features, const Vec& e, int max_iter) {
    if (e.size() != features.d) throw DimensionError("task vector does not match features");
    const int S = mdp.n_states(), A = mdp.n_actions();
    std::vector<int> acts(static_cast<std::size_t>(S), 0);
    Policy pi = Policy::from_actions(A, acts);
    SuccessorFeatures sf = exact_sf(mdp, pi, features);
    int it = 0;
    for (; it < max_iter; ++it) {
        const Mat q = sf.q(e, A);
        const double eps = 1e-12 * std::max(1.0, q.cwiseAbs().maxCoeff());
        bool changed = false;
        for (int s = 0; s < S; ++s) {
            int best = acts[static_cast<std::size_t>(s)];
            for (int a = 0; a < A; ++a)
                if (q(s, a) > q(s, best) + eps) best = a;
            if (best != acts[static_cast<std::size_t>(s)]) {
                acts[static_cast<std::size_t>(s)] = best;
                changed = true;
            }
        }
        if (!changed) break;
        pi = Policy::from_actions(A, acts);
        sf = exact_sf(mdp, pi, features);
    }
    // store the lowest-index greedy policy of the converged values
    Policy greedy = greedy_policy(sf.q(e, A));
    if (!(greedy == pi)) sf = exact_sf(mdp, greedy, features);
    return {e, greedy, sf, std::nullopt, it};
}

UsfModel train_usf(const FiniteMdp& mdp, const FeatureMap& features, const std::vector<Vec>& task_grid,
                   const UsfConfig& cfg) {
    features.check(mdp);
    if (task_grid.empty()) throw std::invalid_argument("task grid is empty");
    UsfModel model{mdp, features, {}};
    for (std::size_t i = 0; i < task_grid.size(); ++i) {
        UsfEntry entry = sf_policy_iteration(mdp, features, task_grid[i], cfg.max_iter);
        if (cfg.td) {
            TdSfConfig tc = cfg.td_config;
            tc.seed = cfg.td_config.seed + i;
            entry.psi_tilde = td_sf(mdp, entry.policy, features, tc).sf;
        }
        model.grid.push_back(std::move(entry));
    }
    return model;
}

std::uint64_t UsfModel::hash() const {
    Fnv1a h;
    h.add(features.phi);
    for (const auto& g : grid) {
        h.add(g.e);
        h.add(g.policy.probs());
        h.add(g.psi.psi);
        if (g.psi_tilde) h.add(g.psi_tilde->psi);
    }
    return h.value();
}

UsfInference usf_zero_shot(const UsfModel& model, const RewardFn& reward) {
    Stopwatch sw;
    UsfInference out{Policy::uniform(1, 1), {}, {}, 0.0, 0.0};
    const Linearization lin = linearize_reward(model.mdp, reward, model.features);
    out.w = lin.w;
    out.linearization_residual = lin.residual;
    std::vector<Mat> qs;
    qs.reserve(model.grid.size());
    for (std::size_t i = 0; i < model.grid.size(); ++i)
        qs.push_back(model.used_psi(i).q(lin.w, model.mdp.n_actions()));
    out.policy = gpi_policy(qs, out.winners);
    out.inference_ms = sw.ms();
    return out;
}

BoundReport theorem2_bound(const UsfModel& model, const RewardFn& reward, std::uint64_t cap) {
    const FiniteMdp& mdp = model.mdp;
    const double g = mdp.gamma();
    const UsfInference inf = usf_zero_shot(model, reward);
    const Vec rbar = reward.by_pair(mdp);
    const RewardFn rlin = model.features.reward(mdp, inf.w);
    const Vec rbar_lin = rlin.by_pair(mdp);

    BoundReport rep;
    const OptimalResult opt = optimal_policy_pairs(mdp, rbar);
    const ValueTable achieved = evaluate_policy_pairs(mdp, rbar, inf.policy);
    rep.gap = (opt.values.q - achieved.q).cwiseAbs().maxCoeff();

    try {
        double worst = 0.0;
        for_each_deterministic_policy(
            mdp,
            [&](const std::vector<int>& acts) {
                const Policy pi = Policy::from_actions(mdp.n_actions(), acts);
                const Mat M = successor_measure(mdp, pi).m;
                worst = std::max(worst, (M * (rbar - rbar_lin)).cwiseAbs().maxCoeff());
                return true;
            },
            cap);
        rep.termA_exact = 2.0 * worst;
    } catch (const CapExceeded&) {
        rep.termA_exact.reset();
    }
    rep.termA_surrogate = 2.0 * (rbar - rbar_lin).norm() / (1.0 - g);

    double dmin = INFINITY, cmax = 0.0;
    for (std::size_t i = 0; i < model.grid.size(); ++i) {
        const auto& entry = model.grid[i];
        dmin = std::min(dmin, (inf.w - entry.e).norm());
        if (entry.psi_tilde && entry.psi.psi.size())
            cmax = std::max(cmax, (entry.psi.psi - entry.psi_tilde->psi).rowwise().norm().maxCoeff());
    }
    rep.termB = 2.0 / (1.0 - g) * model.features.sup_norm() * dmin;
    rep.termC = inf.w.norm() * cmax;
    rep.termC_gpi = 2.0 / (1.0 - g) * rep.termC;
    return rep;
}

}  // namespace zsrl
