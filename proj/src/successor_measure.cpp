#include "zeroshot/successor_measure.hpp"

#include <cmath>

namespace zsrl {

double SuccessorMeasure::measure(int sa, const std::vector<int>& X) const {
    double acc = 0.0;
    for (int j : X) acc += m(sa, j);
    return acc;
}

SuccessorMeasure successor_measure(const FiniteMdp& mdp, const Policy& pi, std::string policy_id) {
    const Mat P = pair_transition(mdp, pi);
    const Mat I = Mat::Identity(mdp.n_pairs(), mdp.n_pairs());
    Mat m = (I - mdp.gamma() * P).partialPivLu().solve(I);
    return {std::move(m), mdp.gamma(), std::move(policy_id)};
}

double sm_bellman_residual(const FiniteMdp& mdp, const Policy& pi, const SuccessorMeasure& sm) {
    const Mat P = pair_transition(mdp, pi);
    const Mat I = Mat::Identity(mdp.n_pairs(), mdp.n_pairs());
    return (sm.m - (I + mdp.gamma() * P * sm.m)).cwiseAbs().maxCoeff();
}

Vec q_from_sm(const SuccessorMeasure& sm, const Vec& rbar) {
    if (rbar.size() != sm.m.cols()) throw DimensionError("reward does not match successor measure");
    return sm.m * rbar;
}

ValueTable value_from_sm(const FiniteMdp& mdp, const SuccessorMeasure& sm, const RewardFn& reward,
                         const Policy& pi) {
    if (sm.m.rows() != mdp.n_pairs()) throw DimensionError("successor measure does not match mdp");
    const Vec q = q_from_sm(sm, reward.by_pair(mdp));
    ValueTable vt;
    vt.q = Eigen::Map<const Mat>(q.data(), mdp.n_actions(), mdp.n_states()).transpose();
    vt.v = pi.probs().cwiseProduct(vt.q).rowwise().sum();
    return vt;
}

Vec initial_occupancy(const FiniteMdp& mdp, const Policy& pi) {
    const Mat P = pair_transition(mdp, pi);
    const Mat I = Mat::Identity(mdp.n_pairs(), mdp.n_pairs());
    const Vec mu0 = pi.expand().transpose() * mdp.initial();
    return (I - mdp.gamma() * P).transpose().partialPivLu().solve(mu0);
}

SmSearchResult infer_policy_from_sm_space(const FiniteMdp& mdp, const RewardFn& reward,
                                          std::uint64_t cap) {
    const Vec rbar = reward.by_pair(mdp);
    std::vector<int> best_acts;
    double best = -INFINITY;
    std::uint64_t n = 0;
    const double tol = 1e-10 * std::max(1.0, rbar.cwiseAbs().maxCoeff() / (1.0 - mdp.gamma()));
    for_each_deterministic_policy(
        mdp,
        [&](const std::vector<int>& acts) {
            ++n;
            const Policy pi = Policy::from_actions(mdp.n_actions(), acts);
            const double score = initial_occupancy(mdp, pi).dot(rbar);
            if (best_acts.empty() || score > best + tol) {
                best = score;
                best_acts = acts;
            }
            return true;
        },
        cap);
    SmSearchResult out{Policy::from_actions(mdp.n_actions(), best_acts), {}, best, n};
    out.values = value_from_sm(mdp, successor_measure(mdp, out.policy), reward, out.policy);
    return out;
}

OccupancyBank::OccupancyBank(const FiniteMdp& mdp, std::uint64_t cap) {
    std::vector<Vec> rows;
    for_each_deterministic_policy(
        mdp,
        [&](const std::vector<int>& acts) {
            actions_.push_back(acts);
            rows.push_back(initial_occupancy(mdp, Policy::from_actions(mdp.n_actions(), acts)));
            return true;
        },
        cap);
    occ_.resize(static_cast<Eigen::Index>(rows.size()), mdp.n_pairs());
    for (std::size_t i = 0; i < rows.size(); ++i) occ_.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
}

std::size_t OccupancyBank::best(const Vec& rbar) const {
    if (rbar.size() != occ_.cols()) throw DimensionError("reward does not match occupancy bank");
    std::size_t arg = 0;
    double best = -INFINITY;
    const double tol = 1e-10 * std::max(1.0, occ_.row(0).sum() * rbar.cwiseAbs().maxCoeff());
    for (Eigen::Index i = 0; i < occ_.rows(); ++i) {
        // explicit loop: this is the per-policy search we want to account for
        double score = 0.0;
        for (Eigen::Index j = 0; j < occ_.cols(); ++j) score += occ_(i, j) * rbar[j];
        if (i == 0 || score > best + tol) {
            best = score;
            arg = static_cast<std::size_t>(i);
        }
    }
    return arg;
}

}  // namespace zsrl
