#pragma once

#include "zeroshot/mdp.hpp"

#include <string>
#include <vector>

namespace zsrl {

/// Discounted state-action occupancy M[(s,a),(s',a')], counting the start
/// pair at t = 0, so M = (I - gamma P_pi)^{-1} and rows sum to 1/(1-gamma).
struct SuccessorMeasure {
    Mat m;
    double gamma = 0.0;
    std::string policy_id;

    /// M(s,a,X) for a set X given as pair indices.
    double measure(int sa, const std::vector<int>& X) const;
    double at(int sa, int sa2) const { return m(sa, sa2); }
};

SuccessorMeasure successor_measure(const FiniteMdp& mdp, const Policy& pi,
                                   std::string policy_id = {});

/// sup-norm of M - (I + gamma P_pi M).
double sm_bellman_residual(const FiniteMdp& mdp, const Policy& pi, const SuccessorMeasure& sm);

/// Q(s,a) = sum_{(s',a')} M[(s,a),(s',a')] rbar(s',a'), where rbar is the
/// reward marginalized over s'.  The policy is needed only for V.
ValueTable value_from_sm(const FiniteMdp& mdp, const SuccessorMeasure& sm, const RewardFn& reward,
                         const Policy& pi);
/// Flat Q (length S*A) without the V view.
Vec q_from_sm(const SuccessorMeasure& sm, const Vec& rbar);

struct SmSearchResult {
    Policy policy;
    ValueTable values;
    double objective = 0.0;  // expected return from p0
    std::uint64_t policies_searched = 0;
};

/// Reward-free inference by explicit search: the deterministic policy whose
/// occupancy maximizes the p0-expected return.  The first policy in
/// lexicographic order wins ties.
SmSearchResult infer_policy_from_sm_space(const FiniteMdp& mdp, const RewardFn& reward,
                                          std::uint64_t cap = kDefaultPolicyCap);

/// Precomputed state-action occupancies d_pi = p0-started rows of M for every
/// deterministic policy; the search at inference is a dot product per policy.
class OccupancyBank {
public:
    explicit OccupancyBank(const FiniteMdp& mdp, std::uint64_t cap = kDefaultPolicyCap);

    std::size_t size() const { return actions_.size(); }
    /// Index of the best policy for rbar (first on ties).
    std::size_t best(const Vec& rbar) const;
    const std::vector<int>& actions(std::size_t i) const { return actions_[i]; }
    const Mat& occupancies() const { return occ_; }

private:
    std::vector<std::vector<int>> actions_;
    Mat occ_;  // one row per policy, length S*A
};

/// d^T = mu0^T M with mu0(s,a) = p0(s) pi(a|s): the discounted pair occupancy
/// from the initial distribution.
Vec initial_occupancy(const FiniteMdp& mdp, const Policy& pi);

}  // namespace zsrl
