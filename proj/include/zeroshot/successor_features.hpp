#pragma once

#include "zeroshot/mdp.hpp"
#include "zeroshot/util.hpp"

#include <optional>
#include <string>
#include <vector>

namespace zsrl {

/// Transition features phi(s,a,s') in R^d, stored with one row per
/// transition (row index (s*A + a)*S + s').
struct FeatureMap {
    Mat phi;
    int d = 0;
    std::string name;

    FeatureMap() = default;
    FeatureMap(Mat phi, std::string name = {});

    void check(const FiniteMdp& mdp) const;
    /// phibar(s,a) = E_{s'~p}[phi(s,a,s')], one row per pair.
    Mat by_pair(const FiniteMdp& mdp) const;
    /// max over transitions of the Euclidean norm of phi.
    double sup_norm() const;
    /// The reward r(s,a,s') = phi(s,a,s')^T w.
    RewardFn reward(const FiniteMdp& mdp, const Vec& w) const;
};

FeatureMap one_hot_state_features(const FiniteMdp& mdp);
FeatureMap one_hot_pair_features(const FiniteMdp& mdp);
FeatureMap random_features(const FiniteMdp& mdp, int d, std::uint64_t seed);
/// Indicators 1{s' = g} for the listed states.
FeatureMap state_indicator_features(const FiniteMdp& mdp, const std::vector<int>& states);
/// Smallest-eigenvalue eigenvectors of the Laplacian of the symmetrized
/// uniform-policy state graph, as functions of s'.
FeatureMap laplacian_features(const FiniteMdp& mdp, int d);
FeatureMap make_features(const FiniteMdp& mdp, const std::string& kind, int d, std::uint64_t seed);

struct SuccessorFeatures {
    Mat psi;  // (S*A) x d
    std::string policy_id;

    /// psi^T w as an S x A table.
    Mat q(const Vec& w, int n_actions) const;
};

SuccessorFeatures exact_sf(const FiniteMdp& mdp, const Policy& pi, const FeatureMap& features,
                           std::string policy_id = {});
double sf_bellman_residual(const FiniteMdp& mdp, const Policy& pi, const FeatureMap& features,
                           const SuccessorFeatures& sf);

struct Transition {
    int s = 0, a = 0, s2 = 0;
};

struct TdSfConfig {
    double lr = 0.1;
    long updates = 100000;
    std::uint64_t seed = 0;
    /// Stop early once the exact Bellman residual (mdp mode) falls below this.
    double tol = 1e-7;
    bool target_network = false;
    double polyak = 0.995;
    /// Scalar-projection mode: regress only psi^T w on the projected target.
    std::optional<Vec> projection;
    /// Sample-stream mode: step size lr / (1 + k / lr_decay) when > 0.
    double lr_decay = 0.0;
};

struct TdSfResult {
    SuccessorFeatures sf;
    double residual = 0.0;
    long updates = 0;
    bool converged = false;
};

/// Tabular TD on psi using expected next-state targets under the model.
TdSfResult td_sf(const FiniteMdp& mdp, const Policy& pi, const FeatureMap& features,
                 const TdSfConfig& cfg = {});
/// Tabular TD from a stream of sampled transitions (cycled if shorter than
/// the budget).  Residual reported against the model if one is supplied.
TdSfResult td_sf(const std::vector<Transition>& samples, const FiniteMdp& shape, const Policy& pi,
                 const FeatureMap& features, const TdSfConfig& cfg = {});

struct Linearization {
    Vec w;
    double residual = 0.0;  // sqrt(E_D[(r - phi^T w)^2])
    bool rank_deficient = false;
    std::string warning;
};

/// Weights over transitions; default is uniform(s,a) x p(s'|s,a).
Vec default_sampling(const FiniteMdp& mdp);
Linearization linearize_reward(const FiniteMdp& mdp, const RewardFn& reward, const FeatureMap& features,
                               const std::optional<Vec>& sampling = std::nullopt, double ridge = 1e-10);
/// sqrt(E_D[(r - phi^T w)^2]) for arbitrary w.
double linearization_error(const FiniteMdp& mdp, const RewardFn& reward, const FeatureMap& features,
                           const Vec& w, const std::optional<Vec>& sampling = std::nullopt);

/// GPI over Q tables (each S x A); ties by lowest action index.
Policy gpi_policy(const std::vector<Mat>& q_tables);
/// Same, also returning which table attains the max at the chosen action.
Policy gpi_policy(const std::vector<Mat>& q_tables, std::vector<int>& winners);

struct UsfEntry {
    Vec e;
    Policy policy;
    SuccessorFeatures psi;                      // exact SF of the stored policy
    std::optional<SuccessorFeatures> psi_tilde; // learned estimate, if any
    int iterations = 0;
};

struct UsfConfig {
    int max_iter = 1000;
    bool td = false;  // fill psi_tilde by TD
    TdSfConfig td_config;
};

struct UsfModel {
    FiniteMdp mdp;
    FeatureMap features;
    std::vector<UsfEntry> grid;

    const SuccessorFeatures& used_psi(std::size_t i) const {
        return grid[i].psi_tilde ? *grid[i].psi_tilde : grid[i].psi;
    }
    std::uint64_t hash() const;
};

/// 64 seeded points on the d-sphere plus the canonical basis.
std::vector<Vec> default_task_grid(int d, std::uint64_t seed, int n_sphere = 64);

/// Policy iteration in SF space for reward phi^T e, from the all-zero policy.
UsfEntry sf_policy_iteration(const FiniteMdp& mdp, const FeatureMap& features, const Vec& e,
                             int max_iter = 1000);
UsfModel train_usf(const FiniteMdp& mdp, const FeatureMap& features, const std::vector<Vec>& task_grid,
                   const UsfConfig& cfg = {});

struct UsfInference {
    Policy policy;
    Vec w;
    std::vector<int> winners;  // grid index attaining the max per state
    double linearization_residual = 0.0;
    double inference_ms = 0.0;
};

UsfInference usf_zero_shot(const UsfModel& model, const RewardFn& reward);

struct BoundReport {
    double gap = 0.0;
    std::optional<double> termA_exact;
    double termA_surrogate = 0.0;
    double termB = 0.0;
    double termC = 0.0;
    /// termC scaled by the 2/(1-gamma) slack GPI needs for inexact psi.
    double termC_gpi = 0.0;

    double termA() const { return termA_exact ? *termA_exact : termA_surrogate; }
    double bound() const { return termA() + termB + termC; }
    bool holds(double slack = 1e-9) const { return gap <= bound() + slack; }
    bool surrogate_dominates(double slack = 1e-9) const {
        return !termA_exact || *termA_exact <= termA_surrogate + slack;
    }
};

BoundReport theorem2_bound(const UsfModel& model, const RewardFn& reward,
                           std::uint64_t cap = kDefaultPolicyCap);

}  // namespace zsrl
