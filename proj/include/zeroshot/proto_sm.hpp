#pragma once

#include "zeroshot/forward_backward.hpp"
#include "zeroshot/lp.hpp"
#include "zeroshot/mdp.hpp"

#include <cstdint>
#include <vector>

namespace zsrl {

/// Deterministic policy for code v: pi_v(s) = splitmix64(v ^ splitmix64(s)) mod |A|.
Policy codebook_policy(std::uint64_t v, const FiniteMdp& mdp);
/// Codes used by a codebook of the given size and seed.
std::vector<std::uint64_t> codebook_codes(std::size_t size, std::uint64_t seed);

/// Affine model of successor measures: vec(M^pi) ~ Phi w^pi + b, with vec
/// taken row-major over the (S*A) x (S*A) matrix.
struct PsmModel {
    int n_states = 0, n_actions = 0;
    double gamma = 0.0;
    Mat Phi;                            // N^2 x d
    Vec b;                              // N^2
    Mat W;                              // codebook_size x d, w(v) per code
    std::vector<std::uint64_t> codes;
    int d = 0;
    int effective_rank = 0;             // directions with nonzero singular value
    double max_residual = 0.0;          // max relative codebook residual
    std::uint64_t seed = 0;

    int n_pairs() const { return n_states * n_actions; }
    std::size_t codebook_size() const { return codes.size(); }
    /// Phi w + b as an N x N matrix.
    Mat measure(const Vec& w) const;
    std::uint64_t hash() const;
};

/// Flattened exact successor measures of the codebook policies (one row each).
Mat codebook_measures(const FiniteMdp& mdp, const std::vector<std::uint64_t>& codes);

/// PCA of the codebook measures: b = mean, Phi = top-d principal directions
/// (directions with singular value <= 1e-10 sigma_max are zeroed).
PsmModel fit_psm_oracle(const FiniteMdp& mdp, int d, std::size_t codebook_size, std::uint64_t seed);

/// Relative residual of projecting a measure onto the model's affine span.
double psm_affine_residual(const PsmModel& model, const Mat& M);

struct PsmTdConfig {
    double lr = 0.01;
    long steps = 20000;
    std::uint64_t seed = 0;
    bool target_network = true;
    double polyak = 0.995;
    std::size_t batch = 0;  // codes per step, 0 = all
    bool adam = true;
    double init_scale = 0.1;
};

struct PsmTdReport {
    double initial_loss = 0.0;
    double final_loss = 0.0;
    std::vector<double> loss_trace;
};

/// Mean over codes of ||M_v - I - gamma P_v M_v||_F^2 for the model's M_v =
/// Phi w(v) + b (the density-form loss up to the constant rho factors).
double psm_loss(const PsmModel& model, const FiniteMdp& mdp);

/// Joint gradient descent on Phi, b and w(v) with exact expectations.
PsmModel train_psm_td(const FiniteMdp& mdp, int d, std::size_t codebook_size, const PsmTdConfig& cfg = {},
                      PsmTdReport* report = nullptr, const PsmModel* init = nullptr);

/// Max over codes of ||M_a(v) - M_b(v)||_F / ||M_b(v)||_F.
double psm_relative_difference(const PsmModel& a, const PsmModel& b);

enum class LpMethod { simplex, subgradient };

struct PsmInferenceOptions {
    LpMethod method = LpMethod::simplex;
    PivotRule pivot = PivotRule::dantzig_bland;
    double trust_radius = 0.0;  // 0: 1e3 * (1 + max ||w(v)||)
    int subgradient_iters = 20000;
};

struct LpReport {
    double objective = 0.0;  // sum_{s,a} p0(s)/A * Q_LP(s,a)
    int iterations = 0;
    double feasibility_violation_max = 0.0;  // max(0, I - (Phi w + b))
    double min_occupancy = 0.0;              // min entry of Phi w + b
    double inference_ms = 0.0;
    bool trust_region_active = false;
    LpStatus status = LpStatus::optimal;
};

struct PsmInference {
    Policy policy;
    ValueTable values;     // Q implied by the LP occupancy
    double claimed_value = 0.0;  // sum_s p0(s) max_a Q_LP(s,a)
    Vec w;
    LpReport report;
};

/// max_w <mu x rbar, Phi w + b> s.t. Phi w + b >= I entrywise (continuation
/// occupancy M - I is nonnegative), mu(s,a) = p0(s)/|A|.  The policy follows
/// the continuation occupancy mu^T (M - I) where it has mass, and the LP's Q
/// elsewhere.
PsmInference psm_zero_shot(const PsmModel& model, const FiniteMdp& mdp, const RewardFn& reward,
                           const PsmInferenceOptions& opt = {});
PsmInference psm_zero_shot_pairs(const PsmModel& model, const Vec& p0, const Vec& rbar,
                                 const PsmInferenceOptions& opt = {});

}  // namespace zsrl
