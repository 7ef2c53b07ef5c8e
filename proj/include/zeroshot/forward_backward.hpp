#pragma once

#include "zeroshot/mdp.hpp"
#include "zeroshot/util.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace zsrl {

/// One auto-regressive stage: B_i(s,a | code of z_{1:i-1}), tabular per code.
struct AwareStage {
    int bins = 8;
    std::vector<double> lo, width, dither;  // per prefix coordinate
    std::map<std::vector<int>, Mat> tables; // code -> (S*A) x d_i
};

/// Tabular forward-backward model.  M^{pi_z} ~ F_z B^T diag(rho).
struct FbModel {
    int n_states = 0, n_actions = 0;
    int d = 0;
    Mat B;                       // (S*A) x d
    Vec rho;                     // uniform over pairs
    std::vector<Vec> z_grid;     // one per anchor task
    std::vector<Mat> F;          // F[k]: (S*A) x d, forward map at z_grid[k]
    std::vector<Policy> policies;
    std::vector<Vec> anchors;    // marginalized anchor rewards (S*A)
    std::vector<AwareStage> stages;  // stages 2..K
    std::uint64_t seed = 0;
    std::uint64_t config_hash = 0;

    int n_pairs() const { return n_states * n_actions; }
    /// E_rho[B B^T]
    Mat covariance() const;
    std::uint64_t hash() const;
};

struct TaskEmbedding {
    Vec z;
    std::optional<std::string> source_reward_id;
};

/// z_r = sum_{(s,a)} rho(s,a) rbar(s,a) B(s,a).
TaskEmbedding embed_task(const FbModel& model, const FiniteMdp& mdp, const RewardFn& reward,
                         bool z_normalize = false);
Vec embed_pairs(const FbModel& model, const Vec& rbar);

struct FbOracleConfig {
    int max_rounds = 20;            // bootstrap rounds for the policies
    int als_sweeps = 5;
    std::optional<std::vector<Policy>> fixed_policies;  // skip the policy bootstrap
    std::uint64_t seed = 0;
};

struct FbFitReport {
    std::vector<double> rel_error;  // per z, ||F_z B^T D - M||_F / ||M||_F
    double max_rel_error = 0.0;
    int rounds = 0;
    bool normalized = false;        // E_rho[BB^T] = I enforced
};

/// Supervised fit to exact successor measures.  Each anchor reward defines a
/// grid point z_k = E_rho[r_k B]; its policy is optimal for the projection of
/// r_k onto span(B), bootstrapped until the policies stop changing.
FbModel fit_fb_oracle(const FiniteMdp& mdp, int d, const std::vector<RewardFn>& anchors,
                      const FbOracleConfig& cfg = {}, FbFitReport* report = nullptr);

struct FbTdConfig {
    double lr = 0.01;
    long steps = 20000;
    std::uint64_t seed = 0;
    double lambda_cov = 0.1;
    double lambda_diag = 0.0;
    bool target_network = true;
    double polyak = 0.995;
    int policy_every = 50;
    /// an action replaces the current one only if better by this fraction of max|Q|
    double hysteresis = 1e-3;
    double init_scale = 1.0;
    bool adam = true;  // plain gradient descent otherwise
};

struct FbTdReport {
    double initial_loss = 0.0;
    double final_loss = 0.0;
    std::vector<double> rel_error;  // vs exact M^{pi_z}
    std::vector<double> loss_trace; // every policy update
};

/// Measure-valued Bellman residual of the model, summed over the grid:
/// sum_k E_{rho x rho}[(F_k B^T - D^{-1} - gamma P_k F_k B^T)^2] (targets not frozen).
double fb_loss(const FbModel& model, const FiniteMdp& mdp);

/// Gradient descent (Adam) on the tabular F, B with exact expectations.
FbModel train_fb_td(const FiniteMdp& mdp, int d, const std::vector<RewardFn>& anchors,
                    const FbTdConfig& cfg = {}, FbTdReport* report = nullptr,
                    const FbModel* init = nullptr);

/// Relative Frobenius reconstruction error of F_k B^T D against the exact M of
/// policies[k].
std::vector<double> fb_reconstruction_error(const FbModel& model, const FiniteMdp& mdp);

struct FbInferenceOptions {
    bool z_normalize = false;
    bool f_interp = false;  // inverse-distance weighting of F over the grid
};

struct FbInference {
    Policy policy;
    ValueTable values;  // claimed Q = F(z)^T z_r
    Vec z;
    int grid_index = -1;
    bool degenerate = false;  // z_r ~ 0: reward outside span(B)
};

FbInference fb_zero_shot(const FbModel& model, const FiniteMdp& mdp, const RewardFn& reward,
                         const FbInferenceOptions& opt = {});
FbInference fb_zero_shot_pairs(const FbModel& model, const Vec& rbar, const FbInferenceOptions& opt = {});

struct AwareConfig {
    int K = 2;
    int bins = 8;
    int stage_dim = 0;  // 0: same as d
    std::uint64_t seed = 0;
};

/// Adds stages 2..K fitted on the model's anchor rewards.
void train_aware(FbModel& model, const AwareConfig& cfg = {});
/// Concatenated (z_1, ..., z_K); K = 1 is embed_task.
TaskEmbedding aware_embed(const FbModel& model, const Vec& rbar, int K);
TaskEmbedding aware_embed(const FbModel& model, const FiniteMdp& mdp, const RewardFn& reward, int K);

}  // namespace zsrl
