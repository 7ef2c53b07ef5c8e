#pragma once

#include "zeroshot/mdp.hpp"
#include "zeroshot/successor_features.hpp"
#include "zeroshot/util.hpp"

#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace zsrl {

constexpr double kUnreachable = std::numeric_limits<double>::infinity();

struct TemporalDistanceTable {
    Mat dist;  // S x S, kUnreachable where g cannot be reached from s

    bool reachable(int s, int g) const { return std::isfinite(dist(s, g)); }
    /// Largest triangle-inequality violation over reachable triples.
    double triangle_violation() const;
};

/// Minimal expected number of steps to reach g (with probability one).
/// BFS for deterministic dynamics, stochastic-shortest-path value iteration
/// otherwise.
TemporalDistanceTable temporal_distance(const FiniteMdp& mdp);

struct HilbertEmbedding {
    Mat phi;  // S x k
    int k = 0;
    double tau = 0.9;
    double distortion = 0.0;  // max |‖phi(s)-phi(g)‖ - d*(s,g)| over reachable pairs

    std::uint64_t hash() const;
};

struct HilbertConfig {
    long steps = 20000;
    double lr = 0.05;
    int batch = 64;
    std::uint64_t seed = 0;
    double p_hindsight = 0.2;   // probability that g = s'
    double gamma = 1.0;         // discount of the temporal-distance value
    double target_mix = 0.1;    // target <- (1-mix) target + mix phi
    bool spectral_init = true;  // start from Laplacian eigenvectors
    double init_scale = 0.1;
};

/// |tau - 1{u < 0}| u^2
double expectile_loss(double u, double tau);

/// Embedding distortion against a distance table (reachable pairs only).
double embedding_distortion(const Mat& phi, const TemporalDistanceTable& td);

HilbertEmbedding train_hilbert(const FiniteMdp& mdp, int k, double tau = 0.9, const HilbertConfig& cfg = {});

/// r_z(s,a,s') = <phi(s') - phi(s), z>.
RewardFn latent_reward(const HilbertEmbedding& emb, const FiniteMdp& mdp, const Vec& z);

/// Transition features phi(s') - phi(s).
FeatureMap hilbert_features(const HilbertEmbedding& emb, const FiniteMdp& mdp);

/// Optional bank of pretrained policies pi_z for z on the k-sphere.
struct HilbertBank {
    std::vector<Vec> directions;
    std::vector<Policy> policies;
};
HilbertBank build_hilbert_bank(const HilbertEmbedding& emb, const FiniteMdp& mdp, int n, std::uint64_t seed);

struct HilbertInference {
    Policy policy;
    Vec z;
    double residual = 0.0;
    bool degenerate = false;     // z* ~ 0: reward not representable
    bool rank_deficient = false;
    std::string warning;
    double inference_ms = 0.0;
};

HilbertInference hilbert_zero_shot(const HilbertEmbedding& emb, const FiniteMdp& mdp, const RewardFn& reward,
                                   const HilbertBank* bank = nullptr);

struct GoalPolicy {
    Policy policy;
    ValueTable values;
    bool unreachable = false;  // no other state can reach the goal
};

/// Optimal goal-reaching policy for reward -1{s' != g} with g made absorbing.
GoalPolicy gcrl_oracle(const FiniteMdp& mdp, int goal);

}  // namespace zsrl
