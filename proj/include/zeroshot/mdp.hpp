#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace zsrl {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct CapExceeded : std::length_error {
    using std::length_error::length_error;
};
struct InvalidModel : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Finite discounted MDP.  Transitions are stored as an (S*A) x S matrix whose
/// row s*A + a holds p(.|s,a).
class FiniteMdp {
public:
    FiniteMdp(int n_states, int n_actions, Mat transition, Vec initial, double gamma,
              std::vector<std::string> state_labels = {});

    int n_states() const { return S_; }
    int n_actions() const { return A_; }
    int n_pairs() const { return S_ * A_; }
    double gamma() const { return gamma_; }
    const Mat& transition() const { return P_; }
    const Vec& initial() const { return p0_; }
    const std::vector<std::string>& state_labels() const { return labels_; }

    int sa(int s, int a) const { return s * A_ + a; }
    double p(int s, int a, int s2) const { return P_(s * A_ + a, s2); }
    bool deterministic(double tol = 1e-12) const;

    /// Same dynamics with a different discount.
    FiniteMdp with_gamma(double gamma) const;

private:
    int S_, A_;
    Mat P_;
    Vec p0_;
    double gamma_;
    std::vector<std::string> labels_;
};

class Policy;

/// r(s,a,s') stored as an (S*A) x S matrix.
struct RewardFn {
    Mat r;

    static RewardFn zeros(const FiniteMdp& mdp);
    static RewardFn constant(const FiniteMdp& mdp, double c);
    /// r(s,a,s') = 1 iff s' == goal.
    static RewardFn goal(const FiniteMdp& mdp, int goal);
    /// r(s,a,s') = f(s') for a per-state vector f.
    static RewardFn from_next_state(const FiniteMdp& mdp, const Vec& f);
    /// r(s,a,s') = g(s,a) independent of s'.
    static RewardFn from_pairs(const FiniteMdp& mdp, const Vec& g);

    void check(const FiniteMdp& mdp) const;
    /// r(s,a) = E_{s'~p}[r(s,a,s')], as a length S*A vector.
    Vec by_pair(const FiniteMdp& mdp) const;
    /// r(s) = E_{a~pi, s'~p}[r(s,a,s')].
    Vec by_state(const FiniteMdp& mdp, const Policy& pi) const;

    RewardFn operator*(double c) const { return {r * c}; }
    RewardFn operator+(const RewardFn& o) const { return {r + o.r}; }
    RewardFn operator-(const RewardFn& o) const { return {r - o.r}; }
};

class Policy {
public:
    enum class Kind { deterministic, stochastic };

    explicit Policy(Mat probs);
    static Policy from_actions(int n_actions, const std::vector<int>& actions);
    static Policy uniform(int n_states, int n_actions);

    const Mat& probs() const { return probs_; }
    Kind kind() const { return kind_; }
    bool is_deterministic() const { return kind_ == Kind::deterministic; }
    int n_states() const { return static_cast<int>(probs_.rows()); }
    int n_actions() const { return static_cast<int>(probs_.cols()); }
    /// Greedy action (argmax with lowest-index ties) per state.
    std::vector<int> actions() const;
    bool operator==(const Policy& o) const { return probs_ == o.probs_; }

    /// S x (S*A) matrix Pi with Pi(s, s*A+a) = pi(a|s).
    Mat expand() const;

private:
    Mat probs_;
    Kind kind_;
};

struct ValueTable {
    Mat q;  // S x A
    Vec v;  // S, under the stated policy

    /// sum_s p0(s) V(s)
    double expected(const Vec& p0) const { return p0.dot(v); }
};

/// Index of the max entry; entries within tol of the current best do not
/// displace it, so ties go to the lowest index.
int argmax_lowest(const Eigen::Ref<const Vec>& x, double tol = -1.0);

/// P_pi over pairs: (S*A) x (S*A), P_pi[(s,a),(s',a')] = p(s'|s,a) pi(a'|s').
Mat pair_transition(const FiniteMdp& mdp, const Policy& pi);

ValueTable evaluate_policy(const FiniteMdp& mdp, const RewardFn& reward, const Policy& pi);
/// Same, with the reward already marginalized to a length-S*A vector.
ValueTable evaluate_policy_pairs(const FiniteMdp& mdp, const Vec& rbar, const Policy& pi);
/// sup-norm of Q - (rbar + gamma P_pi Q).
double bellman_residual(const FiniteMdp& mdp, const Vec& rbar, const Policy& pi, const Mat& q);

Policy greedy_policy(const Mat& q);

struct OptimalResult {
    Policy policy;
    ValueTable values;
    int iterations = 0;
    double residual = 0.0;
};

/// Policy iteration followed by value-iteration polish; Q* residual <= tol.
OptimalResult optimal_policy(const FiniteMdp& mdp, const RewardFn& reward, double tol = 1e-10);
OptimalResult optimal_policy_pairs(const FiniteMdp& mdp, const Vec& rbar, double tol = 1e-10);
/// Plain value iteration.
OptimalResult value_iteration(const FiniteMdp& mdp, const Vec& rbar, double tol = 1e-10,
                              int max_iter = 1000000);

constexpr std::uint64_t kDefaultPolicyCap = 1000000;

/// |A|^|S|, or nullopt if it overflows 64 bits.
std::optional<std::uint64_t> count_deterministic_policies(const FiniteMdp& mdp);

/// Calls fn on every deterministic policy (as an action vector) in
/// lexicographic order with state 0 most significant.  Stops early when fn
/// returns false.
void for_each_deterministic_policy(const FiniteMdp& mdp,
                                   const std::function<bool(const std::vector<int>&)>& fn,
                                   std::uint64_t cap = kDefaultPolicyCap);
std::vector<Policy> enumerate_deterministic_policies(const FiniteMdp& mdp,
                                                     std::uint64_t cap = kDefaultPolicyCap);

/// Expected return from p0 of a policy for a reward.
double policy_return(const FiniteMdp& mdp, const Vec& rbar, const Policy& pi);

}  // namespace zsrl
