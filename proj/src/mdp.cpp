#include "zeroshot/mdp.hpp"

#include <cmath>
#include <sstream>

namespace zsrl {

namespace {

void check_distribution(const Eigen::Ref<const Vec>& row, const std::string& what) {
    for (Eigen::Index i = 0; i < row.size(); ++i) {
        if (!std::isfinite(row[i]) || row[i] < 0.0)
            throw InvalidModel(what + ": negative or non-finite probability");
    }
    if (std::abs(row.sum() - 1.0) > 1e-9) {
        std::ostringstream os;
        os << what << ": probabilities sum to " << row.sum();
        throw InvalidModel(os.str());
    }
}

}  // namespace

FiniteMdp::FiniteMdp(int n_states, int n_actions, Mat transition, Vec initial, double gamma,
                     std::vector<std::string> state_labels)
    : S_(n_states), A_(n_actions), P_(std::move(transition)), p0_(std::move(initial)),
      gamma_(gamma), labels_(std::move(state_labels)) {
    if (S_ <= 0 || A_ <= 0) throw InvalidModel("n_states and n_actions must be positive");
    if (P_.rows() != S_ * A_ || P_.cols() != S_)
        throw DimensionError("transition must be (S*A) x S");
    if (p0_.size() != S_) throw DimensionError("initial distribution must have S entries");
    if (!(gamma_ >= 0.0 && gamma_ < 1.0)) throw InvalidModel("gamma must lie in [0,1)");
    if (!labels_.empty() && static_cast<int>(labels_.size()) != S_)
        throw DimensionError("state_labels must have S entries");
    for (int s = 0; s < S_; ++s)
        for (int a = 0; a < A_; ++a)
            check_distribution(P_.row(s * A_ + a).transpose(),
                               "transition[" + std::to_string(s) + "][" + std::to_string(a) + "]");
    check_distribution(p0_, "initial");
}

bool FiniteMdp::deterministic(double tol) const {
    for (Eigen::Index i = 0; i < P_.rows(); ++i)
        if (P_.row(i).maxCoeff() < 1.0 - tol) return false;
    return true;
}

FiniteMdp FiniteMdp::with_gamma(double gamma) const {
    return FiniteMdp(S_, A_, P_, p0_, gamma, labels_);
}

// ---------------------------------------------------------------- rewards

RewardFn RewardFn::zeros(const FiniteMdp& mdp) {
    return {Mat::Zero(mdp.n_pairs(), mdp.n_states())};
}

RewardFn RewardFn::constant(const FiniteMdp& mdp, double c) {
    return {Mat::Constant(mdp.n_pairs(), mdp.n_states(), c)};
}

RewardFn RewardFn::goal(const FiniteMdp& mdp, int goal) {
    if (goal < 0 || goal >= mdp.n_states()) throw DimensionError("goal out of range");
    RewardFn r = zeros(mdp);
    r.r.col(goal).setOnes();
    return r;
}

RewardFn RewardFn::from_next_state(const FiniteMdp& mdp, const Vec& f) {
    if (f.size() != mdp.n_states()) throw DimensionError("state reward must have S entries");
    return {Vec::Ones(mdp.n_pairs()) * f.transpose()};
}

RewardFn RewardFn::from_pairs(const FiniteMdp& mdp, const Vec& g) {
    if (g.size() != mdp.n_pairs()) throw DimensionError("pair reward must have S*A entries");
    return {g * Vec::Ones(mdp.n_states()).transpose()};
}

void RewardFn::check(const FiniteMdp& mdp) const {
    if (r.rows() != mdp.n_pairs() || r.cols() != mdp.n_states())
        throw DimensionError("reward must be (S*A) x S");
    if (!r.allFinite()) throw InvalidModel("reward has non-finite entries");
}

Vec RewardFn::by_pair(const FiniteMdp& mdp) const {
    check(mdp);
    return mdp.transition().cwiseProduct(r).rowwise().sum();
}

Vec RewardFn::by_state(const FiniteMdp& mdp, const Policy& pi) const {
    if (pi.n_states() != mdp.n_states() || pi.n_actions() != mdp.n_actions())
        throw DimensionError("policy does not match mdp");
    return pi.expand() * by_pair(mdp);
}

// ---------------------------------------------------------------- policies

Policy::Policy(Mat probs) : probs_(std::move(probs)), kind_(Kind::deterministic) {
    if (probs_.rows() == 0 || probs_.cols() == 0) throw DimensionError("empty policy");
    for (Eigen::Index s = 0; s < probs_.rows(); ++s) {
        check_distribution(probs_.row(s).transpose(), "policy row " + std::to_string(s));
        Eigen::Index nz = 0;
        for (Eigen::Index a = 0; a < probs_.cols(); ++a)
            if (probs_(s, a) != 0.0) ++nz;
        if (nz != 1 || probs_.row(s).maxCoeff() != 1.0) kind_ = Kind::stochastic;
    }
}

Policy Policy::from_actions(int n_actions, const std::vector<int>& actions) {
    Mat m = Mat::Zero(static_cast<Eigen::Index>(actions.size()), n_actions);
    for (std::size_t s = 0; s < actions.size(); ++s) {
        if (actions[s] < 0 || actions[s] >= n_actions) throw DimensionError("action out of range");
        m(static_cast<Eigen::Index>(s), actions[s]) = 1.0;
    }
    return Policy(std::move(m));
}

Policy Policy::uniform(int n_states, int n_actions) {
    return Policy(Mat::Constant(n_states, n_actions, 1.0 / n_actions));
}

std::vector<int> Policy::actions() const {
    std::vector<int> out(static_cast<std::size_t>(probs_.rows()));
    for (Eigen::Index s = 0; s < probs_.rows(); ++s)
        out[static_cast<std::size_t>(s)] = argmax_lowest(probs_.row(s).transpose(), 0.0);
    return out;
}

Mat Policy::expand() const {
    const Eigen::Index S = probs_.rows(), A = probs_.cols();
    Mat pi = Mat::Zero(S, S * A);
    for (Eigen::Index s = 0; s < S; ++s) pi.block(s, s * A, 1, A) = probs_.row(s);
    return pi;
}

int argmax_lowest(const Eigen::Ref<const Vec>& x, double tol) {
    if (x.size() == 0) throw DimensionError("argmax of empty vector");
    if (tol < 0.0) tol = 1e-10 * std::max(1.0, x.cwiseAbs().maxCoeff());
    int best = 0;
    for (Eigen::Index i = 1; i < x.size(); ++i)
        if (x[i] > x[best] + tol) best = static_cast<int>(i);
    return best;
}

// ---------------------------------------------------------------- evaluation

namespace {

void check_policy(const FiniteMdp& mdp, const Policy& pi) {
    if (pi.n_states() != mdp.n_states() || pi.n_actions() != mdp.n_actions())
        throw DimensionError("policy does not match mdp");
}

ValueTable table_from_q(const FiniteMdp& mdp, const Vec& qflat, const Policy& pi) {
    ValueTable vt;
    vt.q = Eigen::Map<const Mat>(qflat.data(), mdp.n_actions(), mdp.n_states()).transpose();
    vt.v = pi.probs().cwiseProduct(vt.q).rowwise().sum();
    return vt;
}

Vec flatten(const Mat& q) {
    Mat qt = q.transpose();
    return Eigen::Map<const Vec>(qt.data(), qt.size());
}

}  // namespace

Mat pair_transition(const FiniteMdp& mdp, const Policy& pi) {
    check_policy(mdp, pi);
    return mdp.transition() * pi.expand();
}

ValueTable evaluate_policy_pairs(const FiniteMdp& mdp, const Vec& rbar, const Policy& pi) {
    if (rbar.size() != mdp.n_pairs()) throw DimensionError("reward must have S*A entries");
    const Mat P = pair_transition(mdp, pi);
    const Mat sys = Mat::Identity(mdp.n_pairs(), mdp.n_pairs()) - mdp.gamma() * P;
    const Vec q = sys.partialPivLu().solve(rbar);
    return table_from_q(mdp, q, pi);
}

ValueTable evaluate_policy(const FiniteMdp& mdp, const RewardFn& reward, const Policy& pi) {
    return evaluate_policy_pairs(mdp, reward.by_pair(mdp), pi);
}

double bellman_residual(const FiniteMdp& mdp, const Vec& rbar, const Policy& pi, const Mat& q) {
    const Vec qf = flatten(q);
    const Vec rhs = rbar + mdp.gamma() * pair_transition(mdp, pi) * qf;
    return (qf - rhs).cwiseAbs().maxCoeff();
}

Policy greedy_policy(const Mat& q) {
    std::vector<int> acts(static_cast<std::size_t>(q.rows()));
    for (Eigen::Index s = 0; s < q.rows(); ++s)
        acts[static_cast<std::size_t>(s)] = argmax_lowest(q.row(s).transpose());
    return Policy::from_actions(static_cast<int>(q.cols()), acts);
}

namespace {

// One application of the Bellman optimality operator to a flat Q.
Vec optimality_backup(const FiniteMdp& mdp, const Vec& rbar, const Vec& q) {
    const int S = mdp.n_states(), A = mdp.n_actions();
    Vec v(S);
    for (int s = 0; s < S; ++s) v[s] = q.segment(s * A, A).maxCoeff();
    return rbar + mdp.gamma() * mdp.transition() * v;
}

}  // namespace

OptimalResult optimal_policy_pairs(const FiniteMdp& mdp, const Vec& rbar, double tol) {
    if (rbar.size() != mdp.n_pairs()) throw DimensionError("reward must have S*A entries");
    const int S = mdp.n_states(), A = mdp.n_actions();
    std::vector<int> acts(static_cast<std::size_t>(S), 0);
    Policy pi = Policy::from_actions(A, acts);
    ValueTable vt = evaluate_policy_pairs(mdp, rbar, pi);
    int it = 0;
    // Policy iteration; switch only on a strict improvement so it terminates.
    for (; it < 10000; ++it) {
        bool changed = false;
        const double eps = 1e-12 * std::max(1.0, vt.q.cwiseAbs().maxCoeff());
        for (int s = 0; s < S; ++s) {
            int best = acts[static_cast<std::size_t>(s)];
            for (int a = 0; a < A; ++a)
                if (vt.q(s, a) > vt.q(s, best) + eps) best = a;
            if (best != acts[static_cast<std::size_t>(s)]) {
                acts[static_cast<std::size_t>(s)] = best;
                changed = true;
            }
        }
        if (!changed) break;
        pi = Policy::from_actions(A, acts);
        vt = evaluate_policy_pairs(mdp, rbar, pi);
    }
    Vec q = flatten(vt.q);
    double res = (optimality_backup(mdp, rbar, q) - q).cwiseAbs().maxCoeff();
    // A few backups to clean up round-off in the linear solve.
    for (int k = 0; k < 100 && res > tol; ++k) {
        const Vec next = optimality_backup(mdp, rbar, q);
        q = next;
        res = (optimality_backup(mdp, rbar, q) - q).cwiseAbs().maxCoeff();
    }
    OptimalResult out{Policy::from_actions(A, acts), {}, it, res};
    Mat qm = Eigen::Map<const Mat>(q.data(), A, S).transpose();
    out.policy = greedy_policy(qm);
    out.values.q = qm;
    out.values.v = out.policy.probs().cwiseProduct(qm).rowwise().sum();
    return out;
}

OptimalResult optimal_policy(const FiniteMdp& mdp, const RewardFn& reward, double tol) {
    return optimal_policy_pairs(mdp, reward.by_pair(mdp), tol);
}

OptimalResult value_iteration(const FiniteMdp& mdp, const Vec& rbar, double tol, int max_iter) {
    if (rbar.size() != mdp.n_pairs()) throw DimensionError("reward must have S*A entries");
    const int S = mdp.n_states(), A = mdp.n_actions();
    Vec q = Vec::Zero(mdp.n_pairs());
    double res = 0.0;
    int it = 0;
    for (; it < max_iter; ++it) {
        const Vec next = optimality_backup(mdp, rbar, q);
        res = (next - q).cwiseAbs().maxCoeff();
        q = next;
        if (res <= tol * (1.0 - mdp.gamma())) break;
    }
    Mat qm = Eigen::Map<const Mat>(q.data(), A, S).transpose();
    Policy pi = greedy_policy(qm);
    ValueTable vt{qm, pi.probs().cwiseProduct(qm).rowwise().sum()};
    return {pi, vt, it, (optimality_backup(mdp, rbar, q) - q).cwiseAbs().maxCoeff()};
}

// ---------------------------------------------------------------- enumeration

std::optional<std::uint64_t> count_deterministic_policies(const FiniteMdp& mdp) {
    std::uint64_t n = 1;
    const auto A = static_cast<std::uint64_t>(mdp.n_actions());
    for (int s = 0; s < mdp.n_states(); ++s) {
        if (n > UINT64_MAX / A) return std::nullopt;
        n *= A;
    }
    return n;
}

void for_each_deterministic_policy(const FiniteMdp& mdp,
                                   const std::function<bool(const std::vector<int>&)>& fn,
                                   std::uint64_t cap) {
    const auto n = count_deterministic_policies(mdp);
    if (!n || *n > cap) {
        std::ostringstream os;
        os << "policy enumeration would produce ";
        if (n) os << *n; else os << "more than 2^64";
        os << " policies (cap " << cap << ")";
        throw CapExceeded(os.str());
    }
    const int S = mdp.n_states(), A = mdp.n_actions();
    std::vector<int> acts(static_cast<std::size_t>(S), 0);
    while (true) {
        if (!fn(acts)) return;
        // increment with the last state least significant
        int s = S - 1;
        while (s >= 0 && ++acts[static_cast<std::size_t>(s)] == A) acts[static_cast<std::size_t>(s--)] = 0;
        if (s < 0) return;
    }
}

std::vector<Policy> enumerate_deterministic_policies(const FiniteMdp& mdp, std::uint64_t cap) {
    std::vector<Policy> out;
    for_each_deterministic_policy(
        mdp,
        [&](const std::vector<int>& acts) {
            out.push_back(Policy::from_actions(mdp.n_actions(), acts));
            return true;
        },
        cap);
    return out;
}

double policy_return(const FiniteMdp& mdp, const Vec& rbar, const Policy& pi) {
    return evaluate_policy_pairs(mdp, rbar, pi).expected(mdp.initial());
}

}  // namespace zsrl
