// Independent reference computations for the tests: plain loops, rollouts and
// enumeration, sharing nothing with the library's solvers.
#pragma once

#include "zeroshot/mdp.hpp"
#include "zeroshot/util.hpp"

#include <cmath>
#include <deque>
#include <random>
#include <vector>

namespace oracle {

using zsrl::FiniteMdp;
using zsrl::Mat;
using zsrl::Policy;
using zsrl::RewardFn;
using zsrl::Vec;

inline double rbar(const FiniteMdp& m, const RewardFn& r, int s, int a) {
    double x = 0.0;
    for (int t = 0; t < m.n_states(); ++t) x += m.p(s, a, t) * r.r(s * m.n_actions() + a, t);
    return x;
}

/// Q^pi by repeated Bellman backups (S x A).
inline Mat iterate_q(const FiniteMdp& m, const RewardFn& r, const Policy& pi, double tol = 1e-13) {
    const int S = m.n_states(), A = m.n_actions();
    Mat q = Mat::Zero(S, A);
    for (int it = 0; it < 100000; ++it) {
        Vec v(S);
        for (int s = 0; s < S; ++s) {
            v[s] = 0.0;
            for (int a = 0; a < A; ++a) v[s] += pi.probs()(s, a) * q(s, a);
        }
        Mat nq(S, A);
        for (int s = 0; s < S; ++s)
            for (int a = 0; a < A; ++a) {
                double x = rbar(m, r, s, a);
                for (int t = 0; t < S; ++t) x += m.gamma() * m.p(s, a, t) * v[t];
                nq(s, a) = x;
            }
        const double diff = (nq - q).cwiseAbs().maxCoeff();
        q = nq;
        if (diff < tol) break;
    }
    return q;
}

/// Q* by value iteration with loops.
inline Mat value_iteration(const FiniteMdp& m, const RewardFn& r, double tol = 1e-13) {
    const int S = m.n_states(), A = m.n_actions();
    Mat q = Mat::Zero(S, A);
    for (int it = 0; it < 200000; ++it) {
        Vec v = q.rowwise().maxCoeff();
        Mat nq(S, A);
        for (int s = 0; s < S; ++s)
            for (int a = 0; a < A; ++a) {
                double x = rbar(m, r, s, a);
                for (int t = 0; t < S; ++t) x += m.gamma() * m.p(s, a, t) * v[t];
                nq(s, a) = x;
            }
        const double diff = (nq - q).cwiseAbs().maxCoeff();
        q = nq;
        if (diff < tol) break;
    }
    return q;
}

inline double expected_v(const FiniteMdp& m, const Mat& q, const Policy& pi) {
    double x = 0.0;
    for (int s = 0; s < m.n_states(); ++s)
        for (int a = 0; a < m.n_actions(); ++a) x += m.initial()[s] * pi.probs()(s, a) * q(s, a);
    return x;
}

inline double optimal_return(const FiniteMdp& m, const RewardFn& r) {
    const Mat q = value_iteration(m, r);
    double x = 0.0;
    for (int s = 0; s < m.n_states(); ++s) x += m.initial()[s] * q.row(s).maxCoeff();
    return x;
}

/// All deterministic policies by counting in base A (state 0 most significant).
inline std::vector<std::vector<int>> all_action_vectors(int S, int A) {
    std::vector<std::vector<int>> out;
    std::vector<int> acts(static_cast<std::size_t>(S), 0);
    while (true) {
        out.push_back(acts);
        int i = S - 1;
        while (i >= 0 && acts[static_cast<std::size_t>(i)] == A - 1) acts[static_cast<std::size_t>(i--)] = 0;
        if (i < 0) break;
        ++acts[static_cast<std::size_t>(i)];
    }
    return out;
}

/// Best p0-expected return over deterministic policies.
inline double brute_force_return(const FiniteMdp& m, const RewardFn& r) {
    double best = -INFINITY;
    for (const auto& acts : all_action_vectors(m.n_states(), m.n_actions())) {
        const Policy pi = Policy::from_actions(m.n_actions(), acts);
        best = std::max(best, expected_v(m, iterate_q(m, r, pi), pi));
    }
    return best;
}

/// sum_{t <= T} gamma^t Pr[(s_t, a_t) = target] from (s0, a0), by propagating
/// the pair distribution.
inline double truncated_visits(const FiniteMdp& m, const Policy& pi, int sa0, int target, int T) {
    const int S = m.n_states(), A = m.n_actions(), N = S * A;
    Vec dist = Vec::Zero(N);
    dist[sa0] = 1.0;
    double total = 0.0, g = 1.0;
    for (int t = 0; t <= T; ++t) {
        total += g * dist[target];
        Vec next = Vec::Zero(N);
        for (int i = 0; i < N; ++i) {
            if (dist[i] == 0.0) continue;
            for (int s2 = 0; s2 < S; ++s2)
                for (int a2 = 0; a2 < A; ++a2)
                    next[s2 * A + a2] += dist[i] * m.transition()(i, s2) * pi.probs()(s2, a2);
        }
        dist = next;
        g *= m.gamma();
    }
    return total;
}

struct McEstimate {
    double mean = 0.0;
    double stderr_ = 0.0;
};

/// Monte Carlo return from (s, a) with horizon chosen so gamma^T < 1e-10.
inline McEstimate rollout(const FiniteMdp& m, const RewardFn& r, const Policy& pi, int s0, int a0, int episodes,
                          std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const int T = m.gamma() > 0 ? static_cast<int>(std::ceil(std::log(1e-10) / std::log(m.gamma()))) : 1;
    auto draw = [&](auto row, int n) {
        double x = u(rng), c = 0.0;
        for (int i = 0; i < n; ++i) {
            c += row(i);
            if (x < c) return i;
        }
        return n - 1;
    };
    double sum = 0.0, sq = 0.0;
    for (int e = 0; e < episodes; ++e) {
        int s = s0, a = a0;
        double ret = 0.0, g = 1.0;
        for (int t = 0; t < T; ++t) {
            const int sa = s * m.n_actions() + a;
            const int s2 = draw([&](int i) { return m.transition()(sa, i); }, m.n_states());
            ret += g * r.r(sa, s2);
            g *= m.gamma();
            s = s2;
            a = draw([&](int i) { return pi.probs()(s, i); }, m.n_actions());
        }
        sum += ret;
        sq += ret * ret;
    }
    const double mean = sum / episodes;
    const double var = std::max(0.0, sq / episodes - mean * mean);
    return {mean, std::sqrt(var / episodes)};
}

/// BFS step counts from s over positive-probability moves; -1 if unreachable.
inline std::vector<int> bfs_from(const FiniteMdp& m, int s) {
    std::vector<int> d(static_cast<std::size_t>(m.n_states()), -1);
    d[static_cast<std::size_t>(s)] = 0;
    std::deque<int> q{s};
    while (!q.empty()) {
        const int v = q.front();
        q.pop_front();
        for (int a = 0; a < m.n_actions(); ++a)
            for (int t = 0; t < m.n_states(); ++t)
                if (m.p(v, a, t) > 0.0 && d[static_cast<std::size_t>(t)] < 0) {
                    d[static_cast<std::size_t>(t)] = d[static_cast<std::size_t>(v)] + 1;
                    q.push_back(t);
                }
    }
    return d;
}

/// |k - n p| <= 3 sqrt(n p (1-p))
inline bool binomial_ok(long k, long n, double p) {
    return std::abs(static_cast<double>(k) - n * p) <= 3.0 * std::sqrt(n * p * (1.0 - p));
}

}  // namespace oracle
