#include "zeroshot/environments.hpp"

#include <random>
#include <stdexcept>

namespace zsrl {

FiniteMdp chain4(double gamma) {
    Mat P = Mat::Zero(8, 4);
    for (int s = 0; s < 4; ++s) {
        if (s == 3) {
            P(6, 3) = P(7, 3) = 1.0;
            continue;
        }
        P(s * 2 + 0, std::max(s - 1, 0)) = 1.0;
        P(s * 2 + 1, s + 1) = 1.0;
    }
    Vec p0 = Vec::Zero(4);
    p0[0] = 1.0;
    return FiniteMdp(4, 2, P, p0, gamma, {"s0", "s1", "s2", "s3"});
}

FiniteMdp path_graph(int n, bool absorbing_last, double gamma) {
    if (n < 1) throw InvalidModel("path needs at least one state");
    Mat P = Mat::Zero(2 * n, n);
    for (int s = 0; s < n; ++s) {
        if (absorbing_last && s == n - 1) {
            P(2 * s, s) = P(2 * s + 1, s) = 1.0;
            continue;
        }
        P(2 * s, std::max(s - 1, 0)) = 1.0;
        P(2 * s + 1, std::min(s + 1, n - 1)) = 1.0;
    }
    return FiniteMdp(n, 2, P, Vec::Constant(n, 1.0 / n), gamma);
}

FiniteMdp gridworld(int rows, int cols, double slip, double gamma) {
    const int S = rows * cols, A = 4;
    const int dr[4] = {-1, 0, 1, 0}, dc[4] = {0, 1, 0, -1};
    auto move = [&](int s, int dir) {
        const int r = s / cols + dr[dir], c = s % cols + dc[dir];
        if (r < 0 || r >= rows || c < 0 || c >= cols) return s;
        return r * cols + c;
    };
    Mat P = Mat::Zero(S * A, S);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) {
            P(s * A + a, move(s, a)) += 1.0 - slip;
            for (int d = 0; d < 4; ++d) P(s * A + a, move(s, d)) += slip / 4.0;
        }
    std::vector<std::string> labels;
    for (int s = 0; s < S; ++s)
        labels.push_back("r" + std::to_string(s / cols) + "c" + std::to_string(s % cols));
    return FiniteMdp(S, A, P, Vec::Constant(S, 1.0 / S), gamma, labels);
}

FiniteMdp random_mdp(int n_states, int n_actions, std::uint64_t seed, double gamma) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Mat P(n_states * n_actions, n_states);
    for (Eigen::Index i = 0; i < P.rows(); ++i) {
        for (Eigen::Index j = 0; j < P.cols(); ++j) {
            const double x = u(rng);
            P(i, j) = x * x * x + 1e-6;
        }
        P.row(i) /= P.row(i).sum();
    }
    Vec p0(n_states);
    for (int s = 0; s < n_states; ++s) p0[s] = u(rng) + 0.05;
    p0 /= p0.sum();
    return FiniteMdp(n_states, n_actions, P, p0, gamma);
}

FiniteMdp cycle_graph(int n, double gamma) {
    Mat P = Mat::Zero(2 * n, n);
    for (int s = 0; s < n; ++s) {
        P(2 * s, (s + n - 1) % n) = 1.0;
        P(2 * s + 1, (s + 1) % n) = 1.0;
    }
    return FiniteMdp(n, 2, P, Vec::Constant(n, 1.0 / n), gamma);
}

FiniteMdp two_components(int n1, int n2, double gamma) {
    const int n = n1 + n2;
    Mat P = Mat::Zero(2 * n, n);
    for (int s = 0; s < n; ++s) {
        const int lo = s < n1 ? 0 : n1, hi = s < n1 ? n1 - 1 : n - 1;
        P(2 * s, std::max(s - 1, lo)) = 1.0;
        P(2 * s + 1, std::min(s + 1, hi)) = 1.0;
    }
    return FiniteMdp(n, 2, P, Vec::Constant(n, 1.0 / n), gamma);
}

FiniteMdp builtin_mdp(const std::string& name) {
    if (name == "chain4") return chain4();
    if (name == "grid3x3") return gridworld(3, 3);
    if (name == "random8") return random_mdp(8, 3, 8);
    auto tail = [&](const std::string& prefix) -> int {
        if (name.rfind(prefix, 0) != 0) return -1;
        try {
            return std::stoi(name.substr(prefix.size()));
        } catch (const std::exception&) {
            return -1;
        }
    };
    if (int n = tail("path"); n > 0) return path_graph(n);
    if (int n = tail("cycle"); n > 0) return cycle_graph(n);
    throw std::invalid_argument("unknown built-in mdp '" + name + "'");
}

std::vector<std::string> builtin_names() { return {"chain4", "grid3x3", "random8", "path<N>", "cycle<N>"}; }

std::vector<std::pair<std::string, FiniteMdp>> desk_suite() {
    return {{"chain4", chain4()}, {"grid3x3", gridworld(3, 3)}, {"random8", random_mdp(8, 3, 8)}};
}

}  // namespace zsrl
