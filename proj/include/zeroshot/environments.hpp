#pragma once

#include "zeroshot/mdp.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace zsrl {

/// s0..s3 in a line, actions {L=0, R=1}, s3 absorbing, start at s0.
FiniteMdp chain4(double gamma = 0.9);

/// n-state path graph with actions {L, R}; the ends either reflect or, if
/// absorbing_last, the last state is absorbing.  Uniform start.
FiniteMdp path_graph(int n, bool absorbing_last = false, double gamma = 0.9);

/// rows x cols grid, actions {up, right, down, left}; with probability slip
/// the move goes in a uniformly random direction; walls mean stay.
FiniteMdp gridworld(int rows, int cols, double slip = 0.05, double gamma = 0.9);

/// Dense random MDP with p(.|s,a) proportional to u^3, u ~ U(0,1).
FiniteMdp random_mdp(int n_states, int n_actions, std::uint64_t seed, double gamma = 0.9);

/// n-cycle with actions {back, forward}.
FiniteMdp cycle_graph(int n, double gamma = 0.9);

/// Two disjoint reflecting paths of sizes n1 and n2.
FiniteMdp two_components(int n1, int n2, double gamma = 0.9);

/// Named built-ins: chain4, grid3x3, random8, path<N>, cycle<N>.
FiniteMdp builtin_mdp(const std::string& name);
std::vector<std::string> builtin_names();

/// The default desk suite: chain4, grid3x3, random8.
std::vector<std::pair<std::string, FiniteMdp>> desk_suite();

}  // namespace zsrl
