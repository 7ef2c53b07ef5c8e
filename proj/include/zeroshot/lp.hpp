#pragma once

#include "zeroshot/mdp.hpp"

namespace zsrl {

enum class PivotRule {
    bland,           // smallest-index entering/leaving variable; never cycles
    dantzig_bland,   // largest reduced cost, Bland after a run of degenerate pivots
};

enum class LpStatus { optimal, unbounded, iteration_limit };

struct LpSolution {
    Vec x;
    double objective = 0.0;
    int iterations = 0;
    LpStatus status = LpStatus::optimal;
};

/// max c^T x  s.t.  A x <= b, x >= 0, with b >= 0 so the slack basis is
/// feasible.  Dense tableau simplex.
LpSolution simplex_max(const Mat& A, const Vec& b, const Vec& c, PivotRule rule = PivotRule::bland,
                       int max_iter = 200000, double tol = 1e-10);

}  // namespace zsrl
