#include "zeroshot/lp.hpp"

#include <cmath>
#include <vector>

namespace zsrl {

LpSolution simplex_max(const Mat& A, const Vec& b, const Vec& c, PivotRule rule, int max_iter, double tol) {
    const Eigen::Index m = A.rows(), n = A.cols();
    if (b.size() != m || c.size() != n) throw DimensionError("LP dimensions disagree");
    for (Eigen::Index i = 0; i < m; ++i)
        if (b[i] < -tol) throw std::invalid_argument("simplex_max needs b >= 0 (feasible slack basis)");

    // Tableau: rows 0..m-1 constraints, row m the reduced costs (c_j - z_j).
    // Columns: n structural, m slack, 1 rhs.
    using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    RowMat T = RowMat::Zero(m + 1, n + m + 1);
    T.topLeftCorner(m, n) = A;
    T.block(0, n, m, m).setIdentity();
    T.col(n + m).head(m) = b.cwiseMax(0.0);
    T.row(m).head(n) = c.transpose();
    std::vector<Eigen::Index> basis(static_cast<std::size_t>(m));
    for (Eigen::Index i = 0; i < m; ++i) basis[static_cast<std::size_t>(i)] = n + i;

    const double cscale = std::max(1.0, c.cwiseAbs().maxCoeff());
    LpSolution out;
    int degenerate_run = 0;
    Vec col(m + 1);
    for (int it = 0;; ++it) {
        if (it >= max_iter) {
            out.status = LpStatus::iteration_limit;
            break;
        }
        const bool use_bland = rule == PivotRule::bland || degenerate_run > 50;
        Eigen::Index q = -1;
        double best = tol * cscale;
        for (Eigen::Index j = 0; j < n + m; ++j) {
            const double rc = T(m, j);
            if (rc > best) {
                q = j;
                if (use_bland) break;
                best = rc;
            }
        }
        if (q < 0) break;  // optimal

        Eigen::Index r = -1;
        double ratio = 0.0;
        for (Eigen::Index i = 0; i < m; ++i) {
            const double a = T(i, q);
            if (a <= tol) continue;
            const double t = T(i, n + m) / a;
            if (r < 0 || t < ratio - 1e-12 ||
                (t <= ratio + 1e-12 && basis[static_cast<std::size_t>(i)] < basis[static_cast<std::size_t>(r)])) {
                r = i;
                ratio = t;
            }
        }
        if (r < 0) {
            out.status = LpStatus::unbounded;
            out.iterations = it;
            break;
        }
        degenerate_run = ratio <= 1e-12 ? degenerate_run + 1 : 0;

        T.row(r) /= T(r, q);
        col = T.col(q);
        col[r] = 0.0;
        const Eigen::RowVectorXd prow = T.row(r);
        T.noalias() -= col * prow;
        T(r, q) = 1.0;
        basis[static_cast<std::size_t>(r)] = q;
        out.iterations = it + 1;
    }
    out.x = Vec::Zero(n);
    for (Eigen::Index i = 0; i < m; ++i) {
        const Eigen::Index j = basis[static_cast<std::size_t>(i)];
        if (j < n) out.x[j] = T(i, n + m);
    }
    out.objective = c.dot(out.x);
    return out;
}

}  // namespace zsrl
