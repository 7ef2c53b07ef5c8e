#include "zeroshot/util.hpp"

#include <cmath>

namespace zsrl {

Mat gaussian_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng, double scale) {
    std::normal_distribution<double> n(0.0, scale);
    Mat m(rows, cols);
    // fill row-major so the draw order does not depend on storage order
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = n(rng);
    return m;
}

std::vector<Vec> sphere_points(int d, int n, Rng& rng) {
    std::vector<Vec> out;
    out.reserve(static_cast<std::size_t>(n));
    std::normal_distribution<double> g(0.0, 1.0);
    while (static_cast<int>(out.size()) < n) {
        Vec x(d);
        for (int i = 0; i < d; ++i) x[i] = g(rng);
        const double nrm = x.norm();
        if (nrm < 1e-12) continue;
        out.push_back(x / nrm);
    }
    return out;
}

void Adam::step(Mat& x, const Mat& grad) {
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-12;
    ++t_;
    m_ = b1 * m_ + (1.0 - b1) * grad;
    v_ = b2 * v_ + (1.0 - b2) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    x.array() -= lr * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps);
}

double cosine_lr(double lr0, long step, long n) {
    if (n <= 0) return lr0;
    return lr0 * 0.5 * (1.0 + std::cos(M_PI * static_cast<double>(step) / static_cast<double>(n)));
}

double weighted_sq(const Mat& X, const Vec& a, const Vec& b) {
    return (a.asDiagonal() * X.cwiseAbs2() * b.asDiagonal()).sum();
}

}  // namespace zsrl
