#pragma once

#include "zeroshot/mdp.hpp"

#include <chrono>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace zsrl {

/// Thrown by the gradient trainers when the loss blows up.
struct TrainingDiverged : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// splitmix64 finalizer (Steele, Lea & Flood constants).
constexpr std::uint64_t splitmix64(std::uint64_t x) {
    std::uint64_t z = x + 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// 64-bit FNV-1a, used for model/state fingerprints.
class Fnv1a {
public:
    void bytes(const void* p, std::size_t n) {
        const auto* b = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            h_ ^= b[i];
            h_ *= 0x100000001B3ULL;
        }
    }
    void add(const Mat& m) {
        const Eigen::Index dims[2] = {m.rows(), m.cols()};
        bytes(dims, sizeof(dims));
        bytes(m.data(), sizeof(double) * static_cast<std::size_t>(m.size()));
    }
    void add(const Vec& v) { add(Mat(v)); }
    void add(double x) { bytes(&x, sizeof(x)); }
    void add(std::int64_t x) { bytes(&x, sizeof(x)); }
    void add(const std::string& s) { bytes(s.data(), s.size()); }
    std::uint64_t value() const { return h_; }

private:
    std::uint64_t h_ = 0xCBF29CE484222325ULL;
};

class Stopwatch {
public:
    Stopwatch() : t0_(std::chrono::steady_clock::now()) {}
    double ms() const {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0_).count();
    }

private:
    std::chrono::steady_clock::time_point t0_;
};

using Rng = std::mt19937_64;

Mat gaussian_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng, double scale = 1.0);
/// n points uniform on the unit sphere in R^d.
std::vector<Vec> sphere_points(int d, int n, Rng& rng);

/// Adam with bias correction; lr can be changed between steps.
class Adam {
public:
    explicit Adam(Eigen::Index rows = 0, Eigen::Index cols = 0, double lr = 1e-2)
        : m_(Mat::Zero(rows, cols)), v_(Mat::Zero(rows, cols)), lr(lr) {}
    void step(Mat& x, const Mat& grad);

private:
    Mat m_, v_;
    long t_ = 0;

public:
    double lr;
};

/// Cosine decay from lr0 to 0 over n steps.
double cosine_lr(double lr0, long step, long n);

/// Sum of squares weighted by an outer product of weights: sum_ij a_i b_j X_ij^2.
double weighted_sq(const Mat& X, const Vec& a, const Vec& b);

}  // namespace zsrl
