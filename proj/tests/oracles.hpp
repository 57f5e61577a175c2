#pragma once

// Reference formulas for the tests, written independently of the library:
// explicit inverses and determinants instead of Cholesky factors, plain loops
// instead of library helpers.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

namespace oracle {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline double kl(const VectorXd& m0, const MatrixXd& S0, const VectorXd& m1, const MatrixXd& S1) {
    const Eigen::FullPivLU<MatrixXd> lu1(S1), lu0(S0);
    const MatrixXd S1inv = lu1.inverse();
    const VectorXd dm = m1 - m0;
    return 0.5 * ((S1inv * S0).trace() + dm.dot(S1inv * dm) - static_cast<double>(m0.size()) +
                  std::log(lu1.determinant() / lu0.determinant()));
}

inline double entropy(const MatrixXd& S) {
    const double d = static_cast<double>(S.rows());
    return 0.5 * (d * std::log(2.0 * std::numbers::pi * std::numbers::e) + std::log(S.determinant()));
}

inline double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

inline double variance(const std::vector<double>& v) {
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size() - 1);
}

/// Asymptotic Kolmogorov tail P(K > lambda).
inline double kolmogorov_tail(double lambda) {
    if (lambda < 0.2) return 1.0;
    double s = 0.0;
    for (int k = 1; k <= 100; ++k) s += 2.0 * ((k % 2) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
    return std::clamp(s, 0.0, 1.0);
}

/// p-value of the two-sample Kolmogorov-Smirnov test.
inline double ks_two_sample_p(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double D = 0.0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        D = std::max(D, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    const double ne = std::sqrt(na * nb / (na + nb));
    return kolmogorov_tail((ne + 0.12 + 0.11 / ne) * D);
}

}  // namespace oracle
