#include "lcgibbs/grid_map.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace lcgibbs {

namespace {

void check_box(const Box2D& b, int n) {
    if (n < 2) throw ConfigError("grid map needs n >= 2");
    if (!(b.x_lo < b.x_hi) || !(b.y_lo < b.y_hi) || !std::isfinite(b.x_lo) || !std::isfinite(b.x_hi) ||
        !std::isfinite(b.y_lo) || !std::isfinite(b.y_hi))
        throw ConfigError("grid map box is empty or unbounded");
}

// CDF at the n + 1 edges, kept both as lower sums F and upper sums S = 1 - F so
// that probabilities near either end keep full relative precision.
struct EdgeCdf {
    std::vector<double> F, S;
};

EdgeCdf edge_cdf(const std::vector<double>& masses) {
    const std::size_t n = masses.size();
    EdgeCdf c;
    c.F.assign(n + 1, 0.0);
    c.S.assign(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) c.F[i + 1] = c.F[i] + masses[i];
    for (std::size_t i = n; i-- > 0;) c.S[i] = c.S[i + 1] + masses[i];
    const double total = c.F.back();
    if (!(total > 0.0) || !std::isfinite(total)) throw DomainError("grid map: density has no mass on the box");
    for (double& f : c.F) f /= total;
    for (double& s : c.S) s /= total;
    return c;
}

// Position of edge probability (F[i], S[i]) of one CDF under the inverse of the
// piecewise-linear CDF G whose edges sit at lo + k h. In the two boundary cells
// G is continued by an exponential tail fitted to the outermost cell masses, so
// probabilities far below the boundary cell mass still map to distinct points.
double inverse_cdf(const EdgeCdf& G, double lo, double h, double p, double q) {
    const std::size_t n = G.F.size() - 1;
    const double hi = lo + static_cast<double>(n) * h;
    if (p <= 0.0) return -std::numeric_limits<double>::infinity();
    if (q <= 0.0) return std::numeric_limits<double>::infinity();
    if (p < G.F[1]) {
        const double m0 = G.F[1], m1 = G.F[2] - G.F[1];
        if (m1 > m0) return lo + h + std::log(p / m0) / (std::log(m1 / m0) / h);
        return lo + p / m0 * h;
    }
    if (q < G.S[n - 1]) {
        const double m0 = G.S[n - 1], m1 = G.S[n - 2] - G.S[n - 1];
        if (m1 > m0) return hi - h - std::log(q / m0) / (std::log(m1 / m0) / h);
        return hi - q / m0 * h;
    }
    std::size_t k;
    double frac;
    if (p <= 0.5) {
        auto it = std::upper_bound(G.F.begin(), G.F.end(), p);
        k = std::clamp<std::size_t>(static_cast<std::size_t>(it - G.F.begin()), 1, n) - 1;
        const double dg = G.F[k + 1] - G.F[k];
        frac = dg > 0.0 ? (p - G.F[k]) / dg : 0.5;
    } else {
        // S is decreasing: find k with S[k + 1] < q <= S[k].
        auto it = std::lower_bound(G.S.begin(), G.S.end(), q, [](double a, double b) { return a > b; });
        k = std::clamp<std::size_t>(static_cast<std::size_t>(it - G.S.begin()), 1, n) - 1;
        if (G.S[k + 1] >= q && k + 1 < n) ++k;
        const double dg = G.S[k] - G.S[k + 1];
        frac = dg > 0.0 ? (G.S[k] - q) / dg : 0.5;
    }
    return lo + (static_cast<double>(k) + std::clamp(frac, 0.0, 1.0)) * h;
}

// Edges where the source CDF is exactly 0 or 1 map to infinity; extend linearly instead.
void close_ends(std::vector<double>& v) {
    const std::size_t n = v.size() - 1;
    if (!std::isfinite(v[0])) v[0] = 2.0 * v[1] - v[2];
    if (!std::isfinite(v[n])) v[n] = 2.0 * v[n - 1] - v[n - 2];
}

void require_increasing(const std::vector<double>& v, const char* what) {
    for (std::size_t i = 1; i < v.size(); ++i)
        if (!(v[i] > v[i - 1])) throw NumericalError(std::string("grid map: ") + what + " is not strictly increasing");
}

double positive_density(const Density2D& f, double x, double y) {
    const double v = f(x, y);
    if (!(v > 0.0) || !std::isfinite(v)) throw DomainError("grid map: density must be positive and finite on the box");
    return v;
}

double interp_edges(const std::vector<double>& vals, double lo, double h, double x) {
    const int n = static_cast<int>(vals.size()) - 1;
    const double u = (x - lo) / h;
    if (u <= 0.0) return vals.front() + (x - lo);
    if (u >= n) return vals.back() + (x - (lo + n * h));
    const int k = std::min(static_cast<int>(u), n - 1);
    const double f = u - k;
    return (1.0 - f) * vals[static_cast<std::size_t>(k)] + f * vals[static_cast<std::size_t>(k + 1)];
}

}  // namespace

GridMap2D::GridMap2D(Box2D box, int n, std::vector<double> t1_edges, std::vector<std::vector<double>> t2_edges)
    : box_(box), n_(n), t1_(std::move(t1_edges)), t2_(std::move(t2_edges)) {
    check_box(box_, n_);
    if (t1_.size() != static_cast<std::size_t>(n_) + 1 || t2_.size() != static_cast<std::size_t>(n_))
        throw DimensionError("grid map: table sizes do not match n");
    for (const auto& row : t2_)
        if (row.size() != static_cast<std::size_t>(n_) + 1) throw DimensionError("grid map: table sizes do not match n");
    require_increasing(t1_, "t1");
    for (const auto& row : t2_) require_increasing(row, "conditional map");
    h1_ = (box_.x_hi - box_.x_lo) / n_;
    h2_ = (box_.y_hi - box_.y_lo) / n_;
}

double GridMap2D::t1(double x1) const { return interp_edges(t1_, box_.x_lo, h1_, x1); }

double GridMap2D::column_value(int i, double x2) const {
    return interp_edges(t2_[static_cast<std::size_t>(i)], box_.y_lo, h2_, x2);
}

double GridMap2D::t2(double x1, double x2) const {
    const double u = (x1 - box_.x_lo) / h1_ - 0.5;
    if (u <= 0.0) return column_value(0, x2);
    if (u >= n_ - 1) return column_value(n_ - 1, x2);
    const int i = std::min(static_cast<int>(u), n_ - 2);
    const double f = u - i;
    return (1.0 - f) * column_value(i, x2) + f * column_value(i + 1, x2);
}

Eigen::Vector2d GridMap2D::jacobian_diagonal(double x1, double x2) const {
    const double e1 = 0.5 * h1_, e2 = 0.5 * h2_;
    return {(t1(x1 + e1) - t1(x1 - e1)) / (2.0 * e1), (t2(x1, x2 + e2) - t2(x1, x2 - e2)) / (2.0 * e2)};
}

double grid_mass_leakage(const Density2D& density, const Box2D& box, int n) {
    check_box(box, n);
    const double w1 = box.x_hi - box.x_lo, w2 = box.y_hi - box.y_lo;
    const double h1 = w1 / n, h2 = w2 / n;
    double inner = 0.0, total = 0.0;
    for (int i = 0; i < 3 * n; ++i) {
        const double x = box.x_lo - w1 + (i + 0.5) * h1;
        const bool in_x = i >= n && i < 2 * n;
        for (int j = 0; j < 3 * n; ++j) {
            const double y = box.y_lo - w2 + (j + 0.5) * h2;
            const double v = density(x, y);
            if (!(v >= 0.0) || !std::isfinite(v)) throw DomainError("grid map: density must be nonnegative and finite");
            total += v;
            if (in_x && j >= n && j < 2 * n) inner += v;
        }
    }
    if (!(total > 0.0)) throw DomainError("grid map: density has no mass");
    return (total - inner) / total;
}

GridMap2D kr_map_grid_2d(const Density2D& density_mu, const Density2D& density_nu, const Box2D& box, int n,
                         double leak_tol) {
    check_box(box, n);
    if (grid_mass_leakage(density_mu, box, n) > leak_tol) throw DomainError("grid map: mu leaks mass outside the box");
    if (grid_mass_leakage(density_nu, box, n) > leak_tol) throw DomainError("grid map: nu leaks mass outside the box");
    const double h1 = (box.x_hi - box.x_lo) / n, h2 = (box.y_hi - box.y_lo) / n;
    auto cx = [&](int i) { return box.x_lo + (i + 0.5) * h1; };
    auto cy = [&](int j) { return box.y_lo + (j + 0.5) * h2; };

    std::vector<std::vector<double>> pmu(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(n)));
    std::vector<double> mu1(static_cast<std::size_t>(n), 0.0), nu1(static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double a = positive_density(density_mu, cx(i), cy(j));
            pmu[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = a;
            mu1[static_cast<std::size_t>(i)] += a;
            nu1[static_cast<std::size_t>(i)] += positive_density(density_nu, cx(i), cy(j));
        }
    const auto F1 = edge_cdf(mu1);
    const auto G1 = edge_cdf(nu1);
    std::vector<double> t1(static_cast<std::size_t>(n) + 1);
    for (std::size_t i = 0; i <= static_cast<std::size_t>(n); ++i) t1[i] = inverse_cdf(G1, box.x_lo, h1, F1.F[i], F1.S[i]);
    close_ends(t1);
    require_increasing(t1, "t1");

    auto t1_at = [&](double x) { return interp_edges(t1, box.x_lo, h1, x); };
    std::vector<std::vector<double>> t2(static_cast<std::size_t>(n));
    std::vector<double> qnu(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const auto F = edge_cdf(pmu[static_cast<std::size_t>(i)]);
        const double target_x1 = t1_at(cx(i));
        for (int j = 0; j < n; ++j) qnu[static_cast<std::size_t>(j)] = positive_density(density_nu, target_x1, cy(j));
        const auto G = edge_cdf(qnu);
        auto& row = t2[static_cast<std::size_t>(i)];
        row.resize(static_cast<std::size_t>(n) + 1);
        for (std::size_t j = 0; j <= static_cast<std::size_t>(n); ++j) row[j] = inverse_cdf(G, box.y_lo, h2, F.F[j], F.S[j]);
        close_ends(row);
        require_increasing(row, "conditional map");
    }
    return GridMap2D(box, n, std::move(t1), std::move(t2));
}

}  // namespace lcgibbs
