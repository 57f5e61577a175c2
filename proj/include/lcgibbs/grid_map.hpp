#pragma once

#include <Eigen/Dense>

#include <functional>
#include <vector>

#include "lcgibbs/errors.hpp"

namespace lcgibbs {

struct Box2D {
    double x_lo, x_hi, y_lo, y_hi;
};

using Density2D = std::function<double(double, double)>;

/**
 * Triangular map (x1, x2) -> (t1(x1), t2(x1, x2)) on a regular n x n grid.
 * t1 is stored at the n + 1 cell edges of the first axis; for each of the n
 * cell centers c_i of the first axis, the conditional map t2(c_i, .) is stored
 * at the n + 1 cell edges of the second axis. Evaluation interpolates
 * linearly: t2 between column centers, both maps between edges.
 */
class GridMap2D {
public:
    GridMap2D(Box2D box, int n, std::vector<double> t1_edges, std::vector<std::vector<double>> t2_edges);

    int n() const { return n_; }
    const Box2D& box() const { return box_; }
    const std::vector<double>& t1_edges() const { return t1_; }
    const std::vector<std::vector<double>>& t2_edges() const { return t2_; }

    double t1(double x1) const;
    double t2(double x1, double x2) const;
    Eigen::Vector2d operator()(double x1, double x2) const { return {t1(x1), t2(x1, x2)}; }
    /// Finite-difference estimates of (d t1 / d x1, d t2 / d x2).
    Eigen::Vector2d jacobian_diagonal(double x1, double x2) const;

private:
    double column_value(int i, double x2) const;

    Box2D box_;
    int n_;
    double h1_, h2_;
    std::vector<double> t1_;
    std::vector<std::vector<double>> t2_;
};

/**
 * Knothe-Rosenblatt map from mu to nu by conditional CDF inversion on a grid.
 * Densities may be unnormalized and must be positive on the box. Mass outside
 * the box, measured on a grid three times wider, must not exceed `leak_tol`.
 */
GridMap2D kr_map_grid_2d(const Density2D& density_mu, const Density2D& density_nu, const Box2D& box, int n = 512,
                         double leak_tol = 1e-6);

/// Fraction of the mass of `density` outside `box`, by midpoint quadrature on a 3n x 3n grid around it.
double grid_mass_leakage(const Density2D& density, const Box2D& box, int n);

}  // namespace lcgibbs
