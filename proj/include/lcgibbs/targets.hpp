#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <variant>
#include <string>
#include <vector>

#include "lcgibbs/blocks.hpp"
#include "lcgibbs/errors.hpp"

namespace lcgibbs {

template <typename S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;
template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace detail {

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& x, const char* what) {
    if (!x.allFinite()) throw InputError(std::string(what) + " has non-finite entries");
}

template <typename S>
void require_symmetric(const Mat<S>& Q, const char* what) {
    if (Q.rows() != Q.cols()) throw DimensionError(std::string(what) + " must be square");
    const S scale = std::max<S>(Q.cwiseAbs().maxCoeff(), std::numeric_limits<S>::min());
    if ((Q - Q.transpose()).cwiseAbs().maxCoeff() > S(1e-12) * scale)
        throw ConstructionError(std::string(what) + " is not symmetric");
}

}  // namespace detail

/// pi = N(mean, precision^{-1}) with a block decomposition of the coordinates.
template <typename S>
class GaussianTarget {
public:
    GaussianTarget(Vec<S> mean, Mat<S> precision, BlockStructure blocks)
        : mean_(std::move(mean)), precision_(std::move(precision)), blocks_(std::move(blocks)) {
        detail::require_symmetric(precision_, "precision");
        if (mean_.size() != precision_.rows() || blocks_.dim() != mean_.size())
            throw DimensionError("mean, precision and blocks disagree on dimension");
        if (!mean_.allFinite() || !precision_.allFinite())
            throw ConstructionError("non-finite Gaussian target parameters");
        precision_ = S(0.5) * (precision_ + precision_.transpose()).eval();
        llt_.compute(precision_);
        if (llt_.info() != Eigen::Success) throw ConstructionError("precision is not positive definite");
        const Vec<S> diag = llt_.matrixLLT().diagonal();
        if ((diag.array() <= S(0)).any()) throw ConstructionError("precision is not positive definite");
        log_det_precision_ = S(2) * diag.array().log().sum();
        log_normalizer_ = S(0.5) * S(dim()) * std::log(S(2) * std::numbers::pi_v<S>) - S(0.5) * log_det_precision_;
    }

    GaussianTarget(Vec<S> mean, Mat<S> precision)
        : GaussianTarget(mean, precision, BlockStructure::unit(mean.size())) {}

    Index dim() const { return mean_.size(); }
    const Vec<S>& mean() const { return mean_; }
    const Mat<S>& precision() const { return precision_; }
    const BlockStructure& blocks() const { return blocks_; }
    const Eigen::LLT<Mat<S>>& llt() const { return llt_; }
    S log_det_precision() const { return log_det_precision_; }
    /// log of the normalizing constant: (d/2) log 2pi - (1/2) log det Q.
    S log_normalizer() const { return log_normalizer_; }

    Mat<S> covariance() const { return llt_.solve(Mat<S>::Identity(dim(), dim())); }

private:
    Vec<S> mean_;
    Mat<S> precision_;
    BlockStructure blocks_;
    Eigen::LLT<Mat<S>> llt_;
    S log_det_precision_{};
    S log_normalizer_{};
};

template <typename S>
struct ConditionNumbers {
    S lambda{};
    S L{};
    S kappa{};
    std::vector<S> block_L;
    S lambda_star{};
    S kappa_star{};
    /// Diagonal of D: coordinate i carries L_m of its block.
    Vec<S> D;
};

namespace detail {

template <typename S>
Vec<S> block_diagonal_weights(const BlockStructure& blocks, const std::vector<S>& block_L) {
    Vec<S> D(blocks.dim());
    for (Index m = 0; m < blocks.num_blocks(); ++m)
        D.segment(blocks.offset(m), blocks.size(m)).setConstant(block_L[static_cast<std::size_t>(m)]);
    return D;
}

template <typename S>
S inverse_or_inf(S v) {
    return v > S(0) ? S(1) / v : std::numeric_limits<S>::infinity();
}

}  // namespace detail

template <typename S>
ConditionNumbers<S> condition_numbers_gaussian(const Mat<S>& Q, const BlockStructure& blocks) {
    detail::require_symmetric(Q, "precision");
    if (blocks.dim() != Q.rows()) throw DimensionError("blocks do not match precision dimension");
    if (!Q.allFinite()) throw ConstructionError("non-finite precision");

    Eigen::SelfAdjointEigenSolver<Mat<S>> es(Q, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw NumericalError("eigensolver failed");
    ConditionNumbers<S> cn;
    cn.L = es.eigenvalues().maxCoeff();
    cn.lambda = es.eigenvalues().minCoeff();
    if (!(cn.lambda > S(1e-12) * std::abs(cn.L))) throw ConstructionError("precision is not positive definite");
    cn.kappa = cn.L / cn.lambda;

    cn.block_L.resize(static_cast<std::size_t>(blocks.num_blocks()));
    for (Index m = 0; m < blocks.num_blocks(); ++m) {
        const Index o = blocks.offset(m), n = blocks.size(m);
        if (n == 1) {
            cn.block_L[static_cast<std::size_t>(m)] = Q(o, o);
        } else {
            Eigen::SelfAdjointEigenSolver<Mat<S>> bs(Q.block(o, o, n, n), Eigen::EigenvaluesOnly);
            cn.block_L[static_cast<std::size_t>(m)] = bs.eigenvalues().maxCoeff();
        }
    }
    cn.D = detail::block_diagonal_weights(blocks, cn.block_L);

    const Vec<S> inv_sqrt = cn.D.array().sqrt().inverse();
    Mat<S> scaled = inv_sqrt.asDiagonal() * Q * inv_sqrt.asDiagonal();
    for (Index m = 0; m < blocks.num_blocks(); ++m)
        if (blocks.size(m) == 1) scaled(blocks.offset(m), blocks.offset(m)) = S(1);
    Eigen::SelfAdjointEigenSolver<Mat<S>> ss(scaled, Eigen::EigenvaluesOnly);
    if (ss.info() != Eigen::Success) throw NumericalError("eigensolver failed");
    cn.lambda_star = ss.eigenvalues().minCoeff();
    cn.kappa_star = S(1) / cn.lambda_star;
    return cn;
}

template <typename S>
ConditionNumbers<S> condition_numbers(const GaussianTarget<S>& t) {
    return condition_numbers_gaussian(t.precision(), t.blocks());
}

template <typename S, typename Derived>
S weighted_norm_L(const Eigen::MatrixBase<Derived>& x, const ConditionNumbers<S>& cn) {
    if (x.size() != cn.D.size()) throw DimensionError("weighted_norm_L: dimension mismatch");
    return std::sqrt((cn.D.array() * x.array().square()).sum());
}

/// U(x) = (1/2)(x - x*)^T Q (x - x*), without the normalizing constant.
template <typename S, typename Derived>
S potential(const GaussianTarget<S>& t, const Eigen::MatrixBase<Derived>& x) {
    if (x.size() != t.dim()) throw DimensionError("potential: dimension mismatch");
    detail::require_finite(x, "x");
    const Vec<S> r = x - t.mean();
    return S(0.5) * r.dot(t.precision() * r);
}

template <typename S, typename Derived>
Vec<S> gradient(const GaussianTarget<S>& t, const Eigen::MatrixBase<Derived>& x) {
    if (x.size() != t.dim()) throw DimensionError("gradient: dimension mismatch");
    detail::require_finite(x, "x");
    return t.precision() * (x - t.mean());
}

/**
 * Target with potential U(x) = U0(x) + sum_m U_m(x_m). Smoothness and
 * convexity constants are metadata supplied by the constructor of the target;
 * they are not estimated.
 */
struct CompositeTarget {
    using Smooth = std::function<double(const VectorXd&)>;
    using SmoothGradient = std::function<VectorXd(const VectorXd&)>;
    using Separable = std::function<double(double)>;
    /// Returns the minimizer of U along block m with the other blocks fixed.
    using ModeHint = std::function<double(const VectorXd&, Index)>;

    std::string name;
    BlockStructure blocks;
    Smooth smooth;
    SmoothGradient smooth_gradient;
    std::vector<Separable> separable;
    std::vector<double> block_L;
    double lambda_star = 0.0;
    std::optional<double> lambda;
    std::optional<double> L;
    VectorXd mode;
    ModeHint conditional_mode;

    Index dim() const { return blocks.dim(); }

    void validate() const {
        if (!smooth || !smooth_gradient) throw ConstructionError("composite target needs U0 and its gradient");
        if (!separable.empty() && (static_cast<Index>(separable.size()) != blocks.num_blocks() || !blocks.all_unit()))
            throw ConstructionError("separable parts require one scalar part per unit block");
        if (static_cast<Index>(block_L.size()) != blocks.num_blocks())
            throw ConstructionError("composite target needs one L_m per block");
        for (double v : block_L)
            if (!(v > 0.0) || !std::isfinite(v)) throw ConstructionError("block constants must be positive");
        if (!(lambda_star >= 0.0) || lambda_star > 1.0 + 1e-12)
            throw ConstructionError("lambda_star must lie in [0, 1]");
        if (mode.size() != 0 && mode.size() != dim()) throw DimensionError("mode has wrong dimension");
    }

    double potential(const VectorXd& x) const {
        if (x.size() != dim()) throw DimensionError("potential: dimension mismatch");
        detail::require_finite(x, "x");
        return potential_unchecked(x);
    }

    double potential_unchecked(const VectorXd& x) const {
        double u = smooth(x);
        for (std::size_t m = 0; m < separable.size(); ++m) u += separable[m](x[static_cast<Index>(m)]);
        return u;
    }

    /// Gradient of U0 plus central differences of the separable parts.
    VectorXd gradient(const VectorXd& x) const {
        if (x.size() != dim()) throw DimensionError("gradient: dimension mismatch");
        detail::require_finite(x, "x");
        VectorXd g = smooth_gradient(x);
        for (std::size_t m = 0; m < separable.size(); ++m) {
            const double xm = x[static_cast<Index>(m)];
            const double h = 1e-6 * std::max(1.0, std::abs(xm));
            g[static_cast<Index>(m)] += (separable[m](xm + h) - separable[m](xm - h)) / (2.0 * h);
        }
        return g;
    }

    ConditionNumbers<double> condition_numbers() const {
        ConditionNumbers<double> cn;
        cn.block_L = block_L;
        cn.D = detail::block_diagonal_weights(blocks, block_L);
        cn.lambda_star = lambda_star;
        cn.kappa_star = detail::inverse_or_inf(lambda_star);
        cn.lambda = lambda.value_or(0.0);
        cn.L = L.value_or(std::numeric_limits<double>::infinity());
        cn.kappa = (cn.lambda > 0.0 && L) ? cn.L / cn.lambda : std::numeric_limits<double>::infinity();
        return cn;
    }
};

inline double potential(const CompositeTarget& t, const VectorXd& x) { return t.potential(x); }
inline VectorXd gradient(const CompositeTarget& t, const VectorXd& x) { return t.gradient(x); }

/// log cosh evaluated without overflow.
inline double log_cosh(double x) {
    const double a = std::abs(x);
    return a + std::log1p(std::exp(-2.0 * a)) - std::numbers::ln2;
}

/// log(1 + e^z) evaluated without overflow.
inline double softplus(double z) {
    return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

/**
 * Bayesian logistic-type potential U0(x) = sum_j log(1 + exp((Ax)_j)) + |x|^2 / (2 s^2)
 * with unit blocks. L_m = (1/4) sum_j A_jm^2 + 1/s^2 bounds the conditional
 * curvature; lambda_star = min_m (1/s^2) / L_m follows from Hess U0 >= I / s^2.
 * An optional l1 weight adds the separable part l1 * |x_m|.
 */
CompositeTarget make_logistic_target(const MatrixXd& A, double prior_scale, double l1 = 0.0);

/**
 * dim 1: U(x) = log cosh x. dim 2: U(x) = log cosh x1 + log cosh x2 + log cosh(x1 + x2).
 * Both are convex and smooth with lambda_star = 0.
 */
CompositeTarget make_logcosh_target(Index dim);

using Target = std::variant<GaussianTarget<double>, CompositeTarget>;

}  // namespace lcgibbs
