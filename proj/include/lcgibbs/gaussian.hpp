#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "lcgibbs/errors.hpp"
#include "lcgibbs/rng.hpp"
#include "lcgibbs/targets.hpp"

namespace lcgibbs {

template <typename S>
class GaussianLaw {
public:
    GaussianLaw(Vec<S> mean, Mat<S> covariance) : mean_(std::move(mean)), cov_(std::move(covariance)) {
        if (cov_.rows() != cov_.cols() || cov_.rows() != mean_.size())
            throw DimensionError("Gaussian law: mean and covariance disagree on dimension");
        if (!mean_.allFinite() || !cov_.allFinite()) throw NumericalError("Gaussian law: non-finite parameters");
        const S scale = std::max<S>(cov_.cwiseAbs().maxCoeff(), std::numeric_limits<S>::min());
        if ((cov_ - cov_.transpose()).cwiseAbs().maxCoeff() > S(1e-10) * scale)
            throw NumericalError("Gaussian law: covariance is not symmetric");
        cov_ = S(0.5) * (cov_ + cov_.transpose()).eval();
        llt_.compute(cov_);
        if (llt_.info() != Eigen::Success || !(llt_.matrixLLT().diagonal().array() > S(0)).all())
            throw NumericalError("Gaussian law: covariance is singular or indefinite");
        log_det_ = S(2) * llt_.matrixLLT().diagonal().array().log().sum();
    }

    Index dim() const { return mean_.size(); }
    const Vec<S>& mean() const { return mean_; }
    const Mat<S>& covariance() const { return cov_; }
    const Eigen::LLT<Mat<S>>& llt() const { return llt_; }
    Mat<S> cholesky() const { return llt_.matrixL(); }
    S log_det_covariance() const { return log_det_; }

    template <typename Derived>
    S log_density(const Eigen::MatrixBase<Derived>& x) const {
        const Vec<S> z = llt_.matrixL().solve(Vec<S>(x - mean_));
        return S(-0.5) * (S(dim()) * std::log(S(2) * std::numbers::pi_v<S>) + log_det_ + z.squaredNorm());
    }

    Vec<S> sample(Rng& rng) const {
        Vec<S> z(dim());
        for (Index i = 0; i < dim(); ++i) z[i] = static_cast<S>(rng.normal());
        return mean_ + llt_.matrixL() * z;
    }

private:
    Vec<S> mean_;
    Mat<S> cov_;
    Eigen::LLT<Mat<S>> llt_;
    S log_det_{};
};

template <typename S>
GaussianLaw<S> law_of(const GaussianTarget<S>& t) {
    return GaussianLaw<S>(t.mean(), t.covariance());
}

template <typename S>
class GaussianMixture {
public:
    GaussianMixture(std::vector<S> weights, std::vector<GaussianLaw<S>> components)
        : weights_(std::move(weights)), components_(std::move(components)) {
        if (weights_.empty() || weights_.size() != components_.size())
            throw ConstructionError("mixture: weights and components disagree");
        S total = 0;
        for (S w : weights_) {
            if (!(w >= S(0))) throw ConstructionError("mixture: negative weight");
            total += w;
        }
        if (std::abs(total - S(1)) > S(1e-12)) throw ConstructionError("mixture: weights must sum to 1");
        for (const auto& c : components_)
            if (c.dim() != components_.front().dim()) throw DimensionError("mixture: component dimensions differ");
        log_weights_.reserve(weights_.size());
        for (S w : weights_) log_weights_.push_back(std::log(w));
    }

    Index dim() const { return components_.front().dim(); }
    const std::vector<S>& weights() const { return weights_; }
    const std::vector<GaussianLaw<S>>& components() const { return components_; }

    template <typename Derived>
    S log_density(const Eigen::MatrixBase<Derived>& x) const {
        std::vector<S> terms(components_.size());
        S mx = -std::numeric_limits<S>::infinity();
        for (std::size_t k = 0; k < components_.size(); ++k) {
            terms[k] = log_weights_[k] + components_[k].log_density(x);
            mx = std::max(mx, terms[k]);
        }
        S acc = 0;
        for (S t : terms) acc += std::exp(t - mx);
        return mx + std::log(acc);
    }

    /// Draws the component index with one uniform, then the component sample.
    Vec<S> sample(Rng& rng) const {
        const double u = rng.uniform();
        double c = 0.0;
        std::size_t k = 0;
        for (; k + 1 < weights_.size(); ++k) {
            c += static_cast<double>(weights_[k]);
            if (u < c) break;
        }
        return components_[k].sample(rng);
    }

private:
    std::vector<S> weights_;
    std::vector<S> log_weights_;
    std::vector<GaussianLaw<S>> components_;
};

template <typename S>
S kl_gaussian(const GaussianLaw<S>& mu, const GaussianLaw<S>& nu) {
    if (mu.dim() != nu.dim()) throw DimensionError("kl_gaussian: dimension mismatch");
    const Mat<S> Lmu = mu.cholesky();
    const Mat<S> W = nu.llt().matrixL().solve(Lmu);
    const Vec<S> z = nu.llt().matrixL().solve(Vec<S>(nu.mean() - mu.mean()));
    const S kl = S(0.5) * (W.squaredNorm() + z.squaredNorm() - S(mu.dim()) + nu.log_det_covariance() -
                           mu.log_det_covariance());
    return std::max(kl, S(0));
}

/// KL(mu | pi) using the target's precision directly.
template <typename S>
S kl_gaussian(const GaussianLaw<S>& mu, const GaussianTarget<S>& pi) {
    if (mu.dim() != pi.dim()) throw DimensionError("kl_gaussian: dimension mismatch");
    const Vec<S> r = mu.mean() - pi.mean();
    const S kl = S(0.5) * ((pi.precision().cwiseProduct(mu.covariance())).sum() + r.dot(pi.precision() * r) -
                           S(mu.dim()) - pi.log_det_precision() - mu.log_det_covariance());
    return std::max(kl, S(0));
}

template <typename S>
S entropy_gaussian(const GaussianLaw<S>& law) {
    return S(-0.5) * (S(law.dim()) * std::log(S(2) * std::numbers::pi_v<S> * std::numbers::e_v<S>) +
                      law.log_det_covariance());
}

/// Expected potential including the log normalizer, so that U(pi) + H(pi) = 0.
template <typename S>
S potential_energy_gaussian(const GaussianLaw<S>& law, const GaussianTarget<S>& pi) {
    if (law.dim() != pi.dim()) throw DimensionError("potential_energy_gaussian: dimension mismatch");
    const Vec<S> r = law.mean() - pi.mean();
    return S(0.5) * ((pi.precision().cwiseProduct(law.covariance())).sum() + r.dot(pi.precision() * r)) +
           pi.log_normalizer();
}

template <typename S>
GaussianLaw<S> marginal_keep(const GaussianLaw<S>& law, std::span<const Index> idx) {
    for (Index i : idx)
        if (i < 0 || i >= law.dim()) throw DimensionError("marginal_keep: index out of range");
    std::vector<Index> v(idx.begin(), idx.end());
    return GaussianLaw<S>(law.mean()(v), law.covariance()(v, v));
}

template <typename S>
GaussianLaw<S> marginal_drop_block(const GaussianLaw<S>& law, const BlockStructure& blocks, Index m) {
    if (blocks.dim() != law.dim()) throw DimensionError("marginal_drop_block: blocks do not match law");
    const Index b[1] = {m};
    const auto keep = blocks.complement_coordinates(b);
    if (keep.empty()) throw DimensionError("marginal_drop_block: cannot drop the only block");
    return marginal_keep(law, std::span<const Index>(keep));
}

/**
 * Law after one random-scan Gibbs step from mu: component m replaces block m by
 * x_m = c + B x_{-m} + noise with B = -Q_mm^{-1} Q_{m,-m}, c = x*_m - B x*_{-m},
 * noise ~ N(0, Q_mm^{-1}).
 */
template <typename S>
GaussianMixture<S> gs_one_step_law(const GaussianLaw<S>& mu, const GaussianTarget<S>& pi) {
    if (mu.dim() != pi.dim()) throw DimensionError("gs_one_step_law: dimension mismatch");
    const auto& blocks = pi.blocks();
    const Index M = blocks.num_blocks();
    std::vector<GaussianLaw<S>> comps;
    comps.reserve(static_cast<std::size_t>(M));
    for (Index m = 0; m < M; ++m) {
        const Index bm[1] = {m};
        const auto in = blocks.coordinates(bm);
        const auto out = blocks.complement_coordinates(bm);
        const Mat<S> Qmm = pi.precision()(in, in);
        Eigen::LLT<Mat<S>> llt(Qmm);
        if (llt.info() != Eigen::Success) throw NumericalError("gs_one_step_law: singular diagonal block");
        Vec<S> mean = mu.mean();
        Mat<S> cov = mu.covariance();
        const Mat<S> Qmm_inv = llt.solve(Mat<S>::Identity(Qmm.rows(), Qmm.cols()));
        if (out.empty()) {
            mean(in) = pi.mean();
            cov = Qmm_inv;
        } else {
            const Mat<S> B = -llt.solve(Mat<S>(pi.precision()(in, out)));
            const Vec<S> c = Vec<S>(pi.mean()(in)) - B * Vec<S>(pi.mean()(out));
            const Mat<S> Soo = mu.covariance()(out, out);
            mean(in) = c + B * Vec<S>(mu.mean()(out));
            const Mat<S> cross = B * Soo;
            cov(in, out) = cross;
            cov(out, in) = cross.transpose();
            cov(in, in) = cross * B.transpose() + Qmm_inv;
        }
        comps.emplace_back(mean, cov);
    }
    return GaussianMixture<S>(std::vector<S>(static_cast<std::size_t>(M), S(1) / S(M)), std::move(comps));
}

/// Spectral gap of random-scan GS on a Gaussian with unit blocks: lambda_min(D^{-1/2} Q D^{-1/2}) / d.
template <typename S>
S amit_gap(const Mat<S>& Q, const BlockStructure& blocks) {
    if (!blocks.all_unit()) throw UnsupportedError("amit_gap requires unit blocks");
    const auto cn = condition_numbers_gaussian(Q, blocks);
    return cn.lambda_star / S(blocks.dim());
}

template <typename S>
struct ConditionalVarianceSum {
    /// sum_m E[Var(v^T X | X_{-m})] = sum_m v_m^2 / Q_mm
    S sum{};
    /// Var(v^T X) = v^T Q^{-1} v
    S variance{};
};

template <typename S>
ConditionalVarianceSum<S> conditional_variance_sum(const Mat<S>& Q, const Vec<S>& v) {
    if (Q.rows() != Q.cols() || Q.rows() != v.size()) throw DimensionError("conditional_variance_sum: dimension mismatch");
    Eigen::LLT<Mat<S>> llt(Q);
    if (llt.info() != Eigen::Success || !(Q.diagonal().array() > S(0)).all())
        throw NumericalError("conditional_variance_sum: singular precision");
    ConditionalVarianceSum<S> r;
    r.sum = (v.array().square() / Q.diagonal().array()).sum();
    r.variance = v.dot(llt.solve(v));
    return r;
}

/// Law of V^T X for X ~ law and V a d x l matrix with orthonormal columns.
template <typename S>
GaussianLaw<S> projected_law(const GaussianLaw<S>& law, const Mat<S>& V) {
    if (V.rows() != law.dim()) throw DimensionError("projected_law: frame dimension mismatch");
    return GaussianLaw<S>(V.transpose() * law.mean(), V.transpose() * law.covariance() * V);
}

}  // namespace lcgibbs
