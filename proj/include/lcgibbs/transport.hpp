#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <vector>

#include "lcgibbs/blocks.hpp"
#include "lcgibbs/errors.hpp"
#include "lcgibbs/gaussian.hpp"

namespace lcgibbs {

/// T(x) = b + A x with A lower triangular and positive on the diagonal.
template <typename S>
class AffineTriangularMap {
public:
    AffineTriangularMap(Mat<S> A, Vec<S> b) : A_(std::move(A)), b_(std::move(b)) {
        if (A_.rows() != A_.cols() || A_.rows() != b_.size()) throw DimensionError("affine map: dimension mismatch");
        if (!A_.allFinite() || !b_.allFinite()) throw ConstructionError("affine map: non-finite entries");
        for (Index i = 0; i < A_.rows(); ++i) {
            if (!(A_(i, i) > S(0))) throw ConstructionError("affine map: diagonal must be positive");
            for (Index j = i + 1; j < A_.cols(); ++j)
                if (A_(i, j) != S(0)) throw ConstructionError("affine map: matrix must be lower triangular");
        }
    }

    static AffineTriangularMap identity(Index d) { return {Mat<S>::Identity(d, d), Vec<S>::Zero(d)}; }

    Index dim() const { return b_.size(); }
    const Mat<S>& matrix() const { return A_; }
    const Vec<S>& shift() const { return b_; }

    template <typename Derived>
    Vec<S> operator()(const Eigen::MatrixBase<Derived>& x) const {
        return b_ + A_ * x;
    }

    S log_det() const { return A_.diagonal().array().log().sum(); }

    GaussianLaw<S> pushforward(const GaussianLaw<S>& mu) const {
        if (mu.dim() != dim()) throw DimensionError("affine map: law dimension mismatch");
        return GaussianLaw<S>(b_ + A_ * mu.mean(), A_ * mu.covariance() * A_.transpose());
    }

    /// (this o inner)(x) = this(inner(x)).
    AffineTriangularMap compose(const AffineTriangularMap& inner) const {
        if (inner.dim() != dim()) throw DimensionError("affine map: composition dimension mismatch");
        Mat<S> A = (A_ * inner.A_).template triangularView<Eigen::Lower>();
        return {A, A_ * inner.b_ + b_};
    }

private:
    Mat<S> A_;
    Vec<S> b_;
};

/// Knothe-Rosenblatt map between Gaussians: A = L_nu L_mu^{-1}, b = m_nu - A m_mu.
template <typename S>
AffineTriangularMap<S> kr_map_gaussian(const GaussianLaw<S>& mu, const GaussianLaw<S>& nu) {
    if (mu.dim() != nu.dim()) throw DimensionError("kr_map_gaussian: dimension mismatch");
    const Mat<S> Lmu = mu.cholesky();
    const Mat<S> Lnu = nu.cholesky();
    // A L_mu = L_nu  <=>  L_mu^T A^T = L_nu^T
    Mat<S> At = Lmu.transpose().template triangularView<Eigen::Upper>().solve(Mat<S>(Lnu.transpose()));
    Mat<S> A = At.transpose().template triangularView<Eigen::Lower>();
    if (!A.allFinite() || !(A.diagonal().array() > S(0)).all())
        throw NumericalError("kr_map_gaussian: degenerate Cholesky factors");
    Vec<S> b = nu.mean() - A * mu.mean();
    return {A, b};
}

/// H(T#mu) = H(mu) - log det A.
template <typename S>
S pushforward_entropy(const AffineTriangularMap<S>& T, const GaussianLaw<S>& mu) {
    if (T.dim() != mu.dim()) throw DimensionError("pushforward_entropy: dimension mismatch");
    return entropy_gaussian(mu) - T.log_det();
}

/**
 * Map that moves only block m towards T: rows of block m are
 * (1 - t) e_i + t A_i with shift t b_i, all other rows are identity rows.
 */
template <typename S>
AffineTriangularMap<S> partial_map(const AffineTriangularMap<S>& T, const BlockStructure& blocks, Index m, S t) {
    if (blocks.dim() != T.dim()) throw DimensionError("partial_map: blocks do not match the map");
    blocks.check_block(m);
    if (!(t >= S(0) && t <= S(1))) throw ConfigError("partial_map: t must lie in [0, 1]");
    const Index d = T.dim();
    Mat<S> A = Mat<S>::Identity(d, d);
    Vec<S> b = Vec<S>::Zero(d);
    for (Index i = blocks.offset(m); i < blocks.offset(m) + blocks.size(m); ++i) {
        A.row(i) = t * T.matrix().row(i);
        A(i, i) += S(1) - t;
        b[i] = t * T.shift()[i];
    }
    return {A, b};
}

/// H([(1 - t) Id + t T]#mu) for each t in the grid.
template <typename S>
std::vector<S> entropy_along_path(const AffineTriangularMap<S>& T, const GaussianLaw<S>& mu,
                                  const std::vector<S>& t_grid) {
    if (T.dim() != mu.dim()) throw DimensionError("entropy_along_path: dimension mismatch");
    const S h0 = entropy_gaussian(mu);
    std::vector<S> out;
    out.reserve(t_grid.size());
    for (S t : t_grid) {
        if (!(t >= S(0) && t <= S(1))) throw ConfigError("entropy_along_path: t must lie in [0, 1]");
        S ld = 0;
        for (Index i = 0; i < T.dim(); ++i) {
            const S a = (S(1) - t) + t * T.matrix()(i, i);
            if (!(a > S(0))) throw NumericalError("entropy_along_path: nonpositive interpolated diagonal");
            ld += std::log(a);
        }
        out.push_back(h0 - ld);
    }
    return out;
}

/// log det of each diagonal block of A; they sum to log det A.
template <typename S>
std::vector<S> block_log_dets(const AffineTriangularMap<S>& T, const BlockStructure& blocks) {
    if (blocks.dim() != T.dim()) throw DimensionError("block_log_dets: blocks do not match the map");
    std::vector<S> out;
    for (Index m = 0; m < blocks.num_blocks(); ++m)
        out.push_back(T.matrix().diagonal().segment(blocks.offset(m), blocks.size(m)).array().log().sum());
    return out;
}

}  // namespace lcgibbs
