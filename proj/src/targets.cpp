#include "lcgibbs/targets.hpp"

#include <cmath>

namespace lcgibbs {

CompositeTarget make_logistic_target(const MatrixXd& A, double prior_scale, double l1) {
    if (!(prior_scale > 0.0) || !std::isfinite(prior_scale)) throw ConstructionError("prior_scale must be positive");
    if (!(l1 >= 0.0)) throw ConstructionError("l1 weight must be nonnegative");
    if (A.cols() < 1) throw DimensionError("design matrix needs at least one column");
    if (!A.allFinite()) throw ConstructionError("design matrix has non-finite entries");

    const Index d = A.cols();
    const double prec = 1.0 / (prior_scale * prior_scale);
    CompositeTarget t;
    t.name = "logistic";
    t.blocks = BlockStructure::unit(d);
    t.smooth = [A, prec](const VectorXd& x) {
        const VectorXd z = A * x;
        double u = 0.5 * prec * x.squaredNorm();
        for (Index j = 0; j < z.size(); ++j) u += softplus(z[j]);
        return u;
    };
    t.smooth_gradient = [A, prec](const VectorXd& x) {
        const VectorXd z = A * x;
        VectorXd s(z.size());
        for (Index j = 0; j < z.size(); ++j) s[j] = 1.0 / (1.0 + std::exp(-z[j]));
        return VectorXd(A.transpose() * s + prec * x);
    };
    t.block_L.resize(static_cast<std::size_t>(d));
    double ls = 1.0;
    for (Index m = 0; m < d; ++m) {
        const double Lm = 0.25 * A.col(m).squaredNorm() + prec;
        t.block_L[static_cast<std::size_t>(m)] = Lm;
        ls = std::min(ls, prec / Lm);
    }
    t.lambda_star = ls;
    t.lambda = prec;
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.25 * A.transpose() * A, Eigen::EigenvaluesOnly);
    t.L = es.eigenvalues().maxCoeff() + prec;
    if (l1 > 0.0) {
        t.separable.assign(static_cast<std::size_t>(d), [l1](double v) { return l1 * std::abs(v); });
    }
    t.validate();
    return t;
}

CompositeTarget make_logcosh_target(Index dim) {
    CompositeTarget t;
    t.lambda_star = 0.0;
    t.lambda = 0.0;
    if (dim == 1) {
        t.name = "logcosh1";
        t.blocks = BlockStructure::unit(1);
        t.smooth = [](const VectorXd& x) { return log_cosh(x[0]); };
        t.smooth_gradient = [](const VectorXd& x) { return VectorXd::Constant(1, std::tanh(x[0])); };
        t.block_L = {1.0};
        t.L = 1.0;
        t.conditional_mode = [](const VectorXd&, Index) { return 0.0; };
    } else if (dim == 2) {
        t.name = "logcosh2";
        t.blocks = BlockStructure::unit(2);
        t.smooth = [](const VectorXd& x) { return log_cosh(x[0]) + log_cosh(x[1]) + log_cosh(x[0] + x[1]); };
        t.smooth_gradient = [](const VectorXd& x) {
            const double c = std::tanh(x[0] + x[1]);
            VectorXd g(2);
            g << std::tanh(x[0]) + c, std::tanh(x[1]) + c;
            return g;
        };
        t.block_L = {2.0, 2.0};
        t.L = 3.0;
        // tanh is odd and increasing, so tanh(x_m) = -tanh(x_m + x_o) forces x_m = -x_o / 2.
        t.conditional_mode = [](const VectorXd& x, Index m) { return -0.5 * x[1 - m]; };
    } else {
        throw UnsupportedError("logcosh target is defined for dim 1 or 2");
    }
    t.mode = VectorXd::Zero(dim);
    t.validate();
    return t;
}

}  // namespace lcgibbs
