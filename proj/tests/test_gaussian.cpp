#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "lcgibbs/gaussian.hpp"
#include "lcgibbs/samplers.hpp"
#include "oracles.hpp"

using namespace lcgibbs;

namespace {

MatrixXd corr2() {
    MatrixXd Q(2, 2);
    Q << 1.0, 0.5, 0.5, 1.0;
    return Q;
}

MatrixXd random_cov(Index d, Rng& rng) {
    MatrixXd A(d, d);
    for (Index i = 0; i < d; ++i)
        for (Index j = 0; j < d; ++j) A(i, j) = rng.normal();
    return A * A.transpose() / static_cast<double>(d) + 0.1 * MatrixXd::Identity(d, d);
}

VectorXd random_vec(Index d, Rng& rng) {
    VectorXd v(d);
    for (Index i = 0; i < d; ++i) v[i] = rng.normal();
    return v;
}

}  // namespace

TEST_CASE("KL examples") {
    const GaussianLaw<double> a(VectorXd::Zero(1), MatrixXd::Identity(1, 1));
    const GaussianLaw<double> b(VectorXd::Ones(1), MatrixXd::Identity(1, 1));
    CHECK(kl_gaussian(a, a) == 0.0);
    CHECK(kl_gaussian(a, b) == doctest::Approx(0.5));

    // tensorization over a product
    const GaussianLaw<double> p(Eigen::Vector2d(0.3, -1.0), MatrixXd(Eigen::Vector2d(2.0, 0.5).asDiagonal()));
    const GaussianLaw<double> q(Eigen::Vector2d(1.0, 0.0), MatrixXd(Eigen::Vector2d(1.0, 3.0).asDiagonal()));
    double sum = 0.0;
    for (Index i = 0; i < 2; ++i) {
        const GaussianLaw<double> pi(p.mean().segment(i, 1), p.covariance().block(i, i, 1, 1));
        const GaussianLaw<double> qi(q.mean().segment(i, 1), q.covariance().block(i, i, 1, 1));
        sum += kl_gaussian(pi, qi);
    }
    CHECK(std::abs(kl_gaussian(p, q) - sum) < 1e-12);
}

TEST_CASE("KL against an explicit-inverse oracle") {
    Rng rng(1, 0);
    for (int trial = 0; trial < 100; ++trial) {
        const Index d = 1 + trial % 8;
        const GaussianLaw<double> mu(random_vec(d, rng), random_cov(d, rng));
        const MatrixXd S = random_cov(d, rng);
        const GaussianLaw<double> nu(random_vec(d, rng), S);
        const double ref = oracle::kl(mu.mean(), mu.covariance(), nu.mean(), nu.covariance());
        CHECK(kl_gaussian(mu, nu) == doctest::Approx(ref).epsilon(1e-9));
        const GaussianTarget<double> pi(nu.mean(), MatrixXd(S.inverse()));
        CHECK(kl_gaussian(mu, pi) == doctest::Approx(ref).epsilon(1e-8));
    }
}

TEST_CASE("entropy and potential energy") {
    const GaussianLaw<double> z(VectorXd::Zero(1), MatrixXd::Identity(1, 1));
    CHECK(entropy_gaussian(z) == doctest::Approx(-1.41894).epsilon(1e-5));

    Rng rng(2, 0);
    for (int trial = 0; trial < 100; ++trial) {
        const Index d = 1 + trial % 6;
        const MatrixXd Q = random_cov(d, rng);
        const GaussianTarget<double> pi(random_vec(d, rng), Q);
        const GaussianLaw<double> mu(random_vec(d, rng), random_cov(d, rng));
        const double ref = oracle::kl(mu.mean(), mu.covariance(), pi.mean(), MatrixXd(Q.inverse()));
        CHECK(std::abs(potential_energy_gaussian(mu, pi) + entropy_gaussian(mu) - ref) < 1e-9);
        CHECK(std::abs(potential_energy_gaussian(law_of(pi), pi) + entropy_gaussian(law_of(pi))) < 1e-9);
        CHECK(entropy_gaussian(mu) == doctest::Approx(-oracle::entropy(mu.covariance())).epsilon(1e-10));
    }
}

TEST_CASE("Gaussian law density and sampling") {
    const GaussianLaw<double> law(Eigen::Vector2d(1.0, 2.0), corr2());
    const Eigen::Vector2d x(0.5, 0.0);
    const MatrixXd Si = corr2().inverse();
    const Eigen::Vector2d r = x - law.mean();
    const double ref = -std::log(2.0 * std::numbers::pi) - 0.5 * std::log(corr2().determinant()) - 0.5 * r.dot(Si * r);
    CHECK(law.log_density(x) == doctest::Approx(ref).epsilon(1e-12));
    CHECK_THROWS_AS(GaussianLaw<double>(VectorXd::Zero(2), MatrixXd::Zero(2, 2)), NumericalError);
    CHECK_THROWS_AS(GaussianLaw<double>(VectorXd::Zero(3), MatrixXd::Identity(2, 2)), DimensionError);
}

TEST_CASE("marginals") {
    const GaussianLaw<double> law(Eigen::Vector2d(1.5, -2.0), corr2());
    const auto m = marginal_drop_block(law, BlockStructure::unit(2), 1);
    CHECK(m.dim() == 1);
    CHECK(m.mean()[0] == 1.5);
    CHECK(m.covariance()(0, 0) == 1.0);
    const Index keep[] = {1};
    CHECK(marginal_keep(law, keep).mean()[0] == -2.0);
    CHECK_THROWS_AS(marginal_drop_block(GaussianLaw<double>(VectorXd::Zero(1), MatrixXd::Identity(1, 1)),
                                        BlockStructure::unit(1), 0),
                    DimensionError);
}

TEST_CASE("KL chain rule over a dropped block") {
    Rng rng(3, 0);
    for (int trial = 0; trial < 50; ++trial) {
        const Index d = 2 + trial % 5;
        const GaussianLaw<double> mu(random_vec(d, rng), random_cov(d, rng));
        const GaussianLaw<double> nu(random_vec(d, rng), random_cov(d, rng));
        const auto blocks = BlockStructure::unit(d);
        const Index m = trial % d;
        // KL(mu | nu) = KL(mu_{-m} | nu_{-m}) + E_{mu_{-m}} KL(mu(.|x_{-m}) | nu(.|x_{-m})),
        // both conditionals being 1-D Gaussians whose means are affine in x_{-m}.
        const double marg = kl_gaussian(marginal_drop_block(mu, blocks, m), marginal_drop_block(nu, blocks, m));
        std::vector<Index> rest;
        for (Index i = 0; i < d; ++i)
            if (i != m) rest.push_back(i);
        auto conditional = [&](const GaussianLaw<double>& g) {
            const MatrixXd& S = g.covariance();
            const MatrixXd Srr_inv = S(rest, rest).inverse();
            const VectorXd beta = Srr_inv * S(rest, std::vector<Index>{m}).col(0);
            const double var = S(m, m) - S(std::vector<Index>{m}, rest).row(0).dot(beta);
            return std::make_pair(beta, var);
        };
        const auto [bm, vm] = conditional(mu);
        const auto [bn, vn] = conditional(nu);
        // conditional mean difference is c + (bm - bn)^T x_rest with x_rest ~ mu_rest
        const VectorXd mrest = mu.mean()(rest);
        const VectorXd nrest = nu.mean()(rest);
        const double c0 = (mu.mean()[m] - bm.dot(mrest)) - (nu.mean()[m] - bn.dot(nrest));
        const VectorXd db = bm - bn;
        const double e_mean = c0 + db.dot(mrest);
        const double e_sq = e_mean * e_mean + db.dot(mu.covariance()(rest, rest) * db);
        const double cond = 0.5 * (vm / vn + e_sq / vn - 1.0 + std::log(vn / vm));
        CHECK(std::abs(kl_gaussian(mu, nu) - marg - cond) < 1e-9);
    }
}

TEST_CASE("one-step GS law") {
    Rng rng(4, 0);
    SUBCASE("fixed point") {
        const GaussianTarget<double> pi(Eigen::Vector3d(1.0, 0.0, -1.0), MatrixXd(random_cov(3, rng).inverse()));
        const auto mix = gs_one_step_law(law_of(pi), pi);
        for (const auto& c : mix.components()) {
            CHECK((c.mean() - pi.mean()).norm() < 1e-10);
            CHECK((c.covariance() - pi.covariance()).cwiseAbs().maxCoeff() < 1e-10);
        }
    }
    SUBCASE("components keep the untouched marginal") {
        for (int trial = 0; trial < 20; ++trial) {
            const Index d = 2 + trial % 4;
            const GaussianTarget<double> pi(random_vec(d, rng), MatrixXd(random_cov(d, rng).inverse()));
            const GaussianLaw<double> mu(random_vec(d, rng), random_cov(d, rng));
            const auto mix = gs_one_step_law(mu, pi);
            for (Index m = 0; m < d; ++m) {
                const auto a = marginal_drop_block(mix.components()[static_cast<std::size_t>(m)], pi.blocks(), m);
                const auto b = marginal_drop_block(mu, pi.blocks(), m);
                CHECK((a.mean() - b.mean()).cwiseAbs().maxCoeff() < 1e-10);
                CHECK((a.covariance() - b.covariance()).cwiseAbs().maxCoeff() < 1e-10);
            }
        }
    }
    SUBCASE("variational characterization") {
        // Component m minimizes KL(. | pi) among laws with mu's marginal off block m.
        for (int trial = 0; trial < 30; ++trial) {
            const Index d = 2 + trial % 4;
            const GaussianTarget<double> pi(random_vec(d, rng), MatrixXd(random_cov(d, rng).inverse()));
            const GaussianLaw<double> mu(random_vec(d, rng), random_cov(d, rng));
            const auto mix = gs_one_step_law(mu, pi);
            const Index m = trial % d;
            const double best = kl_gaussian(mix.components()[static_cast<std::size_t>(m)], pi);
            for (int k = 0; k < 20; ++k) {
                // nu = mu_{-m} glued with x_m = a + b^T x_{-m} + s * noise
                std::vector<Index> rest;
                for (Index i = 0; i < d; ++i)
                    if (i != m) rest.push_back(i);
                const VectorXd b = random_vec(d - 1, rng);
                const double a = rng.normal(), s2 = std::exp(rng.normal());
                VectorXd mean = mu.mean();
                MatrixXd cov = mu.covariance();
                const MatrixXd Srr = mu.covariance()(rest, rest);
                mean[m] = a + b.dot(mu.mean()(rest));
                const VectorXd cross = Srr * b;
                for (std::size_t j = 0; j < rest.size(); ++j) {
                    cov(m, rest[j]) = cross[static_cast<Index>(j)];
                    cov(rest[j], m) = cross[static_cast<Index>(j)];
                }
                cov(m, m) = b.dot(cross) + s2;
                CHECK(best <= kl_gaussian(GaussianLaw<double>(mean, cov), pi) + 1e-9);
            }
        }
    }
    SUBCASE("mixture moments agree with one GS step applied to mu-draws") {
        MatrixXd Q(2, 2);
        Q << 2.0, 0.8, 0.8, 1.0;
        const GaussianTarget<double> pi(Eigen::Vector2d(0.5, -0.5), Q);
        const GaussianLaw<double> mu(Eigen::Vector2d(2.0, 1.0), MatrixXd(0.5 * MatrixXd::Identity(2, 2)));
        const auto mix = gs_one_step_law(mu, pi);
        VectorXd mmean = VectorXd::Zero(2);
        MatrixXd msecond = MatrixXd::Zero(2, 2);
        for (std::size_t k = 0; k < 2; ++k) {
            const auto& c = mix.components()[k];
            mmean += 0.5 * c.mean();
            msecond += 0.5 * (c.covariance() + c.mean() * c.mean().transpose());
        }
        const Target t = pi;
        Rng r(5, 0);
        const int n = 1000000;
        std::vector<double> x0(n), x1(n), x00(n), x11(n), x01(n);
        for (int i = 0; i < n; ++i) {
            ChainState s;
            s.x = mu.sample(r);
            s = gs_step(t, s, r);
            x0[i] = s.x[0];
            x1[i] = s.x[1];
            x00[i] = s.x[0] * s.x[0];
            x11[i] = s.x[1] * s.x[1];
            x01[i] = s.x[0] * s.x[1];
        }
        auto within = [n](const std::vector<double>& v, double ref) {
            return std::abs(oracle::mean(v) - ref) <= 4.0 * std::sqrt(oracle::variance(v) / n);
        };
        CHECK(within(x0, mmean[0]));
        CHECK(within(x1, mmean[1]));
        CHECK(within(x00, msecond(0, 0)));
        CHECK(within(x11, msecond(1, 1)));
        CHECK(within(x01, msecond(0, 1)));
    }
}

TEST_CASE("Amit gap") {
    CHECK(amit_gap<double>(MatrixXd::Identity(3, 3), BlockStructure::unit(3)) == doctest::Approx(1.0 / 3.0));
    CHECK(amit_gap<double>(corr2(), BlockStructure::unit(2)) == doctest::Approx(0.25));
    CHECK_THROWS_AS(amit_gap<double>(corr2(), BlockStructure({2})), UnsupportedError);

    // Oracle: on linear functionals the random-scan GS operator acts as I - D^{-1} Q / d
    // (D = diag Q), so the gap is one minus its largest eigenvalue.
    Rng rng(6, 0);
    for (int trial = 0; trial < 100; ++trial) {
        const Index d = 2 + trial % 9;
        const MatrixXd Q = random_cov(d, rng);
        const MatrixXd P = MatrixXd::Identity(d, d) - Q.diagonal().cwiseInverse().asDiagonal() * Q / double(d);
        Eigen::EigenSolver<MatrixXd> es(P);
        const double top = es.eigenvalues().real().maxCoeff();
        const auto blocks = BlockStructure::unit(d);
        const double gap = amit_gap<double>(Q, blocks);
        CHECK(std::abs(gap - (1.0 - top)) < 1e-10);
        const double ks = condition_numbers_gaussian<double>(Q, blocks).kappa_star;
        CHECK(std::abs(gap - 1.0 / (double(d) * ks)) < 1e-10);
        CHECK(1.0 - 2.0 * gap <= 1.0 - 1.0 / (double(d) * ks) + 1e-12);
    }
}

TEST_CASE("conditional variance sums") {
    const auto r = conditional_variance_sum<double>(corr2(), Eigen::Vector2d(1.0, 0.0));
    CHECK(r.sum == doctest::Approx(1.0));
    CHECK(r.variance == doctest::Approx(4.0 / 3.0));

    const MatrixXd D = Eigen::Vector3d(1.0, 2.0, 4.0).asDiagonal();
    const auto rd = conditional_variance_sum<double>(D, Eigen::Vector3d(1.0, -1.0, 2.0));
    CHECK(rd.sum == doctest::Approx(rd.variance));

    Rng rng(7, 0);
    for (int trial = 0; trial < 200; ++trial) {
        const Index d = 2 + trial % 7;
        const MatrixXd Q = random_cov(d, rng);
        const VectorXd v = random_vec(d, rng);
        const auto c = conditional_variance_sum<double>(Q, v);
        const double ks = condition_numbers_gaussian<double>(Q, BlockStructure::unit(d)).kappa_star;
        CHECK(c.variance == doctest::Approx(v.dot(Q.inverse() * v)).epsilon(1e-9));
        CHECK(c.sum >= c.variance / (2.0 * ks) - 1e-9);
    }
}

TEST_CASE("projected laws") {
    const GaussianLaw<double> law(Eigen::Vector2d(1.0, 2.0), corr2());
    const auto same = projected_law<double>(law, MatrixXd::Identity(2, 2));
    CHECK(same.mean() == law.mean());
    CHECK(same.covariance() == law.covariance());
    const auto first = projected_law<double>(law, MatrixXd(Eigen::Vector2d(1.0, 0.0)));
    CHECK(first.mean()[0] == 1.0);
    CHECK(first.covariance()(0, 0) == 1.0);

    Rng rng(8, 0);
    const GaussianLaw<double> iso(VectorXd::Zero(4), 2.5 * MatrixXd::Identity(4, 4));
    for (int k = 0; k < 20; ++k) {
        const auto f = sample_stiefel_frame(4, 2, rng);
        const auto p = projected_law<double>(iso, f.columns());
        CHECK((p.covariance() - 2.5 * MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("mixture sampling and density") {
    const GaussianLaw<double> a(VectorXd::Constant(1, -2.0), MatrixXd::Identity(1, 1));
    const GaussianLaw<double> b(VectorXd::Constant(1, 3.0), MatrixXd::Constant(1, 1, 0.25));
    const GaussianMixture<double> mix({0.3, 0.7}, {a, b});
    const VectorXd x = VectorXd::Constant(1, 0.4);
    CHECK(std::exp(mix.log_density(x)) ==
          doctest::Approx(0.3 * std::exp(a.log_density(x)) + 0.7 * std::exp(b.log_density(x))).epsilon(1e-12));
    Rng rng(9, 0);
    std::vector<double> v;
    for (int i = 0; i < 100000; ++i) v.push_back(mix.sample(rng)[0]);
    const double m = 0.3 * -2.0 + 0.7 * 3.0;
    CHECK(std::abs(oracle::mean(v) - m) < 4.0 * std::sqrt(oracle::variance(v) / v.size()));
    CHECK_THROWS_AS(GaussianMixture<double>({0.5, 0.6}, {a, b}), ConstructionError);
}

TEST_CASE("scalar templates: float instances") {
    const GaussianLaw<float> a(Eigen::VectorXf::Zero(2), Eigen::MatrixXf::Identity(2, 2));
    const GaussianLaw<float> b(Eigen::VectorXf::Ones(2), Eigen::MatrixXf::Identity(2, 2));
    CHECK(kl_gaussian(a, b) == doctest::Approx(1.0f).epsilon(1e-6));
}
