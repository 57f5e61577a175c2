#include <doctest.h>

#include <cmath>

#include "lcgibbs/rng.hpp"
#include "lcgibbs/target_io.hpp"
#include "lcgibbs/targets.hpp"

using namespace lcgibbs;

namespace {

MatrixXd random_matrix(Index r, Index c, Rng& rng) {
    MatrixXd A(r, c);
    for (Index i = 0; i < r; ++i)
        for (Index j = 0; j < c; ++j) A(i, j) = rng.normal();
    return A;
}

MatrixXd random_spd_matrix(Index d, Rng& rng) {
    const MatrixXd A = random_matrix(d, d, rng);
    return A * A.transpose() + 0.05 * MatrixXd::Identity(d, d);
}

Eigen::Matrix2d corr2() {
    Eigen::Matrix2d Q;
    Q << 1.0, 0.5, 0.5, 1.0;
    return Q;
}

}  // namespace

TEST_CASE("block structure offsets") {
    const BlockStructure b({2, 1, 3});
    CHECK(b.dim() == 6);
    CHECK(b.num_blocks() == 3);
    CHECK(b.offset(0) == 0);
    CHECK(b.offset(1) == 2);
    CHECK(b.offset(2) == 3);
    const Index s[] = {2, 0};
    CHECK(b.coordinates(s) == std::vector<Index>{0, 1, 3, 4, 5});
    CHECK(b.complement_coordinates(s) == std::vector<Index>{2});
    CHECK_THROWS_AS(BlockStructure({1, 0}), ConstructionError);
    CHECK_THROWS_AS(BlockStructure(std::vector<Index>{}), ConstructionError);
}

TEST_CASE("Gaussian target construction rejects bad precisions") {
    MatrixXd Q = MatrixXd::Identity(2, 2);
    Q(0, 1) = 0.3;
    CHECK_THROWS_AS(GaussianTarget<double>(VectorXd::Zero(2), Q), ConstructionError);
    MatrixXd N(2, 2);
    N << 1.0, 2.0, 2.0, 1.0;
    CHECK_THROWS_AS(GaussianTarget<double>(VectorXd::Zero(2), N), ConstructionError);
    CHECK_THROWS_AS(GaussianTarget<double>(VectorXd::Zero(3), MatrixXd::Identity(2, 2)), DimensionError);
    CHECK_THROWS_AS(GaussianTarget<double>(VectorXd::Zero(2), MatrixXd::Identity(2, 2), BlockStructure({3})),
                    DimensionError);
}

TEST_CASE("condition numbers of small examples") {
    const auto b = BlockStructure::unit(2);
    SUBCASE("identity") {
        const auto cn = condition_numbers_gaussian<double>(MatrixXd::Identity(2, 2), b);
        CHECK(cn.kappa == doctest::Approx(1.0));
        CHECK(cn.kappa_star == doctest::Approx(1.0));
    }
    SUBCASE("separable diag(1, 9)") {
        MatrixXd Q = MatrixXd::Zero(2, 2);
        Q(0, 0) = 1.0;
        Q(1, 1) = 9.0;
        const auto cn = condition_numbers_gaussian<double>(Q, b);
        CHECK(cn.kappa == doctest::Approx(9.0));
        CHECK(cn.kappa_star == 1.0);
        CHECK(cn.block_L[0] == 1.0);
        CHECK(cn.block_L[1] == 9.0);
    }
    SUBCASE("correlated pair") {
        // eigenvalues 0.5 and 1.5, D = Id
        const auto cn = condition_numbers_gaussian<double>(MatrixXd(corr2()), b);
        CHECK(cn.lambda == doctest::Approx(0.5));
        CHECK(cn.L == doctest::Approx(1.5));
        CHECK(cn.kappa == doctest::Approx(3.0));
        CHECK(cn.kappa_star == doctest::Approx(2.0));
    }
    SUBCASE("one block of dimension two") {
        const auto cn = condition_numbers_gaussian<double>(MatrixXd(corr2()), BlockStructure({2}));
        CHECK(cn.block_L[0] == doctest::Approx(1.5));
        CHECK(cn.kappa_star == doctest::Approx(3.0));
    }
}

TEST_CASE("kappa star is invariant under diagonal rescaling") {
    Rng rng(11, 0);
    for (int trial = 0; trial < 50; ++trial) {
        const Index d = 2 + trial % 7;
        const MatrixXd Q = random_spd_matrix(d, rng);
        VectorXd s(d);
        for (Index i = 0; i < d; ++i) s[i] = std::exp(2.0 * rng.normal());
        const MatrixXd SQS = s.asDiagonal() * Q * s.asDiagonal();
        const auto b = BlockStructure::unit(d);
        const double k1 = condition_numbers_gaussian<double>(Q, b).kappa_star;
        const double k2 = condition_numbers_gaussian<double>(MatrixXd(0.5 * (SQS + SQS.transpose())), b).kappa_star;
        CHECK(std::abs(k1 - k2) <= 1e-9 * k1);
    }
}

TEST_CASE("1 <= kappa star <= kappa on random matrices") {
    Rng rng(12, 0);
    for (int trial = 0; trial < 200; ++trial) {
        const Index d = 2 + trial % 11;
        const auto cn = condition_numbers_gaussian<double>(random_spd_matrix(d, rng), BlockStructure::unit(d));
        CHECK(cn.kappa_star >= 1.0 - 1e-9);
        CHECK(cn.kappa_star <= cn.kappa * (1.0 + 1e-9));
    }
}

TEST_CASE("weighted norm") {
    ConditionNumbers<double> cn;
    cn.D = Eigen::Vector2d(1.0, 4.0);
    CHECK(weighted_norm_L(Eigen::Vector2d(1.0, 1.0), cn) == doctest::Approx(std::sqrt(5.0)));
    CHECK(weighted_norm_L(Eigen::Vector2d::Zero(), cn) == 0.0);
    cn.D = Eigen::Vector2d::Ones();
    CHECK(weighted_norm_L(Eigen::Vector2d(3.0, 4.0), cn) == doctest::Approx(5.0));
    CHECK_THROWS_AS(weighted_norm_L(Eigen::Vector3d::Zero(), cn), DimensionError);
}

TEST_CASE("Gaussian potential and gradient") {
    const GaussianTarget<double> pi(VectorXd::Zero(2), MatrixXd::Identity(2, 2));
    CHECK(potential(pi, Eigen::Vector2d(1.0, 0.0)) == doctest::Approx(0.5));
    CHECK(gradient(pi, Eigen::Vector2d(1.0, 0.0)).isApprox(Eigen::Vector2d(1.0, 0.0)));
    const GaussianTarget<double> p2(Eigen::Vector2d(1.0, -2.0), MatrixXd(corr2()));
    CHECK(potential(p2, Eigen::Vector2d(1.0, -2.0)) == 0.0);
    CHECK(gradient(p2, Eigen::Vector2d(1.0, -2.0)).norm() == 0.0);
    CHECK_THROWS_AS(potential(pi, Eigen::Vector2d(NAN, 0.0)), InputError);
    CHECK_THROWS_AS(potential(pi, Eigen::Vector3d::Zero()), DimensionError);
}

TEST_CASE("logistic gradient agrees with central differences") {
    Rng rng(13, 0);
    const MatrixXd A = random_matrix(5, 3, rng);
    for (double l1 : {0.0, 0.3}) {
        const auto t = make_logistic_target(A, 2.0, l1);
        for (int k = 0; k < 10; ++k) {
            VectorXd x(3);
            for (Index i = 0; i < 3; ++i) x[i] = rng.normal() + 0.5;  // away from the l1 kink
            const VectorXd g = t.gradient(x);
            for (Index i = 0; i < 3; ++i) {
                const double h = 1e-5;
                VectorXd xp = x, xm = x;
                xp[i] += h;
                xm[i] -= h;
                const double fd = (t.potential(xp) - t.potential(xm)) / (2.0 * h);
                CHECK(std::abs(fd - g[i]) <= 1e-5 * std::max(1.0, std::abs(fd)));
            }
        }
    }
}

TEST_CASE("logistic potential matches its definition") {
    MatrixXd A(2, 2);
    A << 1.0, -1.0, 0.5, 2.0;
    const auto t = make_logistic_target(A, 1.5, 0.2);
    const Eigen::Vector2d x(0.3, -0.7);
    double u = 0.0;
    for (int j = 0; j < 2; ++j) u += std::log(1.0 + std::exp(A.row(j).dot(x)));
    u += x.squaredNorm() / (2.0 * 1.5 * 1.5) + 0.2 * (0.3 + 0.7);
    CHECK(t.potential(x) == doctest::Approx(u).epsilon(1e-12));
    CHECK(t.lambda_star > 0.0);
    CHECK(t.lambda_star <= 1.0);
}

TEST_CASE("separable parts are midpoint convex") {
    Rng rng(14, 0);
    const auto t = make_logistic_target(MatrixXd::Identity(2, 2), 1.0, 0.5);
    for (const auto& Um : t.separable)
        for (int k = 0; k < 100; ++k) {
            const double a = 3.0 * rng.normal(), b = 3.0 * rng.normal();
            CHECK(Um(0.5 * (a + b)) <= 0.5 * (Um(a) + Um(b)) + 1e-10);
        }
}

TEST_CASE("log-cosh targets") {
    const auto t1 = make_logcosh_target(1);
    CHECK(t1.potential(VectorXd::Constant(1, 0.7)) == doctest::Approx(std::log(std::cosh(0.7))));
    CHECK(t1.lambda_star == 0.0);
    CHECK(std::isinf(t1.condition_numbers().kappa_star));
    const auto t2 = make_logcosh_target(2);
    const Eigen::Vector2d x(0.4, -1.1);
    CHECK(t2.potential(x) ==
          doctest::Approx(std::log(std::cosh(0.4)) + std::log(std::cosh(-1.1)) + std::log(std::cosh(-0.7))));
    CHECK(log_cosh(800.0) == doctest::Approx(800.0 - std::log(2.0)));
    CHECK_THROWS(make_logcosh_target(3));
}

TEST_CASE("target JSON parsing") {
    const auto g = parse_target(R"({"type":"gaussian","mean":[1,2,3],"precision":[[2,0,0],[0,2,0.5],[0,0.5,2]],
                                    "blocks":[1,2]})");
    CHECK(target_dim(g) == 3);
    CHECK(target_blocks(g).num_blocks() == 2);
    CHECK(target_condition_numbers(g).kappa_star >= 1.0);

    const auto l = parse_target(R"({"type":"logistic","A":[[1,0],[0,1]],"prior_scale":1,"lambda_star":0.25})");
    CHECK(std::get<CompositeTarget>(l).lambda_star == 0.25);
    CHECK(target_dim(parse_target(R"({"type":"logcosh","dim":2})")) == 2);

    CHECK_THROWS_AS(parse_target("{"), ConfigError);
    CHECK_THROWS_AS(parse_target(R"({"type":"weird"})"), ConfigError);
    CHECK_THROWS_AS(parse_target(R"({"type":"gaussian","mean":[0]})"), ConfigError);
    CHECK_THROWS_AS(parse_target(R"({"type":"gaussian","mean":[0,0],"precision":[[1,0],[0]]})"), ConfigError);
    CHECK_THROWS_AS(parse_target(R"({"type":"gaussian","mean":[0,0],"precision":[[1,0],[0,1]],"blocks":[3]})"),
                    DimensionError);
    CHECK_THROWS_AS(parse_target(R"({"type":"gaussian","mean":[0,0],"precision":[[1,2],[2,1]]})"), ConstructionError);
    CHECK_THROWS_AS(load_target("/nonexistent/target.json"), ConfigError);
}
