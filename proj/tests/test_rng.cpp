#include <doctest.h>

#include <set>
#include <vector>

#include "chi_square.hpp"
#include "lcgibbs/rng.hpp"
#include "oracles.hpp"

using lcgibbs::Rng;

TEST_CASE("same seed and stream reproduce the same sequence") {
    Rng a(42, 3), b(42, 3);
    for (int i = 0; i < 1000; ++i) CHECK(a() == b());
}

TEST_CASE("distinct streams and splits give distinct sequences") {
    std::set<std::uint64_t> firsts;
    Rng root(7, 0);
    for (std::uint64_t s = 0; s < 64; ++s) {
        firsts.insert(Rng(7, s)());
        firsts.insert(root.split(s)());
    }
    CHECK(firsts.size() == 128);
    CHECK(root.split(5)() == root.split(5)());
}

TEST_CASE("uniform lies in the open unit interval with the right moments") {
    Rng rng(1, 0);
    std::vector<double> u(200000);
    for (double& x : u) {
        x = rng.uniform();
        REQUIRE(x > 0.0);
        REQUIRE(x < 1.0);
    }
    const double se = std::sqrt(1.0 / 12.0 / u.size());
    CHECK(std::abs(oracle::mean(u) - 0.5) < 4.0 * se);
    CHECK(oracle::variance(u) == doctest::Approx(1.0 / 12.0).epsilon(0.01));
}

TEST_CASE("normal draws have standard moments") {
    Rng rng(2, 0);
    std::vector<double> z(200000);
    for (double& x : z) x = rng.normal();
    CHECK(std::abs(oracle::mean(z)) < 4.0 / std::sqrt(z.size()));
    CHECK(oracle::variance(z) == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("uniform_index is uniform") {
    Rng rng(3, 0);
    std::vector<double> counts(7, 0.0);
    for (int i = 0; i < 70000; ++i) counts[rng.uniform_index(7)] += 1.0;
    CHECK(oracle::chi_square_uniform_p(counts) > 1e-3);
}
