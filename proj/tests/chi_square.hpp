#pragma once

#include <boost/math/distributions/chi_squared.hpp>

#include <vector>

namespace oracle {

/// p-value of Pearson's chi-square test of observed counts against expected counts.
inline double chi_square_p(const std::vector<double>& observed, const std::vector<double>& expected) {
    double stat = 0.0;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        const double e = expected[i];
        stat += (observed[i] - e) * (observed[i] - e) / e;
    }
    const boost::math::chi_squared dist(static_cast<double>(observed.size() - 1));
    return boost::math::cdf(boost::math::complement(dist, stat));
}

/// Same test against equal expected counts.
inline double chi_square_uniform_p(const std::vector<double>& observed) {
    double total = 0.0;
    for (double o : observed) total += o;
    return chi_square_p(observed, std::vector<double>(observed.size(), total / static_cast<double>(observed.size())));
}

}  // namespace oracle
