#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lcgibbs/errors.hpp"
#include "lcgibbs/rng.hpp"

namespace lcgibbs {

struct ArsOptions {
    /// Length scale used to place the initial abscissae around the mode.
    double scale = 1.0;
    std::size_t max_abscissae = 64;
    double hull_tolerance = 1e-8;
    int max_expansions = 60;
    /// Bisection stops once the bracket is narrower than mode_tolerance * scale.
    double mode_tolerance = 1e-8;
    std::optional<double> mode;
    std::size_t max_iterations = 100000;
};

struct ArsResult {
    double sample = 0.0;
    std::size_t evaluations = 0;
};

/**
 * Derivative-free upper hull of a concave log-density built from secants
 * through consecutive abscissae, together with the chord squeeze below it.
 * Needs at least three abscissae; an optional finite support [lower, upper]
 * truncates the exponential tails.
 */
class Envelope {
public:
    Envelope() = default;
    Envelope(std::vector<double> abscissae, std::vector<double> values,
             double lower_bound = -std::numeric_limits<double>::infinity(),
             double upper_bound = std::numeric_limits<double>::infinity(), double tolerance = 1e-8);

    void reset(const double* xs, const double* hs, std::size_t k, double lower_bound, double upper_bound,
               double tolerance);

    const std::vector<double>& abscissae() const { return xs_; }
    const std::vector<double>& values() const { return hs_; }
    /// Normalized masses of the hull pieces, left to right.
    const std::vector<double>& segment_masses() const { return masses_; }
    std::size_t num_segments() const { return masses_.size(); }
    double lower_bound() const { return lower_bound_; }
    double upper_bound() const { return upper_bound_; }

    double upper(double x) const;
    double lower(double x) const;
    /// log of the integral of exp(upper) over the support.
    double log_mass() const { return log_mass_; }
    bool has_abscissa(double x) const;

    double sample(Rng& rng) const;

    /// Inserts (point, value); value = -inf shrinks the support instead. Duplicates are ignored.
    void refine(double point, double value);
    void set_lower_bound(double b);
    void set_upper_bound(double b);

private:
    void rebuild();
    void check_concavity() const;

    std::vector<double> xs_, hs_;
    double lower_bound_ = -std::numeric_limits<double>::infinity();
    double upper_bound_ = std::numeric_limits<double>::infinity();
    double tol_ = 1e-8;
    // Piece p covers [lo_[p], hi_[p]] with hull(x) = y_[p] + s_[p] * (x - a_[p]).
    std::vector<double> lo_, hi_, a_, y_, s_, masses_, cum_;
    double log_mass_ = 0.0;
};

/// Returns a copy of `env` refined at (point, value); a duplicate abscissa leaves it unchanged.
Envelope envelope_refine(const Envelope& env, double point, double value);

namespace detail {

template <class F>
struct CountingEval {
    F& f;
    std::size_t count = 0;
    double operator()(double t) {
        ++count;
        const double v = f(t);
        if (std::isnan(v) || v == std::numeric_limits<double>::infinity())
            throw ConditionalSamplingError("log-density returned NaN or +inf");
        return v;
    }
};

// Sign of the symmetric finite-difference slope; points outside the support
// are oriented relative to a point `ref` known to lie inside it.
template <class E>
int slope_sign(E& eval, double t, double delta, double ref) {
    const double a = eval(t - delta);
    const double b = eval(t + delta);
    const double ninf = -std::numeric_limits<double>::infinity();
    if (a == ninf && b == ninf) return t < ref ? 1 : -1;
    if (a == ninf) return 1;
    if (b == ninf) return -1;
    return (b > a) - (b < a);
}

template <class E>
double find_mode(E& eval, double lo, double hi, const ArsOptions& opt) {
    if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi)) throw BracketError("invalid initial bracket");
    const double ninf = -std::numeric_limits<double>::infinity();
    double ref = 0.5 * (lo + hi);
    if (eval(ref) == ninf) {
        if (eval(lo) != ninf) ref = lo;
        else if (eval(hi) != ninf) ref = hi;
        else throw BracketError("initial bracket lies outside the support");
    }
    const double tol = opt.mode_tolerance * opt.scale;
    const double delta = 0.25 * tol;
    double width = hi - lo;
    int expansions = 0;
    int s;
    while ((s = slope_sign(eval, lo, delta, ref)) < 0) {
        if (++expansions > opt.max_expansions) throw BracketError("mode bracketing failed");
        hi = lo;
        lo -= width;
        width *= 2.0;
    }
    if (s == 0) return lo;
    while ((s = slope_sign(eval, hi, delta, ref)) > 0) {
        if (++expansions > opt.max_expansions) throw BracketError("mode bracketing failed");
        lo = hi;
        hi += width;
        width *= 2.0;
    }
    if (s == 0) return hi;
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        const int sm = slope_sign(eval, mid, delta, ref);
        if (sm == 0) return mid;
        (sm > 0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

// Places the mode and one point on each side so that both tails are integrable.
template <class E>
void initial_abscissae(E& eval, double c, const ArsOptions& opt, Envelope& env) {
    const double ninf = -std::numeric_limits<double>::infinity();
    const double hc = eval(c);
    if (hc == ninf) throw BracketError("mode estimate lies outside the support");
    double lower = ninf, upper = std::numeric_limits<double>::infinity();
    double xs[3], hs[3];
    xs[1] = c;
    hs[1] = hc;
    for (int side = -1; side <= 1; side += 2) {
        double step = opt.scale;
        int tries = 0;
        double x, h;
        for (;;) {
            if (++tries > 2 * opt.max_expansions) throw BracketError("could not place initial abscissae");
            x = c + side * step;
            h = eval(x);
            if (h == ninf) {
                (side < 0 ? lower : upper) = x;
                step *= 0.5;
                continue;
            }
            const bool bounded = side < 0 ? std::isfinite(lower) : std::isfinite(upper);
            if (h < hc || bounded) break;
            step *= 2.0;
        }
        xs[side < 0 ? 0 : 2] = x;
        hs[side < 0 ? 0 : 2] = h;
    }
    env.reset(xs, hs, 3, lower, upper, opt.hull_tolerance);
}

}  // namespace detail

/**
 * Exact draw from the density proportional to exp(log_density) on the real
 * line, for concave log_density. `bracket` should straddle the mode; it is
 * expanded geometrically if it does not. `workspace` is reused across calls
 * to avoid reallocations.
 */
template <class F>
ArsResult ars_sample(F&& log_density, std::pair<double, double> bracket, Rng& rng, const ArsOptions& opt,
                     Envelope& workspace) {
    if (!(opt.scale > 0.0) || !std::isfinite(opt.scale)) throw ConfigError("ars: scale must be positive");
    detail::CountingEval<std::remove_reference_t<F>> eval{log_density};
    const double c = opt.mode ? *opt.mode : detail::find_mode(eval, bracket.first, bracket.second, opt);
    detail::initial_abscissae(eval, c, opt, workspace);
    Envelope& env = workspace;
    const double ninf = -std::numeric_limits<double>::infinity();
    for (std::size_t it = 0; it < opt.max_iterations; ++it) {
        const double x = env.sample(rng);
        const double lu = std::log(rng.uniform());
        const double up = env.upper(x);
        const double sq = env.lower(x);
        if (lu <= sq - up) return {x, eval.count};
        const double hx = eval(x);
        if (hx == ninf) {
            env.refine(x, hx);
            continue;
        }
        const double slack = opt.hull_tolerance * std::max(1.0, std::abs(hx));
        if (hx > up + slack)
            throw HullViolationError("log-density exceeds the secant hull at x = " + std::to_string(x));
        if (hx < sq - slack)
            throw HullViolationError("log-density falls below the chord squeeze at x = " + std::to_string(x));
        if (lu <= hx - up) return {x, eval.count};
        if (env.abscissae().size() < opt.max_abscissae) env.refine(x, hx);
    }
    throw ConditionalSamplingError("ars: iteration limit reached");
}

template <class F>
ArsResult ars_sample(F&& log_density, std::pair<double, double> bracket, Rng& rng, const ArsOptions& opt = {}) {
    Envelope ws;
    return ars_sample(std::forward<F>(log_density), bracket, rng, opt, ws);
}

}  // namespace lcgibbs
