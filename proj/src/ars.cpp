#include "lcgibbs/ars.hpp"

#include <algorithm>

namespace lcgibbs {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double piece_log_mass(double lo, double hi, double a, double y, double s) {
    if (lo == -kInf) {
        if (!(s > 0.0)) throw ConditionalSamplingError("hull has a non-integrable left tail");
        return y + s * (hi - a) - std::log(s);
    }
    if (hi == kInf) {
        if (!(s < 0.0)) throw ConditionalSamplingError("hull has a non-integrable right tail");
        return y + s * (lo - a) - std::log(-s);
    }
    const double w = hi - lo;
    if (!(w > 0.0)) return -kInf;
    const double m = std::max(y + s * (lo - a), y + s * (hi - a));
    const double t = std::abs(s) * w;
    if (t < 1e-10) return m + std::log(w);
    return m + std::log(-std::expm1(-t)) - std::log(std::abs(s));
}

}  // namespace

Envelope::Envelope(std::vector<double> abscissae, std::vector<double> values, double lower_bound, double upper_bound,
                   double tolerance) {
    if (abscissae.size() != values.size()) throw ConfigError("envelope: abscissae and values differ in length");
    std::vector<std::size_t> order(abscissae.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return abscissae[i] < abscissae[j]; });
    std::vector<double> xs, hs;
    for (std::size_t i : order) {
        xs.push_back(abscissae[i]);
        hs.push_back(values[i]);
    }
    reset(xs.data(), hs.data(), xs.size(), lower_bound, upper_bound, tolerance);
}

void Envelope::reset(const double* xs, const double* hs, std::size_t k, double lower_bound, double upper_bound,
                     double tolerance) {
    if (k < 3) throw ConfigError("envelope needs at least three abscissae");
    xs_.assign(xs, xs + k);
    hs_.assign(hs, hs + k);
    for (std::size_t i = 0; i < k; ++i) {
        if (!std::isfinite(xs_[i]) || !std::isfinite(hs_[i])) throw ConditionalSamplingError("envelope: non-finite abscissa or value");
        if (i > 0 && !(xs_[i] > xs_[i - 1])) throw ConfigError("envelope: abscissae must be strictly increasing");
    }
    if (!(lower_bound < xs_.front()) || !(upper_bound > xs_.back()))
        throw ConfigError("envelope: support bounds must enclose the abscissae");
    lower_bound_ = lower_bound;
    upper_bound_ = upper_bound;
    tol_ = tolerance;
    check_concavity();
    rebuild();
}

void Envelope::check_concavity() const {
    for (std::size_t j = 1; j + 1 < xs_.size(); ++j) {
        const double f = (xs_[j] - xs_[j - 1]) / (xs_[j + 1] - xs_[j - 1]);
        const double chord = hs_[j - 1] + f * (hs_[j + 1] - hs_[j - 1]);
        if (hs_[j] < chord - tol_ * std::max(1.0, std::abs(hs_[j])))
            throw HullViolationError("log-density is not concave at x = " + std::to_string(xs_[j]));
    }
}

void Envelope::rebuild() {
    const std::size_t k = xs_.size();
    lo_.clear();
    hi_.clear();
    a_.clear();
    y_.clear();
    s_.clear();
    auto slope = [&](std::size_t j) { return (hs_[j + 1] - hs_[j]) / (xs_[j + 1] - xs_[j]); };
    auto push = [&](double lo, double hi, double a, double y, double s) {
        if (lo < hi) {
            lo_.push_back(lo);
            hi_.push_back(hi);
            a_.push_back(a);
            y_.push_back(y);
            s_.push_back(s);
        }
    };

    push(lower_bound_, xs_[0], xs_[0], hs_[0], slope(0));
    push(xs_[0], xs_[1], xs_[1], hs_[1], slope(1));
    for (std::size_t i = 1; i + 2 < k; ++i) {
        const double sl = slope(i - 1), sr = slope(i + 1);
        double z = xs_[i + 1];
        if (sl - sr > 0.0) {
            z = (hs_[i + 1] - hs_[i] - sr * xs_[i + 1] + sl * xs_[i]) / (sl - sr);
            z = std::clamp(z, xs_[i], xs_[i + 1]);
        }
        push(xs_[i], z, xs_[i], hs_[i], sl);
        push(z, xs_[i + 1], xs_[i + 1], hs_[i + 1], sr);
    }
    push(xs_[k - 2], xs_[k - 1], xs_[k - 2], hs_[k - 2], slope(k - 3));
    push(xs_[k - 1], upper_bound_, xs_[k - 1], hs_[k - 1], slope(k - 2));

    const std::size_t n = lo_.size();
    masses_.resize(n);
    double mx = -kInf;
    for (std::size_t p = 0; p < n; ++p) {
        masses_[p] = piece_log_mass(lo_[p], hi_[p], a_[p], y_[p], s_[p]);
        mx = std::max(mx, masses_[p]);
    }
    double total = 0.0;
    for (double& m : masses_) {
        m = std::exp(m - mx);
        total += m;
    }
    cum_.resize(n);
    double c = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
        masses_[p] /= total;
        c += masses_[p];
        cum_[p] = c;
    }
    log_mass_ = mx + std::log(total);
}

double Envelope::upper(double x) const {
    if (x < lower_bound_ || x > upper_bound_) return -kInf;
    auto it = std::lower_bound(hi_.begin(), hi_.end(), x);
    const std::size_t p = it == hi_.end() ? hi_.size() - 1 : static_cast<std::size_t>(it - hi_.begin());
    const double v = y_[p] + s_[p] * (x - a_[p]);
    // the hull can jump at a breakpoint; both adjacent pieces bound h there
    if (hi_[p] == x && p + 1 < hi_.size()) return std::min(v, y_[p + 1] + s_[p + 1] * (x - a_[p + 1]));
    return v;
}

double Envelope::lower(double x) const {
    if (x < xs_.front() || x > xs_.back()) return -kInf;
    auto it = std::upper_bound(xs_.begin(), xs_.end(), x);
    std::size_t j = static_cast<std::size_t>(it - xs_.begin());
    j = j == 0 ? 0 : j - 1;
    if (j + 1 >= xs_.size()) return hs_.back();
    const double f = (x - xs_[j]) / (xs_[j + 1] - xs_[j]);
    return hs_[j] + f * (hs_[j + 1] - hs_[j]);
}

bool Envelope::has_abscissa(double x) const {
    auto it = std::lower_bound(xs_.begin(), xs_.end(), x);
    const double eps = 1e-12 * std::max(1.0, std::abs(x));
    if (it != xs_.end() && std::abs(*it - x) <= eps) return true;
    if (it != xs_.begin() && std::abs(*(it - 1) - x) <= eps) return true;
    return false;
}

double Envelope::sample(Rng& rng) const {
    const double u1 = rng.uniform();
    std::size_t p = 0;
    while (p + 1 < cum_.size() && u1 >= cum_[p]) ++p;
    const double u = rng.uniform();
    const double s = s_[p];
    if (lo_[p] == -kInf) return hi_[p] + std::log(u) / s;
    if (hi_[p] == kInf) return lo_[p] + std::log(u) / s;
    const double w = hi_[p] - lo_[p];
    const double t = std::abs(s) * w;
    double x;
    if (t < 1e-10) {
        x = lo_[p] + u * w;
    } else {
        const double y = -std::log1p(u * std::expm1(-t)) / std::abs(s);
        x = s < 0.0 ? lo_[p] + y : hi_[p] - y;
    }
    return std::clamp(x, lo_[p], hi_[p]);
}

void Envelope::set_lower_bound(double b) {
    if (!(b < xs_.front())) throw HullViolationError("support bound inside the abscissae: density not log-concave");
    if (b > lower_bound_) {
        lower_bound_ = b;
        rebuild();
    }
}

void Envelope::set_upper_bound(double b) {
    if (!(b > xs_.back())) throw HullViolationError("support bound inside the abscissae: density not log-concave");
    if (b < upper_bound_) {
        upper_bound_ = b;
        rebuild();
    }
}

void Envelope::refine(double point, double value) {
    if (std::isnan(point) || std::isnan(value)) throw ConditionalSamplingError("envelope: NaN refinement");
    if (value == -kInf) {
        if (point < xs_.front()) set_lower_bound(point);
        else if (point > xs_.back()) set_upper_bound(point);
        else throw HullViolationError("zero density between abscissae: density not log-concave");
        return;
    }
    if (has_abscissa(point)) return;
    if (point <= lower_bound_ || point >= upper_bound_) return;
    auto it = std::lower_bound(xs_.begin(), xs_.end(), point);
    const auto pos = it - xs_.begin();
    xs_.insert(it, point);
    hs_.insert(hs_.begin() + pos, value);
    check_concavity();
    rebuild();
}

Envelope envelope_refine(const Envelope& env, double point, double value) {
    Envelope out = env;
    out.refine(point, value);
    return out;
}

}  // namespace lcgibbs
