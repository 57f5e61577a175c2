#include "lcgibbs/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <queue>
#include <span>

#include "lcgibbs/transport.hpp"

namespace lcgibbs {

namespace {

constexpr double kZ = 3.0;
constexpr double kInf = std::numeric_limits<double>::infinity();

double pairwise_sum(std::span<const double> v) {
    if (v.size() <= 64) {
        double s = 0.0;
        for (double x : v) s += x;
        return s;
    }
    const std::size_t h = v.size() / 2;
    return pairwise_sum(v.subspan(0, h)) + pairwise_sum(v.subspan(h));
}

void require_unit_blocks(const BlockStructure& b, const char* what) {
    if (!b.all_unit()) throw UnsupportedError(std::string(what) + " requires unit blocks");
}

void require_finite_kappa_star(const ConditionNumbers<double>& cn, const char* what) {
    if (!std::isfinite(cn.kappa_star)) throw UnsupportedError(std::string(what) + " requires lambda* > 0");
}

GaussianLaw<double> isotropic_start(const GaussianTarget<double>& pi, double L) {
    return GaussianLaw<double>(pi.mean(), MatrixXd::Identity(pi.dim(), pi.dim()) / L);
}

// Composite Simpson rule with n (even) intervals.
template <typename F>
double simpson(F&& f, double a, double b, int n) {
    const double h = (b - a) / n;
    double s = f(a) + f(b);
    for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
    return s * h / 3.0;
}

}  // namespace

// ---- reports ------------------------------------------------------------------

InequalityReport make_report(std::string name, double lhs, double rhs, std::optional<double> se, double abs_tol,
                             std::uint64_t trials, std::uint64_t seed) {
    InequalityReport r;
    r.name = std::move(name);
    r.lhs = lhs;
    r.rhs = rhs;
    r.slack = rhs - lhs;
    r.se = se;
    r.abs_tol = abs_tol;
    r.trials = trials;
    r.seed = seed;
    const double margin = std::max(abs_tol, se ? kZ * *se : 0.0);
    r.passed = lhs <= rhs + margin;
    return r;
}

void write_report_header(std::ostream& os) { os << "name,lhs,rhs,slack,se,trials,seed,passed\n"; }

void write_report_row(std::ostream& os, const InequalityReport& r) {
    os << r.name << ',' << format_double(r.lhs) << ',' << format_double(r.rhs) << ',' << format_double(r.slack) << ','
       << (r.se ? format_double(*r.se) : std::string()) << ',' << r.trials << ',' << r.seed << ','
       << (r.passed ? "true" : "false") << '\n';
}

std::uint64_t trial_seed(std::uint64_t seed, std::uint64_t trial) {
    return detail::mix64(seed ^ detail::mix64(trial + 0x7f4a7c159e3779b9ULL));
}

// ---- random instances -----------------------------------------------------------

MatrixXd random_orthogonal(Index d, Rng& rng) {
    MatrixXd G(d, d);
    for (Index j = 0; j < d; ++j)
        for (Index i = 0; i < d; ++i) G(i, j) = rng.normal();
    Eigen::HouseholderQR<MatrixXd> qr(G);
    MatrixXd Q = qr.householderQ();
    const MatrixXd& R = qr.matrixQR();
    for (Index j = 0; j < d; ++j)
        if (R(j, j) < 0.0) Q.col(j) *= -1.0;
    return Q;
}

MatrixXd random_spd(Index d, double kappa, Rng& rng) {
    if (d < 1) throw ConfigError("random_spd: dimension must be positive");
    if (!(kappa >= 1.0)) throw ConfigError("random_spd: condition number must be >= 1");
    VectorXd ev(d);
    for (Index i = 0; i < d; ++i) ev[i] = std::exp(rng.uniform() * std::log(kappa));
    ev[0] = 1.0;
    if (d > 1) ev[d - 1] = kappa;
    const MatrixXd U = random_orthogonal(d, rng);
    MatrixXd A = U * ev.asDiagonal() * U.transpose();
    return 0.5 * (A + A.transpose());
}

GaussianLaw<double> random_gaussian_law(Index d, double kappa, Rng& rng) {
    VectorXd m(d);
    for (Index i = 0; i < d; ++i) m[i] = rng.normal();
    MatrixXd S = random_spd(d, kappa, rng);
    return GaussianLaw<double>(m, S);
}

MatrixXd random_precision_with_kappa_star(Index d, double kappa_star, Rng& rng) {
    if (d < 2) throw ConfigError("random_precision_with_kappa_star: dimension must be >= 2");
    if (!(kappa_star >= 1.0)) throw ConfigError("random_precision_with_kappa_star: kappa* must be >= 1");
    const MatrixXd A = random_spd(d, 1.0 + 9.0 * rng.uniform() + 1.0, rng);
    const VectorXd s = A.diagonal().array().sqrt().inverse();
    MatrixXd C = s.asDiagonal() * A * s.asDiagonal();
    const double lam0 = Eigen::SelfAdjointEigenSolver<MatrixXd>(C, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
    const double ls = 1.0 / kappa_star;
    C = ((1.0 - ls) / (1.0 - lam0)) * (C - lam0 * MatrixXd::Identity(d, d));
    C.diagonal().array() += ls;
    C.diagonal().setOnes();
    VectorXd w(d);
    for (Index i = 0; i < d; ++i) w[i] = std::exp(0.5 * rng.normal());
    MatrixXd Q = w.asDiagonal() * C * w.asDiagonal();
    return 0.5 * (Q + Q.transpose());
}

MatrixXd equicorrelated_precision(Index d, double rho) {
    if (d < 1) throw ConfigError("equicorrelated_precision: dimension must be positive");
    MatrixXd Q = MatrixXd::Constant(d, d, rho);
    Q.diagonal().setOnes();
    return Q;
}

// ---- closed-form checks -----------------------------------------------------------

double functional_lhs(const GaussianLaw<double>& mu, const GaussianTarget<double>& pi) {
    if (mu.dim() != pi.dim()) throw DimensionError("functional_lhs: dimension mismatch");
    const auto& blocks = pi.blocks();
    const Index M = blocks.num_blocks();
    if (M == 1) return 0.0;
    const auto pl = law_of(pi);
    std::vector<double> terms;
    for (Index m = 0; m < M; ++m)
        terms.push_back(kl_gaussian(marginal_drop_block(mu, blocks, m), marginal_drop_block(pl, blocks, m)));
    return pairwise_sum(terms) / static_cast<double>(M);
}

InequalityReport check_functional_inequality(const GaussianLaw<double>& mu, const GaussianTarget<double>& pi,
                                             std::uint64_t seed) {
    const auto cn = condition_numbers(pi);
    require_finite_kappa_star(cn, "check_functional_inequality");
    const double M = static_cast<double>(pi.blocks().num_blocks());
    const double rhs = (1.0 - 1.0 / (cn.kappa_star * M)) * kl_gaussian(mu, pi);
    return make_report("functional_inequality", functional_lhs(mu, pi), rhs, std::nullopt, 1e-9, 1, seed);
}

InequalityReport check_variance_inequality(const MatrixXd& Q, std::uint64_t trials, std::uint64_t seed) {
    const Index d = Q.rows();
    const auto blocks = BlockStructure::unit(d);
    const auto cn = condition_numbers_gaussian(Q, blocks);
    Rng rng(seed, 0x7661);
    double worst_gap = -kInf, wl = 0.0, wr = 0.0;
    for (std::uint64_t t = 0; t < std::max<std::uint64_t>(trials, 1); ++t) {
        VectorXd v(d);
        for (Index i = 0; i < d; ++i) v[i] = rng.normal();
        const auto cv = conditional_variance_sum<double>(Q, v);
        const double lhs = cv.variance / (2.0 * cn.kappa_star);
        if (lhs - cv.sum > worst_gap) {
            worst_gap = lhs - cv.sum;
            wl = lhs;
            wr = cv.sum;
        }
    }
    return make_report("variance_inequality", wl, wr, std::nullopt, 1e-9, trials, seed);
}

GaussianLaw<double> factorized_start(const GaussianTarget<double>& pi) {
    const auto& blocks = pi.blocks();
    MatrixXd cov = MatrixXd::Zero(pi.dim(), pi.dim());
    for (Index m = 0; m < blocks.num_blocks(); ++m) {
        const Index o = blocks.offset(m), n = blocks.size(m);
        const MatrixXd Qmm = pi.precision().block(o, o, n, n);
        cov.block(o, o, n, n) = Qmm.llt().solve(MatrixXd::Identity(n, n));
    }
    return GaussianLaw<double>(pi.mean(), cov);
}

InequalityReport factorized_start_kl(const GaussianTarget<double>& pi, std::uint64_t seed) {
    const auto cn = condition_numbers(pi);
    const double rhs = static_cast<double>(pi.dim()) * cn.kappa * cn.kappa;
    return make_report("feasible_start_factorized", kl_gaussian(factorized_start(pi), pi), rhs, std::nullopt, 1e-9, 1,
                       seed);
}

double gaussian_warm_start_log_c(const GaussianTarget<double>& pi) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(pi.precision(), Eigen::EigenvaluesOnly);
    const VectorXd ev = es.eigenvalues();
    const double L = ev.maxCoeff();
    return 0.5 * (L / ev.array()).log().sum();
}

InequalityReport gaussian_warm_start_kl(const GaussianTarget<double>& pi, std::uint64_t seed) {
    const auto cn = condition_numbers(pi);
    const double lhs = kl_gaussian(isotropic_start(pi, cn.L), pi);
    return make_report("feasible_start_gaussian_warm", lhs, gaussian_warm_start_log_c(pi), std::nullopt, 1e-9, 1, seed);
}

InequalityReport check_partial_map_entropy_identity(const GaussianLaw<double>& mu, const GaussianLaw<double>& nu,
                                                    const BlockStructure& blocks, std::uint64_t seed) {
    const auto T = kr_map_gaussian(mu, nu);
    const Index M = blocks.num_blocks();
    std::vector<double> h;
    for (Index m = 0; m < M; ++m) h.push_back(entropy_gaussian(partial_map(T, blocks, m, 1.0).pushforward(mu)));
    const double lhs = pairwise_sum(h) / M;
    const double rhs = (M - 1.0) / M * entropy_gaussian(mu) + entropy_gaussian(T.pushforward(mu)) / M;
    return make_report("entropy_triangular_identity", std::abs(lhs - rhs), 0.0, std::nullopt, 1e-9, 1, seed);
}

InequalityReport check_potential_inequality(const GaussianLaw<double>& mu, const GaussianTarget<double>& pi,
                                            std::uint64_t seed) {
    const auto cn = condition_numbers(pi);
    require_finite_kappa_star(cn, "check_potential_inequality");
    const auto T = kr_map_gaussian(mu, law_of(pi));
    const auto& blocks = pi.blocks();
    const Index M = blocks.num_blocks();
    std::vector<double> u;
    for (Index m = 0; m < M; ++m)
        u.push_back(potential_energy_gaussian(partial_map(T, blocks, m, cn.lambda_star).pushforward(mu), pi));
    const double lhs = pairwise_sum(u) / M;
    const double w = 1.0 / (cn.kappa_star * M);
    const double rhs = (1.0 - w) * potential_energy_gaussian(mu, pi) + w * potential_energy_gaussian(T.pushforward(mu), pi);
    return make_report("potential_partial_maps", lhs, rhs, std::nullopt, 1e-9, 1, seed);
}

InequalityReport check_entropy_path_convexity(const GaussianLaw<double>& mu, const GaussianLaw<double>& nu,
                                              std::uint64_t seed) {
    const auto T = kr_map_gaussian(mu, nu);
    std::vector<double> grid;
    for (int i = 0; i <= 10; ++i) grid.push_back(i / 10.0);
    const auto h = entropy_along_path(T, mu, grid);
    double mn = kInf;
    for (std::size_t i = 1; i + 1 < h.size(); ++i) mn = std::min(mn, h[i - 1] - 2.0 * h[i] + h[i + 1]);
    return make_report("entropy_path_convexity", -mn, 0.0, std::nullopt, 1e-10, 1, seed);
}

InequalityReport check_partial_map_entropy_inequality(const GaussianLaw<double>& mu, const GaussianLaw<double>& nu,
                                                      const BlockStructure& blocks, double t, std::uint64_t seed) {
    const auto T = kr_map_gaussian(mu, nu);
    const Index M = blocks.num_blocks();
    std::vector<double> h;
    for (Index m = 0; m < M; ++m) h.push_back(entropy_gaussian(partial_map(T, blocks, m, t).pushforward(mu)));
    const double lhs = pairwise_sum(h) / M;
    const double rhs = (1.0 - t / M) * entropy_gaussian(mu) + (t / M) * entropy_gaussian(T.pushforward(mu));
    return make_report("entropy_partial_maps_t=" + format_double(t), lhs, rhs, std::nullopt, 1e-9, 1, seed);
}

// ---- Monte Carlo checks -------------------------------------------------------------

McEstimate mc_mean(const std::vector<double>& values) {
    McEstimate e;
    const std::size_t n = values.size();
    if (n == 0) return e;
    e.mean = pairwise_sum(values) / static_cast<double>(n);
    if (n < 2) return e;
    std::vector<double> sq(n);
    for (std::size_t i = 0; i < n; ++i) sq[i] = (values[i] - e.mean) * (values[i] - e.mean);
    e.se = std::sqrt(pairwise_sum(sq) / static_cast<double>(n - 1) / static_cast<double>(n));
    return e;
}

McEstimate one_step_kl_estimate(const GaussianLaw<double>& mu, const GaussianTarget<double>& pi, std::size_t n_mc,
                                Rng& rng) {
    const auto mix = gs_one_step_law(mu, pi);
    const auto pl = law_of(pi);
    std::vector<double> v(n_mc);
    for (std::size_t i = 0; i < n_mc; ++i) {
        const VectorXd x = mix.sample(rng);
        v[i] = mix.log_density(x) - pl.log_density(x);
    }
    return mc_mean(v);
}

InequalityReport check_contraction_one_step(const GaussianLaw<double>& mu, const GaussianTarget<double>& pi,
                                            std::size_t n_mc, std::uint64_t seed) {
    if (n_mc < 10000) throw ConfigError("check_contraction_one_step: n_mc must be >= 1e4");
    const auto cn = condition_numbers(pi);
    require_finite_kappa_star(cn, "check_contraction_one_step");
    Rng rng(seed, 0x3232);
    const auto est = one_step_kl_estimate(mu, pi, n_mc, rng);
    const double M = static_cast<double>(pi.blocks().num_blocks());
    const double rhs = (1.0 - 1.0 / (cn.kappa_star * M)) * kl_gaussian(mu, pi);
    return make_report("one_step_contraction", est.mean, rhs, est.se, 1e-12, n_mc, seed);
}

GapCheck check_gap(const MatrixXd& Q, std::size_t chain_len, std::uint64_t seed) {
    if (chain_len < 100000) throw ConfigError("check_gap: chain_len must be >= 1e5");
    const Index d = Q.rows();
    const auto blocks = BlockStructure::unit(d);
    const GaussianTarget<double> pi(VectorXd::Zero(d), Q, blocks);
    const auto cn = condition_numbers(pi);

    GapCheck g;
    g.analytic = amit_gap<double>(pi.precision(), blocks);

    const VectorXd is = cn.D.array().sqrt().inverse();
    MatrixXd S = is.asDiagonal() * pi.precision() * is.asDiagonal();
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(S);
    const VectorXd a = cn.D.array().sqrt() * es.eigenvectors().col(0).array();

    Rng rng(seed, 0x6761);
    const Target target = pi;
    ChainRunner runner(target, KernelKind::GS);
    ChainState st;
    st.x = law_of(pi).sample(rng);
    std::vector<double> f(chain_len);
    for (std::size_t t = 0; t < chain_len; ++t) {
        runner.step(st, rng);
        f[t] = a.dot(st.x);
    }
    const double fbar = pairwise_sum(f) / static_cast<double>(chain_len);
    std::vector<double> c0(chain_len), c1(chain_len - 1);
    for (std::size_t t = 0; t < chain_len; ++t) c0[t] = (f[t] - fbar) * (f[t] - fbar);
    for (std::size_t t = 0; t + 1 < chain_len; ++t) c1[t] = (f[t] - fbar) * (f[t + 1] - fbar);
    g.empirical = 1.0 - pairwise_sum(c1) / pairwise_sum(c0);

    g.accuracy = make_report("gap_accuracy", std::abs(g.analytic - g.empirical), 0.1 * g.analytic, std::nullopt, 0.0,
                             chain_len, seed);
    g.lower_bound = make_report("gap_lower_bound", 1.0 / (2.0 * cn.kappa_star * static_cast<double>(d)), g.analytic,
                                std::nullopt, 1e-12, 1, seed);
    return g;
}

InequalityReport check_hr_projection_inequality(const GaussianLaw<double>& mu, const GaussianTarget<double>& pi,
                                                Index ell, std::size_t n_frames, std::uint64_t seed) {
    const Index d = pi.dim();
    if (ell < 1 || ell > d) throw ConfigError("check_hr_projection_inequality: ell must lie in [1, d]");
    if (n_frames < 1) throw ConfigError("check_hr_projection_inequality: n_frames must be positive");
    const auto cn = condition_numbers_gaussian(pi.precision(), BlockStructure::unit(d));
    const auto pl = law_of(pi);
    Rng rng(seed, 0x6872);
    std::vector<double> v(n_frames);
    for (std::size_t k = 0; k < n_frames; ++k) {
        const MatrixXd V = sample_stiefel_frame(d, ell, rng).columns();
        v[k] = kl_gaussian(projected_law(mu, V), projected_law(pl, V));
    }
    const auto est = mc_mean(v);
    const double kl = kl_gaussian(mu, pi);
    const double rhs = (1.0 - static_cast<double>(d - ell) / (cn.kappa * static_cast<double>(d))) * kl;
    return make_report("hr_projection", est.mean, rhs, est.se, 1e-9 * std::max(1.0, kl), n_frames, seed);
}

GaussianLaw<double> hr_frame_law(const GaussianLaw<double>& mu, const GaussianTarget<double>& pi, const MatrixXd& V) {
    const Index d = pi.dim();
    if (mu.dim() != d || V.rows() != d) throw DimensionError("hr_frame_law: dimension mismatch");
    const MatrixXd& Q = pi.precision();
    const MatrixXd P = V.transpose() * Q * V;
    const Eigen::LLT<MatrixXd> llt(P);
    if (llt.info() != Eigen::Success) throw NumericalError("hr_frame_law: singular frame precision");
    const MatrixXd W = llt.solve(V.transpose());  // P^{-1} V^T
    const MatrixXd Pi = V * W * Q;
    const MatrixXd R = MatrixXd::Identity(d, d) - Pi;
    const VectorXd mean = pi.mean() + R * (mu.mean() - pi.mean());
    MatrixXd cov = R * mu.covariance() * R.transpose() + V * W;
    cov = 0.5 * (cov + cov.transpose()).eval();
    return GaussianLaw<double>(mean, cov);
}

McEstimate hr_one_step_kl_estimate(const GaussianLaw<double>& mu, const GaussianTarget<double>& pi, Index ell,
                                   std::size_t n_mc, std::size_t n_frames, Rng& rng) {
    const Index d = pi.dim();
    if (ell < 1 || ell > d) throw ConfigError("hr_one_step_kl_estimate: ell must lie in [1, d]");
    if (n_frames < 1 || n_mc < 2) throw ConfigError("hr_one_step_kl_estimate: sample sizes too small");
    std::vector<GaussianLaw<double>> comps;
    comps.reserve(n_frames);
    for (std::size_t k = 0; k < n_frames; ++k)
        comps.push_back(hr_frame_law(mu, pi, sample_stiefel_frame(d, ell, rng).columns()));
    const GaussianMixture<double> mix(std::vector<double>(n_frames, 1.0 / static_cast<double>(n_frames)),
                                      std::move(comps));
    const auto pl = law_of(pi);
    std::vector<double> v(n_mc);
    for (std::size_t i = 0; i < n_mc; ++i) {
        const VectorXd x = mix.components()[rng.uniform_index(n_frames)].sample(rng);
        v[i] = mix.log_density(x) - pl.log_density(x);
    }
    return mc_mean(v);
}

InequalityReport check_hr_contraction(const GaussianLaw<double>& mu, const GaussianTarget<double>& pi, Index ell,
                                      std::size_t n_mc, std::uint64_t seed, std::size_t n_frames) {
    const Index d = pi.dim();
    const auto cn = condition_numbers_gaussian(pi.precision(), BlockStructure::unit(d));
    Rng rng(seed, 0x6863);
    auto est = hr_one_step_kl_estimate(mu, pi, ell, n_mc, n_frames, rng);
    const double rhs = (1.0 - static_cast<double>(ell) / (cn.kappa * static_cast<double>(d))) * kl_gaussian(mu, pi);
    return make_report("hr_contraction_ell=" + std::to_string(ell), est.mean, rhs, 2.0 * est.se, 1e-12, n_mc, seed);
}

namespace {

// Pieces of the one-coordinate IMH kernel on a Gaussian target with unit blocks.
struct ImhCoordinate {
    const GaussianTarget<double>& pi;
    Index m;
    double var;  // proposal variance

    double cond_mean(const VectorXd& x) const {
        const MatrixXd& Q = pi.precision();
        double s = 0.0;
        for (Index k = 0; k < x.size(); ++k)
            if (k != m) s += Q(m, k) * (x[k] - pi.mean()[k]);
        return pi.mean()[m] - s / Q(m, m);
    }
    // log pi(y | x_{-m}) - log q(y) up to a constant.
    double log_weight(double y, double c) const {
        const double r = y - c;
        return -0.5 * (pi.precision()(m, m) - 1.0 / var) * r * r;
    }
};

double normal_pdf(double x, double mean, double var) {
    const double r = x - mean;
    return std::exp(-0.5 * r * r / var) / std::sqrt(2.0 * std::numbers::pi * var);
}

}  // namespace

MwGCheck check_mwg_contraction(const GaussianLaw<double>& mu, const GaussianTarget<double>& pi, const MwGConfig& cfg,
                               std::size_t n_mc, std::uint64_t seed) {
    using P = MwGConfig::Proposal;
    if (cfg.proposal == P::RandomWalk)
        throw UnsupportedError("check_mwg_contraction: random-walk updates admit no conditional KL contraction");
    const Index d = pi.dim();
    const auto& blocks = pi.blocks();
    require_unit_blocks(blocks, "check_mwg_contraction");
    if (d > 2) throw UnsupportedError("check_mwg_contraction: density evaluation needs d <= 2");
    if (mu.dim() != d) throw DimensionError("check_mwg_contraction: dimension mismatch");
    if (n_mc < 1000) throw ConfigError("check_mwg_contraction: n_mc must be >= 1e3");
    cfg.validate(blocks.num_blocks());
    const auto cn = condition_numbers(pi);
    require_finite_kappa_star(cn, "check_mwg_contraction");
    const Index M = blocks.num_blocks();
    const double kl0 = kl_gaussian(mu, pi);

    MwGCheck out;
    const bool exact = cfg.proposal == P::ExactGibbs;
    std::vector<ImhCoordinate> coords;
    for (Index m = 0; m < M; ++m)
        coords.push_back({pi, m, exact ? 1.0 / pi.precision()(m, m) : cfg.variance(m, cn, blocks)});

    // Minorization: sup_y pi(y | x_{-m}) / q(y) on a grid of conditioning values.
    {
        const auto pl = law_of(pi);
        double worst = 0.0;
        for (const auto& c : coords) {
            const double qmm = pi.precision()(c.m, c.m);
            const double sd = std::sqrt(pl.covariance()(c.m, c.m));
            for (int a = -4; a <= 4; ++a) {
                VectorXd x = pi.mean();
                for (Index k = 0; k < d; ++k)
                    if (k != c.m) x[k] += 0.75 * a * std::sqrt(pl.covariance()(k, k));
                const double cm = c.cond_mean(x);
                const double w = 8.0 * std::max(sd, std::sqrt(c.var));
                for (int j = -400; j <= 400; ++j) {
                    const double y = cm + w * j / 400.0;
                    const double r = normal_pdf(y, cm, 1.0 / qmm) / normal_pdf(y, cm, c.var);
                    worst = std::max(worst, r);
                }
            }
        }
        const double bound = std::pow(cn.kappa_star, 0.5 * static_cast<double>(blocks.max_block_dim()));
        out.minorization = make_report("mwg_minorization", worst, bound, std::nullopt, 1e-9, 1, seed);
    }

    const double beta =
        exact ? 1.0 : cfg.beta_hint.value_or(std::pow(cn.kappa_star, -0.5 * static_cast<double>(blocks.max_block_dim())));
    const double rhs = 1.0 - beta / (cn.kappa_star * static_cast<double>(M));

    // Density of mu P_m at x' (coordinate m moved), including the rejection atom.
    auto block_density = [&](const ImhCoordinate& c, const VectorXd& xp) {
        const double cm = c.cond_mean(xp);
        const double y = xp[c.m];
        if (exact) {
            double marg = 1.0;
            if (d > 1) {
                const Index o = 1 - c.m;
                marg = normal_pdf(xp[o], mu.mean()[o], mu.covariance()(o, o));
            }
            return marg * normal_pdf(y, cm, c.var);
        }
        const double lwy = c.log_weight(y, cm);
        // Conditional of mu along coordinate m given the others.
        double mmean = mu.mean()[c.m], mvar = mu.covariance()(c.m, c.m), marg = 1.0;
        if (d > 1) {
            const Index o = 1 - c.m;
            const double s_oo = mu.covariance()(o, o), s_mo = mu.covariance()(c.m, o);
            mmean += s_mo / s_oo * (xp[o] - mu.mean()[o]);
            mvar -= s_mo * s_mo / s_oo;
            marg = normal_pdf(xp[o], mu.mean()[o], s_oo);
        }
        const double msd = std::sqrt(mvar), qsd = std::sqrt(c.var);
        const double accept_in = simpson(
            [&](double x) { return normal_pdf(x, mmean, mvar) * std::min(1.0, std::exp(lwy - c.log_weight(x, cm))); },
            mmean - 12.0 * msd, mmean + 12.0 * msd, 800);
        const double accept_out = simpson(
            [&](double u) { return normal_pdf(u, cm, c.var) * std::min(1.0, std::exp(c.log_weight(u, cm) - lwy)); },
            cm - 12.0 * qsd, cm + 12.0 * qsd, 800);
        const double reject = std::max(0.0, 1.0 - accept_out);
        return marg * (normal_pdf(y, mmean, mvar) * reject + normal_pdf(y, cm, c.var) * accept_in);
    };

    Rng rng(seed, 0x6d77);
    const auto pl = law_of(pi);
    std::vector<double> v(n_mc);
    for (std::size_t i = 0; i < n_mc; ++i) {
        VectorXd x = mu.sample(rng);
        const auto& c = coords[static_cast<std::size_t>(rng.uniform_index(static_cast<std::uint64_t>(M)))];
        const double cm = c.cond_mean(x);
        const double y = cm + std::sqrt(c.var) * rng.normal();
        if (exact || mh_accept(c.log_weight(y, cm) - c.log_weight(x[c.m], cm), 0.0, rng)) x[c.m] = y;
        double p = 0.0;
        for (const auto& cc : coords) p += block_density(cc, x);
        p /= static_cast<double>(M);
        v[i] = std::log(p) - pl.log_density(x);
    }
    const auto est = mc_mean(v);
    if (!(kl0 > 0.0)) throw ConfigError("check_mwg_contraction: mu must differ from pi");
    out.contraction = make_report("mwg_contraction", est.mean / kl0, rhs, est.se / kl0, 1e-12, n_mc, seed);
    return out;
}

std::vector<InequalityReport> check_stationarity(const GaussianTarget<double>& pi, KernelKind kind, Index ell,
                                                 std::size_t n_chains, std::size_t steps, std::uint64_t seed) {
    if (n_chains < 100) throw ConfigError("check_stationarity: n_chains must be >= 100");
    const Index d = pi.dim();
    const Target target = pi;
    ChainRunner runner(target, kind, ell);
    const auto pl = law_of(pi);
    std::vector<std::vector<double>> first(static_cast<std::size_t>(d), std::vector<double>(n_chains));
    auto second = first;
    for (std::size_t c = 0; c < n_chains; ++c) {
        Rng rng(seed, c);
        ChainState st;
        st.x = pl.sample(rng);
        st.stream = c;
        for (std::size_t s = 0; s < steps; ++s) runner.step(st, rng);
        for (Index i = 0; i < d; ++i) {
            const double r = st.x[i] - pi.mean()[i];
            first[static_cast<std::size_t>(i)][c] = r;
            second[static_cast<std::size_t>(i)][c] = r * r;
        }
    }
    std::vector<InequalityReport> rows;
    const double n = static_cast<double>(n_chains);
    for (Index i = 0; i < d; ++i) {
        const double var = pl.covariance()(i, i);
        const double m1 = pairwise_sum(first[static_cast<std::size_t>(i)]) / n;
        const double m2 = pairwise_sum(second[static_cast<std::size_t>(i)]) / n;
        const std::string k = kernel_name(kind);
        rows.push_back(make_report("stationarity_mean_" + k + "_" + std::to_string(i + 1), std::abs(m1),
                                   4.0 * std::sqrt(var / n), std::nullopt, 0.0, n_chains, seed));
        rows.push_back(make_report("stationarity_second_moment_" + k + "_" + std::to_string(i + 1), std::abs(m2 - var),
                                   4.0 * var * std::sqrt(2.0 / n), std::nullopt, 0.0, n_chains, seed));
    }
    return rows;
}

// ---- non-strongly-convex rate ---------------------------------------------------------

namespace {

// Tensor grid evaluation of exp(-(U - shift)) with midpoint cells.
struct Quadrature {
    double Z = 0.0;
    double R2 = 0.0;
    VectorXd mean;
    VectorXd sd;
};

Quadrature quadrature(const CompositeTarget& pi, const VectorXd& mode, double u_mode, double half, int n) {
    const Index d = pi.dim();
    const double h = 2.0 * half / n;
    Quadrature q;
    q.mean = VectorXd::Zero(d);
    VectorXd m2 = VectorXd::Zero(d);
    std::vector<double> z, r2;
    std::vector<std::vector<double>> s1(static_cast<std::size_t>(d)), s2(static_cast<std::size_t>(d));
    const double cell = std::pow(h, static_cast<double>(d));
    VectorXd x(d);
    const int ny = d == 2 ? n : 1;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < ny; ++j) {
            x[0] = mode[0] - half + (i + 0.5) * h;
            if (d == 2) x[1] = mode[1] - half + (j + 0.5) * h;
            const double w = std::exp(-(pi.potential_unchecked(x) - u_mode)) * cell;
            z.push_back(w);
            double rr = 0.0;
            for (Index k = 0; k < d; ++k) {
                const double dx = x[k] - mode[k];
                rr += pi.block_L[static_cast<std::size_t>(k)] * dx * dx;
                s1[static_cast<std::size_t>(k)].push_back(w * x[k]);
                s2[static_cast<std::size_t>(k)].push_back(w * x[k] * x[k]);
            }
            r2.push_back(w * rr);
        }
    q.Z = pairwise_sum(z);
    q.R2 = pairwise_sum(r2) / q.Z;
    q.sd.resize(d);
    for (Index k = 0; k < d; ++k) {
        q.mean[k] = pairwise_sum(s1[static_cast<std::size_t>(k)]) / q.Z;
        m2[k] = pairwise_sum(s2[static_cast<std::size_t>(k)]) / q.Z;
        q.sd[k] = std::sqrt(std::max(m2[k] - q.mean[k] * q.mean[k], 0.0));
    }
    return q;
}

}  // namespace

NonConvexReport check_nonconvex_rate(const CompositeTarget& pi, const NonConvexOptions& opt) {
    pi.validate();
    const Index d = pi.dim();
    if (d > 2) throw UnsupportedError("check_nonconvex_rate: histogram KL needs d <= 2");
    if (!pi.blocks.all_unit()) throw UnsupportedError("check_nonconvex_rate requires unit blocks");
    if (pi.mode.size() != d) throw ConfigError("check_nonconvex_rate: target must provide its mode");
    if (opt.n_samples < 1000 || opt.bins < 2 || !(opt.box_half_width > 0.0) || opt.max_steps < 1)
        throw ConfigError("check_nonconvex_rate: invalid options");
    const VectorXd& mode = pi.mode;
    const double u_mode = pi.potential(mode);
    const double M = static_cast<double>(pi.blocks.num_blocks());

    // Grow the integration box until the density on its boundary is negligible.
    double half = 8.0;
    for (int it = 0;; ++it) {
        if (it > 40) throw DomainError("check_nonconvex_rate: target tails too heavy to integrate");
        double edge = kInf;
        VectorXd x(d);
        for (int k = 0; k <= 64; ++k) {
            const double s = -half + 2.0 * half * k / 64.0;
            for (Index a = 0; a < d; ++a)
                for (double side : {-half, half}) {
                    x = mode;
                    x[a] += side;
                    if (d == 2) x[1 - a] += s;
                    edge = std::min(edge, pi.potential(x) - u_mode);
                }
        }
        if (edge > 45.0) break;
        half *= 1.5;
    }
    const Quadrature q = quadrature(pi, mode, u_mode, half, d == 1 ? 400000 : 1600);

    // Uniform warm start on the box mode +- h: dmu0/dpi <= Z exp(max_B (U - U*)) / |B|.
    const double hw = opt.box_half_width;
    const double vol = std::pow(2.0 * hw, static_cast<double>(d));
    double umax = -kInf;
    for (int v = 0; v < (1 << d); ++v) {
        VectorXd x = mode;
        for (Index a = 0; a < d; ++a) x[a] += ((v >> a) & 1) ? hw : -hw;
        umax = std::max(umax, pi.potential(x) - u_mode);
    }
    NonConvexReport rep;
    const double logC = std::log(q.Z) + umax - std::log(vol);
    rep.warm_constant = std::exp(logC);
    rep.R_squared = q.R2;
    rep.B = std::max(logC, 2.0 * rep.warm_constant * q.R2);

    // Exact KL(mu0 | pi) = -log|B| + log Z + mean over B of (U - U*).
    {
        const int n = d == 1 ? 20000 : 400;
        const double h = 2.0 * hw / n;
        std::vector<double> u;
        VectorXd x(d);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < (d == 2 ? n : 1); ++j) {
                x[0] = mode[0] - hw + (i + 0.5) * h;
                if (d == 2) x[1] = mode[1] - hw + (j + 0.5) * h;
                u.push_back(pi.potential_unchecked(x) - u_mode);
            }
        rep.initial_kl = -std::log(vol) + std::log(q.Z) + pairwise_sum(u) / static_cast<double>(u.size());
    }

    for (std::uint64_t n = static_cast<std::uint64_t>(M);; n *= 2) {
        if (rep.checkpoints.empty()) rep.checkpoints.push_back(0);
        if (n >= opt.max_steps) break;
        rep.checkpoints.push_back(n);
    }
    rep.checkpoints.push_back(opt.max_steps);
    const std::size_t nc = rep.checkpoints.size();

    // Histogram over mean +- 8 sd with exact pi bin masses.
    const int nb = opt.bins;
    const std::size_t cells = d == 1 ? static_cast<std::size_t>(nb) : static_cast<std::size_t>(nb) * nb;
    VectorXd lo(d), bw(d);
    for (Index a = 0; a < d; ++a) {
        lo[a] = q.mean[a] - 8.0 * q.sd[a];
        bw[a] = 16.0 * q.sd[a] / nb;
    }
    std::vector<double> pi_mass(cells);
    {
        const int sub = d == 1 ? 64 : 6;
        VectorXd x(d);
        for (std::size_t c = 0; c < cells; ++c) {
            const int i = static_cast<int>(c % static_cast<std::size_t>(nb));
            const int j = static_cast<int>(c / static_cast<std::size_t>(nb));
            double s = 0.0;
            for (int a = 0; a < sub; ++a)
                for (int b = 0; b < (d == 2 ? sub : 1); ++b) {
                    x[0] = lo[0] + (i + (a + 0.5) / sub) * bw[0];
                    if (d == 2) x[1] = lo[1] + (j + (b + 0.5) / sub) * bw[1];
                    s += std::exp(-(pi.potential_unchecked(x) - u_mode));
                }
            const double area = d == 1 ? bw[0] : bw[0] * bw[1];
            pi_mass[c] = s / (d == 1 ? sub : sub * sub) * area / q.Z;
        }
    }
    std::vector<std::vector<std::uint64_t>> counts(nc, std::vector<std::uint64_t>(cells, 0));
    std::vector<std::uint64_t> outside(nc, 0);
    auto bin_of = [&](const VectorXd& x) -> std::ptrdiff_t {
        const double fi = std::floor((x[0] - lo[0]) / bw[0]);
        if (!(fi >= 0.0 && fi < nb)) return -1;
        if (d == 1) return static_cast<std::ptrdiff_t>(fi);
        const double fj = std::floor((x[1] - lo[1]) / bw[1]);
        if (!(fj >= 0.0 && fj < nb)) return -1;
        return static_cast<std::ptrdiff_t>(fj) * nb + static_cast<std::ptrdiff_t>(fi);
    };

    const Target target = pi;
    ChainRunner runner(target, KernelKind::GS);
    ChainState st;
    for (std::size_t p = 0; p < opt.n_samples; ++p) {
        Rng rng(opt.seed, p);
        st.x.resize(d);
        for (Index a = 0; a < d; ++a) st.x[a] = mode[a] - hw + 2.0 * hw * rng.uniform();
        st.step = 0;
        std::size_t k = 0;
        for (std::uint64_t n = 0;; ++n) {
            while (k < nc && rep.checkpoints[k] == n) {
                const auto b = bin_of(st.x);
                if (b < 0)
                    ++outside[k];
                else
                    ++counts[k][static_cast<std::size_t>(b)];
                ++k;
            }
            if (k == nc) break;
            runner.step(st, rng);
        }
    }

    const double N = static_cast<double>(opt.n_samples);
    for (std::size_t k = 0; k < nc; ++k) {
        if (static_cast<double>(outside[k]) / N > 1e-3)
            throw DomainError("check_nonconvex_rate: histogram grid leaks more than 1e-3 of the samples");
        std::vector<double> terms(cells);
        const double norm = 1.0 + 1e-12 * static_cast<double>(cells);
        for (std::size_t c = 0; c < cells; ++c) {
            const double p = (static_cast<double>(counts[k][c]) / N + 1e-12) / norm;
            terms[c] = p * std::log(p / std::max(pi_mass[c], 1e-300));
        }
        const double kl = pairwise_sum(terms);
        const double n = static_cast<double>(rep.checkpoints[k]);
        const double bound = 2.0 * M * rep.B / (n + 2.0 * M);
        rep.kl_trajectory.push_back(kl);
        rep.bound_trajectory.push_back(bound);
        rep.rows.push_back(make_report("nonconvex_n=" + std::to_string(rep.checkpoints[k]), kl, bound, std::nullopt,
                                       opt.tolerance, opt.n_samples, opt.seed));
    }
    rep.rows.insert(rep.rows.begin(),
                    make_report("nonconvex_initial_exact", rep.initial_kl, logC, std::nullopt, 1e-9, 1, opt.seed));
    rep.passed = std::all_of(rep.rows.begin(), rep.rows.end(), [](const auto& r) { return r.passed; });
    return rep;
}

// ---- mixing ---------------------------------------------------------------------------

double mixing_bound(const GaussianTarget<double>& pi, StartKind start, double eps, MixingMetric metric) {
    if (!(eps > 0.0)) throw ConfigError("mixing_bound: eps must be positive");
    const auto cn = condition_numbers(pi);
    const double target_kl = metric == MixingMetric::KL ? eps : 2.0 * eps * eps;
    const double d = static_cast<double>(pi.dim());
    const double M = static_cast<double>(pi.blocks().num_blocks());
    double inner = std::log(1.0 / target_kl);
    if (start == StartKind::Factorized) {
        inner += std::log(d) + 2.0 * std::log(cn.kappa);
    } else {
        const double lk = std::log(cn.kappa);
        inner += std::log(d / 2.0) + (lk > 0.0 ? std::log(lk) : -kInf);
    }
    return std::max(0.0, cn.kappa_star * M * inner);
}

namespace {

struct SequenceState {
    VectorXd mean;
    MatrixXd cov;
    Rng rng;
};

void propagate(SequenceState& s, const GaussianTarget<double>& pi, std::uint64_t steps, VectorXd& b, VectorXd& r) {
    const MatrixXd& Q = pi.precision();
    const VectorXd& xs = pi.mean();
    const Index d = pi.dim();
    for (std::uint64_t t = 0; t < steps; ++t) {
        const Index m = static_cast<Index>(s.rng.uniform_index(static_cast<std::uint64_t>(d)));
        const double qmm = Q(m, m);
        b = -Q.col(m) / qmm;
        b[m] = 0.0;
        r.noalias() = s.cov * b;
        const double vmm = b.dot(r) + 1.0 / qmm;
        s.mean[m] = xs[m] + b.dot(s.mean - xs);
        s.cov.row(m) = r.transpose();
        s.cov.col(m) = r;
        s.cov(m, m) = vmm;
    }
}

double mean_kl(const std::vector<SequenceState>& seqs, const GaussianTarget<double>& pi) {
    std::vector<double> v(seqs.size());
    for (std::size_t i = 0; i < seqs.size(); ++i) {
        const VectorXd r = seqs[i].mean - pi.mean();
        const MatrixXd& Q = pi.precision();
        Eigen::LLT<MatrixXd> llt(seqs[i].cov);
        if (llt.info() != Eigen::Success) throw NumericalError("mixing_experiment: degenerate propagated covariance");
        const double logdet = 2.0 * MatrixXd(llt.matrixL()).diagonal().array().log().sum();
        v[i] = std::max(0.0, 0.5 * (Q.cwiseProduct(seqs[i].cov).sum() + r.dot(Q * r) - static_cast<double>(pi.dim()) -
                                    pi.log_det_precision() - logdet));
    }
    return pairwise_sum(v) / static_cast<double>(v.size());
}

}  // namespace

MixingResult mixing_experiment(const GaussianTarget<double>& pi, StartKind start, double eps, MixingMetric metric,
                               const MixingOptions& opt) {
    require_unit_blocks(pi.blocks(), "mixing_experiment");
    if (!(eps > 0.0)) throw ConfigError("mixing_experiment: eps must be positive");
    if (opt.sequences < 1) throw ConfigError("mixing_experiment: need at least one sequence");
    const auto cn = condition_numbers(pi);
    MixingResult res;
    res.dim = pi.dim();
    res.kappa = cn.kappa;
    res.kappa_star = cn.kappa_star;
    res.threshold = metric == MixingMetric::KL ? eps : 2.0 * eps * eps;
    res.bound = mixing_bound(pi, start, eps, metric);

    const GaussianLaw<double> mu0 = start == StartKind::Factorized ? factorized_start(pi) : isotropic_start(pi, cn.L);
    res.initial_kl = kl_gaussian(mu0, pi);
    std::vector<SequenceState> seqs;
    seqs.reserve(opt.sequences);
    for (std::size_t s = 0; s < opt.sequences; ++s) seqs.push_back({mu0.mean(), mu0.covariance(), Rng(opt.seed, s)});

    VectorXd b(pi.dim()), r(pi.dim());
    auto advance = [&](std::vector<SequenceState>& st, std::uint64_t steps) {
        for (auto& s : st) propagate(s, pi, steps, b, r);
    };

    std::uint64_t lo = 0, hi = 0;
    if (mean_kl(seqs, pi) <= res.threshold) {
        hi = 0;
    } else {
        // Doubling: keep the states at `lo`, where the threshold is not met yet.
        std::vector<SequenceState> at_lo = seqs;
        for (std::uint64_t n = 1;; n *= 2) {
            if (n > opt.max_steps) throw NumericalError("mixing_experiment: threshold not reached within max_steps");
            std::vector<SequenceState> at_n = at_lo;
            advance(at_n, n - lo);
            if (mean_kl(at_n, pi) <= res.threshold) {
                hi = n;
                break;
            }
            lo = n;
            at_lo = std::move(at_n);
        }
        while (hi - lo > 1) {
            const std::uint64_t mid = lo + (hi - lo) / 2;
            std::vector<SequenceState> at_mid = at_lo;
            advance(at_mid, mid - lo);
            if (mean_kl(at_mid, pi) <= res.threshold) {
                hi = mid;
            } else {
                lo = mid;
                at_lo = std::move(at_mid);
            }
        }
    }
    res.iterations = hi;
    res.ratio = res.bound > 0.0 ? static_cast<double>(hi) / res.bound : (hi == 0 ? 0.0 : kInf);
    res.report = make_report("mixing_d=" + std::to_string(pi.dim()), static_cast<double>(hi), res.bound, std::nullopt,
                             0.0, opt.sequences, opt.seed);
    return res;
}

double log_log_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw ConfigError("log_log_slope: need two or more points");
    const std::size_t n = x.size();
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw DomainError("log_log_slope: values must be positive");
        mx += std::log(x[i]);
        my += std::log(y[i]);
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxy += (std::log(x[i]) - mx) * (std::log(y[i]) - my);
        sxx += (std::log(x[i]) - mx) * (std::log(x[i]) - mx);
    }
    if (!(sxx > 0.0)) throw DomainError("log_log_slope: x values must differ");
    return sxy / sxx;
}

// ---- nearest-neighbour KL -------------------------------------------------------------

namespace {

class KdTree {
public:
    explicit KdTree(const MatrixXd& pts) : pts_(pts), idx_(static_cast<std::size_t>(pts.rows())) {
        std::iota(idx_.begin(), idx_.end(), Index{0});
        if (!idx_.empty()) build(0, idx_.size());
    }

    /// Squared distance to the k-th nearest point, skipping index `self` and points at distance zero if `skip_zero`.
    double kth_sq(const Eigen::RowVectorXd& x, int k, Index self, bool skip_zero) const {
        heap_ = {};
        search(0, x, k, self, skip_zero);
        if (static_cast<int>(heap_.size()) < k) throw DomainError("knn: not enough neighbours");
        return heap_.top();
    }

private:
    struct Node {
        std::size_t begin, end;
        Index axis = -1;
        double split = 0.0;
        std::size_t left = 0, right = 0;
    };

    std::size_t build(std::size_t begin, std::size_t end) {
        const std::size_t id = nodes_.size();
        nodes_.push_back({begin, end});
        if (end - begin <= 16) return id;
        const Index d = pts_.cols();
        Index axis = 0;
        double best = -1.0;
        for (Index a = 0; a < d; ++a) {
            double lo = kInf, hi = -kInf;
            for (std::size_t i = begin; i < end; ++i) {
                lo = std::min(lo, pts_(idx_[i], a));
                hi = std::max(hi, pts_(idx_[i], a));
            }
            if (hi - lo > best) {
                best = hi - lo;
                axis = a;
            }
        }
        const std::size_t mid = begin + (end - begin) / 2;
        std::nth_element(idx_.begin() + static_cast<std::ptrdiff_t>(begin), idx_.begin() + static_cast<std::ptrdiff_t>(mid),
                         idx_.begin() + static_cast<std::ptrdiff_t>(end),
                         [&](Index a, Index b) { return pts_(a, axis) < pts_(b, axis); });
        const double split = pts_(idx_[mid], axis);
        const std::size_t l = build(begin, mid);
        const std::size_t r = build(mid, end);
        nodes_[id].axis = axis;
        nodes_[id].split = split;
        nodes_[id].left = l;
        nodes_[id].right = r;
        return id;
    }

    void offer(double d2, int k) const {
        if (static_cast<int>(heap_.size()) < k) {
            heap_.push(d2);
        } else if (d2 < heap_.top()) {
            heap_.pop();
            heap_.push(d2);
        }
    }

    void search(std::size_t id, const Eigen::RowVectorXd& x, int k, Index self, bool skip_zero) const {
        const Node& nd = nodes_[id];
        if (nd.axis < 0) {
            for (std::size_t i = nd.begin; i < nd.end; ++i) {
                const Index j = idx_[i];
                if (j == self) continue;
                const double d2 = (pts_.row(j) - x).squaredNorm();
                if (skip_zero && d2 == 0.0) continue;
                offer(d2, k);
            }
            return;
        }
        const double diff = x[nd.axis] - nd.split;
        const std::size_t near = diff < 0.0 ? nd.left : nd.right;
        const std::size_t far = diff < 0.0 ? nd.right : nd.left;
        search(near, x, k, self, skip_zero);
        if (static_cast<int>(heap_.size()) < k || diff * diff <= heap_.top()) search(far, x, k, self, skip_zero);
    }

    const MatrixXd& pts_;
    std::vector<Index> idx_;
    std::vector<Node> nodes_;
    mutable std::priority_queue<double> heap_;
};

bool has_duplicate_rows(const MatrixXd& X) {
    std::vector<Index> order(static_cast<std::size_t>(X.rows()));
    std::iota(order.begin(), order.end(), Index{0});
    auto less = [&](Index a, Index b) {
        for (Index c = 0; c < X.cols(); ++c)
            if (X(a, c) != X(b, c)) return X(a, c) < X(b, c);
        return false;
    };
    std::sort(order.begin(), order.end(), less);
    for (std::size_t i = 1; i < order.size(); ++i)
        if (!less(order[i - 1], order[i]) && !less(order[i], order[i - 1])) return true;
    return false;
}

void jitter(MatrixXd& X) {
    Rng rng(0x6a1773, 0);
    for (Index i = 0; i < X.rows(); ++i)
        for (Index c = 0; c < X.cols(); ++c) X(i, c) += 1e-12 * (1.0 + std::abs(X(i, c))) * rng.normal();
}

}  // namespace

KnnKlEstimate estimate_kl_knn(const MatrixXd& samples_p, const MatrixXd& samples_q, int k) {
    if (samples_p.cols() != samples_q.cols() || samples_p.cols() < 1)
        throw DimensionError("estimate_kl_knn: sample dimensions differ");
    if (samples_p.rows() < 1000 || samples_q.rows() < 1000)
        throw ConfigError("estimate_kl_knn: need at least 1e3 samples per set");
    if (k < 1 || k >= samples_p.rows()) throw ConfigError("estimate_kl_knn: invalid k");
    if (!samples_p.allFinite() || !samples_q.allFinite()) throw InputError("estimate_kl_knn: non-finite samples");

    KnnKlEstimate out;
    out.note = "k-nearest-neighbour estimate (k=" + std::to_string(k) +
               "); biased for small samples, heavy tails and high dimension";
    MatrixXd P = samples_p, Q = samples_q;
    if (has_duplicate_rows(P) || has_duplicate_rows(Q)) {
        jitter(P);
        jitter(Q);
        out.note += "; duplicate samples jittered at 1e-12 scale";
    }
    const KdTree tp(P), tq(Q);
    const Index n = P.rows();
    std::vector<double> terms(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
        const Eigen::RowVectorXd x = P.row(i);
        const double rho2 = tp.kth_sq(x, k, i, false);
        const double nu2 = tq.kth_sq(x, k, -1, true);
        if (!(rho2 > 0.0)) throw NumericalError("estimate_kl_knn: zero neighbour distance");
        terms[static_cast<std::size_t>(i)] = 0.5 * std::log(nu2 / rho2);
    }
    const double d = static_cast<double>(P.cols());
    out.estimate = d * pairwise_sum(terms) / static_cast<double>(n) +
                   std::log(static_cast<double>(Q.rows()) / static_cast<double>(n - 1));
    return out;
}

}  // namespace lcgibbs
