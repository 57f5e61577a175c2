#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "lcgibbs/gaussian.hpp"
#include "lcgibbs/rng.hpp"
#include "lcgibbs/samplers.hpp"
#include "lcgibbs/targets.hpp"

namespace lcgibbs {

struct InequalityReport {
    std::string name;
    double lhs = 0.0;
    double rhs = 0.0;
    double slack = 0.0;
    std::optional<double> se;
    bool passed = false;
    std::uint64_t trials = 1;
    std::uint64_t seed = 0;
    double abs_tol = 0.0;
};

/// passed <=> lhs <= rhs + max(abs_tol, z * se), z = 3.
InequalityReport make_report(std::string name, double lhs, double rhs, std::optional<double> se, double abs_tol,
                             std::uint64_t trials, std::uint64_t seed);

void write_report_header(std::ostream& os);
void write_report_row(std::ostream& os, const InequalityReport& r);

/// Derived per-trial seed; a pure function of (seed, trial).
std::uint64_t trial_seed(std::uint64_t seed, std::uint64_t trial);

// ---- random instances -------------------------------------------------------

/// Haar-distributed orthogonal d x d matrix.
MatrixXd random_orthogonal(Index d, Rng& rng);
/// SPD matrix with condition number exactly kappa: log-uniform spectrum with both ends pinned, Haar eigenvectors.
MatrixXd random_spd(Index d, double kappa, Rng& rng);
/// Gaussian law with standard normal mean and covariance random_spd(d, kappa).
GaussianLaw<double> random_gaussian_law(Index d, double kappa, Rng& rng);
/// Precision with unit blocks whose coordinate-wise condition number equals kappa_star, randomly rescaled.
MatrixXd random_precision_with_kappa_star(Index d, double kappa_star, Rng& rng);
/// Precision (1 - rho) I + rho 1 1^T.
MatrixXd equicorrelated_precision(Index d, double rho);

// ---- closed-form checks -----------------------------------------------------

/// (1/M) sum_m KL(mu_{-m} | pi_{-m}) <= (1 - 1/(kappa* M)) KL(mu | pi).
InequalityReport check_functional_inequality(const GaussianLaw<double>& mu, const GaussianTarget<double>& pi,
                                             std::uint64_t seed = 0);
double functional_lhs(const GaussianLaw<double>& mu, const GaussianTarget<double>& pi);

/// Worst case over `trials` random v of v^T Q^{-1} v / (2 kappa*) <= sum_m v_m^2 / Q_mm.
InequalityReport check_variance_inequality(const MatrixXd& Q, std::uint64_t trials, std::uint64_t seed);

/// Factorized start prod_m N(x*_m, Q_mm^{-1}): KL <= d kappa^2.
InequalityReport factorized_start_kl(const GaussianTarget<double>& pi, std::uint64_t seed = 0);
GaussianLaw<double> factorized_start(const GaussianTarget<double>& pi);
/// Start N(x*, L^{-1} I) has dmu/dpi <= C with log C = (1/2) sum_i log(L / lambda_i); checks KL <= log C.
InequalityReport gaussian_warm_start_kl(const GaussianTarget<double>& pi, std::uint64_t seed = 0);
double gaussian_warm_start_log_c(const GaussianTarget<double>& pi);

/// Entropy identity for partial maps at t = 1, reported as |lhs - rhs| <= 1e-9.
InequalityReport check_partial_map_entropy_identity(const GaussianLaw<double>& mu, const GaussianLaw<double>& nu,
                                                    const BlockStructure& blocks, std::uint64_t seed = 0);
/// (1/M) sum_m U(T^m#mu) <= (1 - 1/(kappa* M)) U(mu) + U(pi)/(kappa* M), partial maps at t = lambda*.
InequalityReport check_potential_inequality(const GaussianLaw<double>& mu, const GaussianTarget<double>& pi,
                                            std::uint64_t seed = 0);
/// Smallest second difference of the entropy along (1 - t) Id + t T on an 11-point grid, reported as -min <= 1e-10.
InequalityReport check_entropy_path_convexity(const GaussianLaw<double>& mu, const GaussianLaw<double>& nu,
                                              std::uint64_t seed = 0);
/// (1/M) sum_m H(T^m(t)#mu) <= (1 - t/M) H(mu) + (t/M) H(T#mu).
InequalityReport check_partial_map_entropy_inequality(const GaussianLaw<double>& mu, const GaussianLaw<double>& nu,
                                                      const BlockStructure& blocks, double t, std::uint64_t seed = 0);

// ---- Monte Carlo checks -----------------------------------------------------

struct McEstimate {
    double mean = 0.0;
    double se = 0.0;
};

/// Mean and standard error with pairwise summation.
McEstimate mc_mean(const std::vector<double>& values);

/// KL(mu P | pi) for one random-scan Gibbs step, by sampling the exact one-step mixture.
McEstimate one_step_kl_estimate(const GaussianLaw<double>& mu, const GaussianTarget<double>& pi, std::size_t n_mc,
                                Rng& rng);
InequalityReport check_contraction_one_step(const GaussianLaw<double>& mu, const GaussianTarget<double>& pi,
                                            std::size_t n_mc, std::uint64_t seed);

struct GapCheck {
    double analytic = 0.0;
    double empirical = 0.0;
    /// |analytic - empirical| <= 0.1 analytic
    InequalityReport accuracy;
    /// 1/(2 kappa* d) <= analytic
    InequalityReport lower_bound;
};

/// Empirical gap: 1 - lag-1 autocorrelation of the slowest linear functional along a stationary chain.
GapCheck check_gap(const MatrixXd& Q, std::size_t chain_len, std::uint64_t seed);

InequalityReport check_hr_projection_inequality(const GaussianLaw<double>& mu, const GaussianTarget<double>& pi,
                                                Index ell, std::size_t n_frames, std::uint64_t seed);

/// Law after one Hit-and-Run step along a fixed frame, for Gaussian mu and pi.
GaussianLaw<double> hr_frame_law(const GaussianLaw<double>& mu, const GaussianTarget<double>& pi, const MatrixXd& V);

/**
 * One-step KL of Hit-and-Run against (1 - ell/(kappa d)) KL(mu | pi). The
 * one-step law is replaced by the mixture over `n_frames` sampled frames,
 * whose KL is in expectation no smaller than the exact one. The reported
 * standard error is widened by a factor 2.
 */
InequalityReport check_hr_contraction(const GaussianLaw<double>& mu, const GaussianTarget<double>& pi, Index ell,
                                      std::size_t n_mc, std::uint64_t seed, std::size_t n_frames = 256);
McEstimate hr_one_step_kl_estimate(const GaussianLaw<double>& mu, const GaussianTarget<double>& pi, Index ell,
                                   std::size_t n_mc, std::size_t n_frames, Rng& rng);

struct MwGCheck {
    /// max over a grid of pi(y | x_{-m}) / q(y) against kappa*^{d_m / 2}
    InequalityReport minorization;
    /// estimated KL(mu P | pi) / KL(mu | pi) against 1 - beta/(kappa* M)
    InequalityReport contraction;
};

/**
 * Metropolis-within-Gibbs checks on Gaussian targets with unit blocks and d <= 2.
 * The density of mu P is computed by quadrature, including the rejection atom.
 */
MwGCheck check_mwg_contraction(const GaussianLaw<double>& mu, const GaussianTarget<double>& pi, const MwGConfig& cfg,
                               std::size_t n_mc, std::uint64_t seed);

/// First and second moments after `steps` kernel steps from exact draws, against 4 standard errors.
std::vector<InequalityReport> check_stationarity(const GaussianTarget<double>& pi, KernelKind kind, Index ell,
                                                 std::size_t n_chains, std::size_t steps, std::uint64_t seed);

// ---- non-strongly-convex rate ------------------------------------------------

struct NonConvexOptions {
    std::size_t n_samples = 1000000;
    std::uint64_t max_steps = 200;
    int bins = 256;
    double tolerance = 0.05;
    /// Half-width of the uniform warm start box around the mode.
    double box_half_width = 1.0;
    std::uint64_t seed = 1;
};

struct NonConvexReport {
    /// Integral of |x - x*|_L^2 under pi.
    double R_squared = 0.0;
    /// max(log C, 2 C R_squared)
    double B = 0.0;
    double warm_constant = 0.0;
    /// Exact KL of the warm start.
    double initial_kl = 0.0;
    std::vector<std::uint64_t> checkpoints;
    std::vector<double> kl_trajectory;
    /// 2 M B / (n + 2 M)
    std::vector<double> bound_trajectory;
    std::vector<InequalityReport> rows;
    bool passed = false;
};

/**
 * Runs random-scan GS on a composite target of dimension <= 2 from a uniform
 * warm start and compares histogram KL estimates at n = 0, M, 2M, 4M, ... and
 * n = max_steps with the envelope 2MB/(n + 2M).
 */
NonConvexReport check_nonconvex_rate(const CompositeTarget& pi, const NonConvexOptions& opt);

// ---- mixing -------------------------------------------------------------------

enum class StartKind { Factorized, GaussianFeasible };
enum class MixingMetric { KL, TV };

struct MixingOptions {
    std::size_t sequences = 2048;
    std::uint64_t seed = 1;
    std::uint64_t max_steps = 10000000;
};

struct MixingResult {
    Index dim = 0;
    double kappa = 0.0;
    double kappa_star = 0.0;
    double initial_kl = 0.0;
    /// First n at which the estimated KL drops to the threshold.
    std::uint64_t iterations = 0;
    double bound = 0.0;
    double ratio = 0.0;
    double threshold = 0.0;
    InequalityReport report;
};

/**
 * Mixing time of random-scan GS on a Gaussian target. The law after n steps
 * is the average over block sequences of exactly propagated Gaussian laws;
 * its KL is estimated from above by averaging the closed-form KL over sampled
 * sequences. Each sequence's KL is non-increasing in n, so the first passage
 * below the threshold is located by doubling and bisection.
 */
MixingResult mixing_experiment(const GaussianTarget<double>& pi, StartKind start, double eps, MixingMetric metric,
                               const MixingOptions& opt);
double mixing_bound(const GaussianTarget<double>& pi, StartKind start, double eps, MixingMetric metric);

/// Least-squares slope of log(iterations) against log(dim).
double log_log_slope(const std::vector<double>& x, const std::vector<double>& y);

// ---- nearest-neighbour KL ------------------------------------------------------

struct KnnKlEstimate {
    double estimate = 0.0;
    std::string note;
};

/**
 * k-nearest-neighbour KL estimate of KL(p | q) from samples (one sample per
 * row). Exact copies of a p-sample inside the q-set are skipped when searching
 * its q-neighbours; duplicates within a set trigger a 1e-12-scale jitter.
 */
KnnKlEstimate estimate_kl_knn(const MatrixXd& samples_p, const MatrixXd& samples_q, int k = 5);

}  // namespace lcgibbs
