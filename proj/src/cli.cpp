#include "lcgibbs/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "lcgibbs/samplers.hpp"
#include "lcgibbs/target_io.hpp"
#include "lcgibbs/verify.hpp"

namespace lcgibbs {

namespace {

struct SampleArgs {
    std::string target;
    std::string kernel = "gs";
    Index ell = 1;
    long long steps = 1000;
    std::uint64_t seed = 0;
    long long replicas = 1;
    std::string out = "-";
};

struct VerifyArgs {
    std::string suite;
    std::optional<Index> dim;
    std::optional<long long> trials;
    std::uint64_t seed = 1;
    std::optional<double> rho;
    Index ell = 1;
    std::optional<double> kappa_star;
    std::optional<long long> n_mc;
    std::optional<long long> frames;
    long long chain_len = 100000;
    double eps = 0.01;
    long long samples = 1000000;
    long long steps = 200;
    std::string dims = "2,4,8,16";
    std::string start = "factorized";
    std::string metric = "kl";
    long long sequences = 2048;
    std::string out = "-";
};

std::string replica_path(const std::string& out, long long k) {
    std::string stem = out;
    if (stem.size() > 4 && stem.compare(stem.size() - 4, 4, ".csv") == 0) stem.resize(stem.size() - 4);
    return stem + "_r" + std::to_string(k) + ".csv";
}

void run_chain(const Target& target, KernelKind kind, Index ell, long long steps, std::uint64_t seed,
               std::uint64_t stream, std::ostream& os) {
    ChainRunner runner(target, kind, ell);
    Rng rng(seed, stream);
    ChainState st;
    st.x = default_start(target);
    st.stream = stream;
    write_chain_header(os, target_dim(target));
    for (long long s = 0; s < steps; ++s) {
        runner.step(st, rng);
        write_chain_row(os, st, kind);
    }
}

int cmd_sample(const SampleArgs& a, std::ostream& out, std::ostream& err) {
    if (a.steps < 1) throw ConfigError("--steps must be >= 1");
    if (a.replicas < 1) throw ConfigError("--replicas must be >= 1");
    if (a.replicas > 1 && a.out == "-") throw ConfigError("--replicas > 1 needs a file path for --out");
    const KernelKind kind = parse_kernel(a.kernel);
    if (a.ell != 1 && kind != KernelKind::GSEll && kind != KernelKind::HR)
        throw ConfigError("--ell applies only to gs-ell and hr");
    const Target target = load_target(a.target);
    const auto steps = a.steps;
    if (a.out == "-") {
        run_chain(target, kind, a.ell, steps, a.seed, 0, out);
        return kExitOk;
    }
    for (long long k = 0; k < a.replicas; ++k) {
        const std::string path = a.replicas == 1 ? a.out : replica_path(a.out, k);
        std::ofstream f(path);
        if (!f) throw ConfigError("cannot open output file " + path);
        run_chain(target, kind, a.ell, steps, a.seed, static_cast<std::uint64_t>(k), f);
        f.flush();
        if (!f) throw ConfigError("failed writing " + path);
        out << "wrote " << steps << " rows to " << path << '\n';
    }
    (void)err;
    return kExitOk;
}

// ---- verification suites --------------------------------------------------------------

struct SuiteOutput {
    std::vector<InequalityReport> rows;
    std::vector<std::string> notes;
};

GaussianTarget<double> random_target(Index d, double kappa, Rng& rng) {
    VectorXd m(d);
    for (Index i = 0; i < d; ++i) m[i] = rng.normal();
    return GaussianTarget<double>(m, random_spd(d, kappa, rng));
}

GaussianTarget<double> target_from_law(const GaussianLaw<double>& law) {
    MatrixXd Q = law.llt().solve(MatrixXd::Identity(law.dim(), law.dim()));
    Q = 0.5 * (Q + Q.transpose()).eval();
    return GaussianTarget<double>(law.mean(), Q);
}

double log_uniform(Rng& rng, double lo, double hi) { return std::exp(std::log(lo) + rng.uniform() * std::log(hi / lo)); }

/// Product of d/2 identical pairs [[1, rho], [rho, 1]] (plus a unit coordinate for odd d).
MatrixXd paired_precision(Index d, double rho) {
    MatrixXd Q = MatrixXd::Identity(d, d);
    for (Index i = 0; i + 1 < d; i += 2) Q(i, i + 1) = Q(i + 1, i) = rho;
    return Q;
}

std::vector<Index> parse_dims(const std::string& s) {
    std::vector<Index> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            std::size_t pos = 0;
            const long long v = std::stoll(tok, &pos);
            if (pos != tok.size() || v < 1) throw ConfigError("");
            out.push_back(static_cast<Index>(v));
        } catch (const std::exception&) {
            throw ConfigError("--dims must be a comma-separated list of positive integers");
        }
    }
    if (out.empty()) throw ConfigError("--dims is empty");
    return out;
}

long long positive(const std::optional<long long>& v, long long def, const char* flag) {
    const long long x = v.value_or(def);
    if (x < 1) throw ConfigError(std::string(flag) + " must be >= 1");
    return x;
}

Index dimension(const VerifyArgs& a, Index def, Index min_dim = 1) {
    const Index d = a.dim.value_or(def);
    if (d < min_dim) throw ConfigError("--dim must be >= " + std::to_string(min_dim));
    return d;
}

SuiteOutput suite_t31(const VerifyArgs& a) {
    SuiteOutput o;
    const Index d = dimension(a, 6, 2);
    const auto trials = positive(a.trials, 100, "--trials");
    for (long long t = 0; t < trials; ++t) {
        const auto s = trial_seed(a.seed, static_cast<std::uint64_t>(t));
        Rng rng(s);
        const auto pi = random_target(d, log_uniform(rng, 1.0, 50.0), rng);
        const auto mu = random_gaussian_law(d, log_uniform(rng, 1.0, 10.0), rng);
        o.rows.push_back(check_functional_inequality(mu, pi, s));
    }
    return o;
}

SuiteOutput suite_t32(const VerifyArgs& a) {
    SuiteOutput o;
    const Index d = dimension(a, 3, 2);
    const auto trials = positive(a.trials, 1, "--trials");
    const auto n_mc = positive(a.n_mc, 1000000, "--n-mc");
    const double ks = a.kappa_star.value_or(4.0);
    for (long long t = 0; t < trials; ++t) {
        const auto s = trial_seed(a.seed, static_cast<std::uint64_t>(t));
        Rng rng(s);
        VectorXd m(d);
        for (Index i = 0; i < d; ++i) m[i] = rng.normal();
        const GaussianTarget<double> pi(m, random_precision_with_kappa_star(d, ks, rng));
        const auto mu = random_gaussian_law(d, 3.0, rng);
        auto r = check_contraction_one_step(mu, pi, static_cast<std::size_t>(n_mc), s);
        o.rows.push_back(r);
        o.rows.push_back(make_report("one_step_vs_functional", r.lhs, functional_lhs(mu, pi), r.se, 1e-12,
                                     static_cast<std::uint64_t>(n_mc), s));
    }
    return o;
}

SuiteOutput suite_gap(const VerifyArgs& a) {
    SuiteOutput o;
    const Index d = dimension(a, 2, 2);
    const double rho = a.rho.value_or(0.5);
    if (a.chain_len < 1) throw ConfigError("--chain-len must be >= 1");
    const auto g = check_gap(equicorrelated_precision(d, rho), static_cast<std::size_t>(a.chain_len), a.seed);
    o.rows.push_back(g.accuracy);
    o.rows.push_back(g.lower_bound);
    std::ostringstream n;
    n << "analytic gap " << format_double(g.analytic) << ", empirical gap " << format_double(g.empirical);
    o.notes.push_back(n.str());
    return o;
}

SuiteOutput suite_variance(const VerifyArgs& a) {
    SuiteOutput o;
    const Index d = dimension(a, 4, 2);
    const auto trials = positive(a.trials, 200, "--trials");
    for (long long t = 0; t < trials; ++t) {
        const auto s = trial_seed(a.seed, static_cast<std::uint64_t>(t));
        Rng rng(s);
        const MatrixXd Q = random_precision_with_kappa_star(d, log_uniform(rng, 1.0, 20.0), rng);
        o.rows.push_back(check_variance_inequality(Q, 1, s));
    }
    return o;
}

SuiteOutput suite_hr_proj(const VerifyArgs& a) {
    SuiteOutput o;
    const Index d = dimension(a, 4);
    const auto trials = positive(a.trials, 1, "--trials");
    const auto frames = positive(a.frames, 10000, "--frames");
    for (long long t = 0; t < trials; ++t) {
        const auto s = trial_seed(a.seed, static_cast<std::uint64_t>(t));
        Rng rng(s);
        const auto pi = random_target(d, 10.0, rng);
        const auto mu = random_gaussian_law(d, 5.0, rng);
        o.rows.push_back(check_hr_projection_inequality(mu, pi, a.ell, static_cast<std::size_t>(frames), s));
    }
    return o;
}

SuiteOutput suite_hr_contract(const VerifyArgs& a) {
    SuiteOutput o;
    const Index d = dimension(a, 3);
    const auto trials = positive(a.trials, 1, "--trials");
    const auto n_mc = positive(a.n_mc, 20000, "--n-mc");
    const auto frames = positive(a.frames, 256, "--frames");
    for (long long t = 0; t < trials; ++t) {
        const auto s = trial_seed(a.seed, static_cast<std::uint64_t>(t));
        Rng rng(s);
        const auto pi = random_target(d, 5.0, rng);
        const auto mu = random_gaussian_law(d, 3.0, rng);
        o.rows.push_back(check_hr_contraction(mu, pi, a.ell, static_cast<std::size_t>(n_mc), s,
                                              static_cast<std::size_t>(frames)));
    }
    return o;
}

SuiteOutput suite_mwg(const VerifyArgs& a) {
    SuiteOutput o;
    const Index d = dimension(a, 2);
    if (d > 2) throw UnsupportedError("the mwg suite evaluates densities by quadrature and needs --dim <= 2");
    const auto trials = positive(a.trials, 1, "--trials");
    const auto n_mc = positive(a.n_mc, 20000, "--n-mc");
    const double ks = a.kappa_star.value_or(2.0);
    for (long long t = 0; t < trials; ++t) {
        const auto s = trial_seed(a.seed, static_cast<std::uint64_t>(t));
        Rng rng(s);
        VectorXd m(d);
        for (Index i = 0; i < d; ++i) m[i] = rng.normal();
        const MatrixXd Q = d == 1 ? MatrixXd::Identity(1, 1) : random_precision_with_kappa_star(d, ks, rng);
        const GaussianTarget<double> pi(m, Q);
        const auto mu = random_gaussian_law(d, 3.0, rng);
        MwGConfig cfg;
        cfg.proposal = MwGConfig::Proposal::Independent;
        const auto c = check_mwg_contraction(mu, pi, cfg, static_cast<std::size_t>(n_mc), s);
        o.rows.push_back(c.minorization);
        o.rows.push_back(c.contraction);
        for (auto& r : check_stationarity(pi, KernelKind::MwGRWM, 1, 20000, 20, s)) o.rows.push_back(r);
    }
    return o;
}

SuiteOutput suite_nonconvex(const VerifyArgs& a) {
    SuiteOutput o;
    const Index d = dimension(a, 1);
    const auto pi = make_logcosh_target(d);
    NonConvexOptions opt;
    if (a.samples < 1 || a.steps < 1) throw ConfigError("--samples and --steps must be >= 1");
    opt.n_samples = static_cast<std::size_t>(a.samples);
    opt.max_steps = static_cast<std::uint64_t>(a.steps);
    opt.seed = a.seed;
    const auto rep = check_nonconvex_rate(pi, opt);
    o.rows = rep.rows;
    std::ostringstream n;
    n << "warm constant C " << format_double(rep.warm_constant) << ", R^2 " << format_double(rep.R_squared) << ", B "
      << format_double(rep.B);
    o.notes.push_back(n.str());
    return o;
}

SuiteOutput suite_feasible_start(const VerifyArgs& a) {
    SuiteOutput o;
    const Index d = dimension(a, 6);
    const auto trials = positive(a.trials, 100, "--trials");
    for (long long t = 0; t < trials; ++t) {
        const auto s = trial_seed(a.seed, static_cast<std::uint64_t>(t));
        Rng rng(s);
        const auto pi = random_target(d, log_uniform(rng, 1.0, 50.0), rng);
        o.rows.push_back(factorized_start_kl(pi, s));
        o.rows.push_back(gaussian_warm_start_kl(pi, s));
    }
    return o;
}

SuiteOutput suite_lemma54(const VerifyArgs& a) {
    SuiteOutput o;
    const Index d = dimension(a, 4);
    const auto trials = positive(a.trials, 100, "--trials");
    for (long long t = 0; t < trials; ++t) {
        const auto s = trial_seed(a.seed, static_cast<std::uint64_t>(t));
        Rng rng(s);
        const auto mu = random_gaussian_law(d, log_uniform(rng, 1.0, 10.0), rng);
        const auto nu = random_gaussian_law(d, log_uniform(rng, 1.0, 10.0), rng);
        o.rows.push_back(check_partial_map_entropy_identity(mu, nu, BlockStructure::unit(d), s));
        o.rows.push_back(check_potential_inequality(mu, target_from_law(nu), s));
    }
    return o;
}

SuiteOutput suite_lemma56(const VerifyArgs& a) {
    SuiteOutput o;
    const Index d = dimension(a, 4);
    const auto trials = positive(a.trials, 100, "--trials");
    for (long long t = 0; t < trials; ++t) {
        const auto s = trial_seed(a.seed, static_cast<std::uint64_t>(t));
        Rng rng(s);
        const auto mu = random_gaussian_law(d, log_uniform(rng, 1.0, 10.0), rng);
        const auto nu = random_gaussian_law(d, log_uniform(rng, 1.0, 10.0), rng);
        o.rows.push_back(check_entropy_path_convexity(mu, nu, s));
        o.rows.push_back(check_partial_map_entropy_inequality(mu, nu, BlockStructure::unit(d), 0.5, s));
    }
    return o;
}

SuiteOutput suite_mixing(const VerifyArgs& a) {
    SuiteOutput o;
    const double rho = a.rho.value_or(0.95);
    if (!(std::abs(rho) < 1.0)) throw ConfigError("--rho must lie in (-1, 1)");
    StartKind start;
    if (a.start == "factorized")
        start = StartKind::Factorized;
    else if (a.start == "gaussian")
        start = StartKind::GaussianFeasible;
    else
        throw ConfigError("--start must be factorized or gaussian");
    MixingMetric metric;
    if (a.metric == "kl")
        metric = MixingMetric::KL;
    else if (a.metric == "tv")
        metric = MixingMetric::TV;
    else
        throw ConfigError("--metric must be kl or tv");
    if (a.sequences < 1) throw ConfigError("--sequences must be >= 1");
    MixingOptions opt;
    opt.sequences = static_cast<std::size_t>(a.sequences);
    opt.seed = a.seed;
    const auto dims = parse_dims(a.dims);
    std::vector<double> xs, ys;
    for (Index d : dims) {
        const GaussianTarget<double> pi(VectorXd::Zero(d), paired_precision(d, rho));
        const auto r = mixing_experiment(pi, start, a.eps, metric, opt);
        o.rows.push_back(r.report);
        xs.push_back(static_cast<double>(d));
        ys.push_back(static_cast<double>(std::max<std::uint64_t>(r.iterations, 1)));
        std::ostringstream n;
        n << "d=" << d << ": " << r.iterations << " iterations, bound " << format_double(r.bound) << ", ratio "
          << format_double(r.ratio);
        o.notes.push_back(n.str());
    }
    if (dims.size() >= 2) {
        const double slope = log_log_slope(xs, ys);
        o.rows.push_back(make_report("mixing_slope_upper", slope, 1.3, std::nullopt, 0.0, dims.size(), a.seed));
        o.rows.push_back(make_report("mixing_slope_lower", 0.8, slope, std::nullopt, 0.0, dims.size(), a.seed));
    }
    return o;
}

const std::map<std::string, std::function<SuiteOutput(const VerifyArgs&)>>& suites() {
    static const std::map<std::string, std::function<SuiteOutput(const VerifyArgs&)>> s = {
        {"t31", suite_t31},
        {"t32", suite_t32},
        {"gap", suite_gap},
        {"variance", suite_variance},
        {"hr-proj", suite_hr_proj},
        {"hr-contract", suite_hr_contract},
        {"mwg", suite_mwg},
        {"nonconvex", suite_nonconvex},
        {"feasible-start", suite_feasible_start},
        {"lemma54", suite_lemma54},
        {"lemma56", suite_lemma56},
        {"mixing", suite_mixing},
    };
    return s;
}

int cmd_verify(const VerifyArgs& a, std::ostream& out, std::ostream& err) {
    const auto it = suites().find(a.suite);
    if (it == suites().end()) throw ConfigError("unknown suite '" + a.suite + "'");
    const SuiteOutput res = it->second(a);

    std::ofstream file;
    std::ostream* csv = &out;
    std::ostream* summary = &err;
    if (a.out != "-") {
        file.open(a.out);
        if (!file) throw ConfigError("cannot open output file " + a.out);
        csv = &file;
        summary = &out;
    }
    write_report_header(*csv);
    std::size_t passed = 0;
    for (const auto& r : res.rows) {
        write_report_row(*csv, r);
        if (r.passed) ++passed;
    }
    csv->flush();
    if (!*csv) throw ConfigError("failed writing " + a.out);
    for (const auto& n : res.notes) *summary << a.suite << ": " << n << '\n';
    for (const auto& r : res.rows)
        if (!r.passed) *summary << a.suite << ": FAILED " << r.name << " (lhs " << format_double(r.lhs) << ", rhs "
                                << format_double(r.rhs) << ", seed " << r.seed << ")\n";
    *summary << a.suite << ": " << passed << "/" << res.rows.size() << " checks passed\n";
    return passed == res.rows.size() ? kExitOk : kExitChecksFailed;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Log-concave Gibbs sampling toolkit"};
    app.require_subcommand(1);

    SampleArgs sa;
    auto* sample = app.add_subcommand("sample", "Run chains and write them as CSV");
    sample->add_option("--target", sa.target, "Target JSON file")->required();
    sample->add_option("--kernel", sa.kernel, "gs, gs-ell, hr, mwg-rwm or mwg-imh");
    sample->add_option("--ell", sa.ell, "Blocks per step (gs-ell) or frame size (hr)");
    sample->add_option("--steps", sa.steps, "Steps per chain");
    sample->add_option("--seed", sa.seed, "Seed");
    sample->add_option("--replicas", sa.replicas, "Independent chains, one file each");
    sample->add_option("--out", sa.out, "Output path, '-' for stdout");

    VerifyArgs va;
    auto* verify = app.add_subcommand("verify", "Run a verification suite and write its report as CSV");
    verify->add_option("suite", va.suite, "Suite name")->required();
    verify->add_option("--dim", va.dim, "Dimension");
    verify->add_option("--trials", va.trials, "Random instances");
    verify->add_option("--seed", va.seed, "Seed");
    verify->add_option("--rho", va.rho, "Correlation parameter (gap, mixing)");
    verify->add_option("--ell", va.ell, "Frame size (hr-proj, hr-contract)");
    verify->add_option("--kappa-star", va.kappa_star, "Coordinate-wise condition number (t32, mwg)");
    verify->add_option("--n-mc", va.n_mc, "Monte Carlo sample size");
    verify->add_option("--frames", va.frames, "Sampled frames (hr-proj, hr-contract)");
    verify->add_option("--chain-len", va.chain_len, "Chain length (gap)");
    verify->add_option("--eps", va.eps, "Accuracy (mixing)");
    verify->add_option("--samples", va.samples, "Particles (nonconvex)");
    verify->add_option("--steps", va.steps, "Last checkpoint (nonconvex)");
    verify->add_option("--dims", va.dims, "Comma-separated dimensions (mixing)");
    verify->add_option("--start", va.start, "factorized or gaussian (mixing)");
    verify->add_option("--metric", va.metric, "kl or tv (mixing)");
    verify->add_option("--sequences", va.sequences, "Sampled block sequences (mixing)");
    verify->add_option("--out", va.out, "Output path, '-' for stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kExitConfig;
    }

    try {
        if (*sample) return cmd_sample(sa, out, err);
        return cmd_verify(va, out, err);
    } catch (const NumericalError& e) {
        err << "numerical error: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const ConditionalSamplingError& e) {
        err << "numerical error: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const ModeError& e) {
        err << "numerical error: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitConfig;
    }
}

}  // namespace lcgibbs
