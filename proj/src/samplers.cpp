#include "lcgibbs/samplers.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>

namespace lcgibbs {

namespace {

using Workspace = detail::SamplerWorkspace;

ConditionNumbers<double> numbers_for(const Target& t) {
    if (const auto* g = std::get_if<GaussianTarget<double>>(&t)) return condition_numbers(*g);
    return std::get<CompositeTarget>(t).condition_numbers();
}

const BlockStructure& blocks_of(const Target& t) {
    if (const auto* g = std::get_if<GaussianTarget<double>>(&t)) return g->blocks();
    return std::get<CompositeTarget>(t).blocks;
}

void check_state(const Target& t, const ChainState& s) {
    if (s.x.size() != blocks_of(t).dim()) throw DimensionError("chain state and target dimensions disagree");
    if (!s.x.allFinite()) throw InputError("chain state has non-finite entries");
}

// Redraws block m of x from the Gaussian full conditional.
void gaussian_block_update(const GaussianTarget<double>& t, VectorXd& x, Index m, Rng& rng) {
    const Index o = t.blocks().offset(m), n = t.blocks().size(m);
    const MatrixXd& Q = t.precision();
    const VectorXd& mu = t.mean();
    if (n == 1) {
        const double qmm = Q(o, o);
        const double h = Q.row(o).dot(x - mu) - qmm * (x[o] - mu[o]);
        x[o] = mu[o] - h / qmm + rng.normal() / std::sqrt(qmm);
        return;
    }
    const MatrixXd Qmm = Q.block(o, o, n, n);
    Eigen::LLT<MatrixXd> llt(Qmm);
    if (llt.info() != Eigen::Success) throw NumericalError("singular diagonal block of the precision");
    const VectorXd h = Q.middleRows(o, n) * (x - mu) - Qmm * (x.segment(o, n) - mu.segment(o, n));
    VectorXd z(n);
    for (Index i = 0; i < n; ++i) z[i] = rng.normal();
    x.segment(o, n) = mu.segment(o, n) - llt.solve(h) + llt.matrixU().solve(z);
}

void composite_block_update(const CompositeTarget& t, VectorXd& x, Index m, Rng& rng, Workspace& ws) {
    if (t.blocks.size(m) != 1) throw UnsupportedError("composite conditionals are sampled for unit blocks only");
    const Index o = t.blocks.offset(m);
    ws.work = x;
    auto logf = [&](double v) {
        ws.work[o] = v;
        return -t.potential_unchecked(ws.work);
    };
    ArsOptions opt;
    opt.scale = 1.0 / std::sqrt(t.block_L[static_cast<std::size_t>(m)]);
    if (t.conditional_mode) opt.mode = t.conditional_mode(x, m);
    const auto r = ars_sample(logf, {x[o] - opt.scale, x[o] + opt.scale}, rng, opt, ws.env);
    x[o] = r.sample;
}

void block_update(const Target& t, VectorXd& x, Index m, Rng& rng, Workspace& ws) {
    if (const auto* g = std::get_if<GaussianTarget<double>>(&t)) gaussian_block_update(*g, x, m, rng);
    else composite_block_update(std::get<CompositeTarget>(t), x, m, rng, ws);
}

void gs_update(const Target& t, ChainState& s, Rng& rng, Workspace& ws) {
    const Index M = blocks_of(t).num_blocks();
    const Index m = static_cast<Index>(rng.uniform_index(static_cast<std::uint64_t>(M)));
    block_update(t, s.x, m, rng, ws);
    s.updated.assign(1, m);
    s.accepted.reset();
    ++s.step;
}

void gs_ell_update(const Target& t, ChainState& s, Index ell, Rng& rng, Workspace& ws) {
    const BlockStructure& blocks = blocks_of(t);
    const Index M = blocks.num_blocks();
    if (ell < 1 || ell > M) throw ConfigError("ell must lie in [1, M]");
    const bool gaussian = std::holds_alternative<GaussianTarget<double>>(t);
    if (ell > 1 && !gaussian) throw UnsupportedError("joint conditional updates need a Gaussian target");
    ws.perm.resize(static_cast<std::size_t>(M));
    for (Index i = 0; i < M; ++i) ws.perm[static_cast<std::size_t>(i)] = i;
    // Partial Fisher-Yates: the first ell entries form a uniform subset. For ell = 1
    // this consumes exactly the draw used by the single-block sampler.
    for (Index i = 0; i < ell; ++i) {
        const Index j = i + static_cast<Index>(rng.uniform_index(static_cast<std::uint64_t>(M - i)));
        std::swap(ws.perm[static_cast<std::size_t>(i)], ws.perm[static_cast<std::size_t>(j)]);
    }
    std::vector<Index> chosen(ws.perm.begin(), ws.perm.begin() + ell);
    if (ell == 1) {
        block_update(t, s.x, chosen[0], rng, ws);
    } else {
        const auto& g = std::get<GaussianTarget<double>>(t);
        const auto cond = gaussian_conditional(g.precision(), g.mean(), blocks, chosen, s.x);
        VectorXd z(cond.mean.size());
        for (Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
        const VectorXd draw = cond.mean + cond.llt.matrixU().solve(z);
        const auto coords = blocks.coordinates(chosen);
        for (std::size_t i = 0; i < coords.size(); ++i) s.x[coords[i]] = draw[static_cast<Index>(i)];
    }
    std::sort(chosen.begin(), chosen.end());
    s.updated = std::move(chosen);
    s.accepted.reset();
    ++s.step;
}

void hr_update(const Target& t, const ConditionNumbers<double>& cn, ChainState& s, Index ell, Rng& rng,
               Workspace& ws) {
    const Index d = s.x.size();
    if (ell < 1 || ell > d) throw ConfigError("ell must lie in [1, d]");
    const bool gaussian = std::holds_alternative<GaussianTarget<double>>(t);
    if (ell > 1 && !gaussian) throw UnsupportedError("Hit-and-Run with ell > 1 needs a Gaussian target");
    const StiefelFrame frame = sample_stiefel_frame(d, ell, rng);
    const MatrixXd& V = frame.columns();
    if (gaussian) {
        const auto& g = std::get<GaussianTarget<double>>(t);
        const MatrixXd QV = g.precision() * V;
        const MatrixXd P = V.transpose() * QV;
        Eigen::LLT<MatrixXd> llt(P);
        if (llt.info() != Eigen::Success) throw NumericalError("restricted precision is singular");
        const VectorXd smean = -llt.solve(QV.transpose() * (s.x - g.mean()));
        VectorXd z(ell);
        for (Index i = 0; i < ell; ++i) z[i] = rng.normal();
        s.x += V * (smean + llt.matrixU().solve(z));
    } else {
        const auto& c = std::get<CompositeTarget>(t);
        const VectorXd v = V.col(0);
        auto logf = [&](double a) {
            ws.work = s.x + a * v;
            return -c.potential_unchecked(ws.work);
        };
        ArsOptions opt;
        opt.scale = 1.0 / std::sqrt((cn.D.array() * v.array().square()).sum());
        const auto r = ars_sample(logf, {-opt.scale, opt.scale}, rng, opt, ws.env);
        s.x += r.sample * v;
    }
    s.updated.clear();
    s.accepted.reset();
    ++s.step;
}

// Minimizer of U along unit block m by bisection on the sign of the partial derivative.
double composite_conditional_mode(const CompositeTarget& t, const VectorXd& x, Index m, Workspace& ws) {
    if (t.conditional_mode) return t.conditional_mode(x, m);
    const Index o = t.blocks.offset(m);
    ws.work = x;
    auto deriv = [&](double v) {
        ws.work[o] = v;
        double g = t.smooth_gradient(ws.work)[o];
        if (!t.separable.empty()) {
            const auto& f = t.separable[static_cast<std::size_t>(m)];
            const double h = 1e-7 * std::max(1.0, std::abs(v));
            g += (f(v + h) - f(v - h)) / (2.0 * h);
        }
        if (!std::isfinite(g)) throw ModeError("non-finite derivative during mode search");
        return g;
    };
    const double step = 1.0 / std::sqrt(t.block_L[static_cast<std::size_t>(m)]);
    double lo = x[o], hi = x[o];
    double glo = deriv(lo);
    if (glo == 0.0) return lo;
    double width = step;
    int expansions = 0;
    if (glo < 0.0) {
        for (;;) {
            hi = lo + width;
            const double g = deriv(hi);
            if (g >= 0.0) break;
            lo = hi;
            width *= 2.0;
            if (++expansions > 60) throw ModeError("mode bracketing failed");
        }
    } else {
        for (;;) {
            lo = hi - width;
            const double g = deriv(lo);
            if (g <= 0.0) break;
            hi = lo;
            width *= 2.0;
            if (++expansions > 60) throw ModeError("mode bracketing failed");
        }
    }
    for (int it = 0; it < 400; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (!(mid > lo && mid < hi)) return mid;
        const double g = deriv(mid);
        if (std::abs(g) <= 1e-10) return mid;
        (g < 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

void mwg_update(const Target& t, const ConditionNumbers<double>& cn, const MwGConfig& cfg, ChainState& s,
                Rng& rng, Workspace& ws) {
    const BlockStructure& blocks = blocks_of(t);
    const Index M = blocks.num_blocks();
    cfg.validate(M);
    if (cfg.proposal == MwGConfig::Proposal::ExactGibbs) {
        gs_update(t, s, rng, ws);
        return;
    }
    const Index m = static_cast<Index>(rng.uniform_index(static_cast<std::uint64_t>(M)));
    const Index o = blocks.offset(m), n = blocks.size(m);
    const double var = cfg.variance(m, cn, blocks);
    const double sd = std::sqrt(var);
    const auto* g = std::get_if<GaussianTarget<double>>(&t);
    const auto* c = std::get_if<CompositeTarget>(&t);
    if (c && n != 1) throw UnsupportedError("composite targets are updated one scalar block at a time");

    const VectorXd xm = s.x.segment(o, n);
    VectorXd center = xm;
    if (cfg.proposal == MwGConfig::Proposal::Independent) {
        if (g) {
            const MatrixXd Qmm = g->precision().block(o, o, n, n);
            const VectorXd h = g->precision().middleRows(o, n) * (s.x - g->mean()) -
                               Qmm * (xm - g->mean().segment(o, n));
            center = g->mean().segment(o, n) - Qmm.llt().solve(h);
        } else {
            center[0] = composite_conditional_mode(*c, s.x, m, ws);
        }
    }
    VectorXd y(n);
    for (Index i = 0; i < n; ++i) y[i] = center[i] + sd * rng.normal();

    double log_proposal_ratio = 0.0;
    if (cfg.proposal == MwGConfig::Proposal::Independent)
        log_proposal_ratio = ((y - center).squaredNorm() - (xm - center).squaredNorm()) / (2.0 * var);

    double dU;
    if (g) {
        const VectorXd delta = y - xm;
        const VectorXd r = g->precision().middleRows(o, n) * (s.x - g->mean());
        dU = delta.dot(r) + 0.5 * delta.dot(g->precision().block(o, o, n, n) * delta);
    } else {
        ws.work = s.x;
        ws.work[o] = y[0];
        dU = c->potential_unchecked(ws.work) - c->potential_unchecked(s.x);
    }
    if (std::isnan(dU)) throw NumericalError("potential difference is NaN");
    const bool acc = mh_accept(-dU, log_proposal_ratio, rng);
    if (acc) s.x.segment(o, n) = y;
    s.updated.assign(1, m);
    s.accepted = acc;
    ++s.step;
}

}  // namespace

StiefelFrame::StiefelFrame(MatrixXd columns) : v_(std::move(columns)) {
    if (v_.cols() < 1 || v_.cols() > v_.rows()) throw DimensionError("frame needs 1 <= ell <= d");
    const MatrixXd G = v_.transpose() * v_;
    if ((G - MatrixXd::Identity(v_.cols(), v_.cols())).cwiseAbs().maxCoeff() > 1e-12)
        throw ConstructionError("frame columns are not orthonormal");
}

StiefelFrame sample_stiefel_frame(Index d, Index ell, Rng& rng) {
    if (d < 1 || ell < 1 || ell > d) throw ConfigError("frame needs 1 <= ell <= d");
    MatrixXd G(d, ell);
    for (Index j = 0; j < ell; ++j)
        for (Index i = 0; i < d; ++i) G(i, j) = rng.normal();
    Eigen::HouseholderQR<MatrixXd> qr(G);
    MatrixXd Qt = qr.householderQ() * MatrixXd::Identity(d, ell);
    const auto& R = qr.matrixQR();
    for (Index j = 0; j < ell; ++j)
        if (R(j, j) < 0.0) Qt.col(j) = -Qt.col(j);
    return StiefelFrame(std::move(Qt));
}

GaussianConditional gaussian_conditional(const MatrixXd& Q, const VectorXd& mean, const BlockStructure& blocks,
                                         std::span<const Index> S, const VectorXd& x) {
    if (Q.rows() != blocks.dim() || Q.cols() != blocks.dim() || mean.size() != blocks.dim() || x.size() != blocks.dim())
        throw DimensionError("gaussian_conditional: dimension mismatch");
    if (S.empty()) throw ConfigError("gaussian_conditional: empty block set");
    const auto in = blocks.coordinates(S);
    const auto out = blocks.complement_coordinates(S);
    GaussianConditional c;
    c.precision = Q(in, in);
    c.llt.compute(c.precision);
    if (c.llt.info() != Eigen::Success) throw NumericalError("gaussian_conditional: singular block");
    c.mean = mean(in);
    if (!out.empty()) {
        const VectorXd r = x(out) - mean(out);
        c.mean -= c.llt.solve(Q(in, out) * r);
    }
    return c;
}

void MwGConfig::validate(Index num_blocks) const {
    if (!step_scales.empty()) {
        if (static_cast<Index>(step_scales.size()) != num_blocks)
            throw ConfigError("MwG: need one proposal variance per block");
        for (double v : step_scales)
            if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError("MwG: proposal variances must be positive");
    }
    if (beta_hint && !(*beta_hint > 0.0 && *beta_hint <= 1.0)) throw ConfigError("MwG: beta must lie in (0, 1]");
}

double MwGConfig::variance(Index m, const ConditionNumbers<double>& cn, const BlockStructure& blocks) const {
    if (!step_scales.empty()) return step_scales[static_cast<std::size_t>(m)];
    const double Lm = cn.block_L.at(static_cast<std::size_t>(m));
    if (proposal == Proposal::RandomWalk) return 1.0 / (Lm * static_cast<double>(blocks.size(m)));
    return 1.0 / Lm;
}

bool mh_accept(double log_target_ratio, double log_proposal_ratio, Rng& rng) {
    const double r = log_target_ratio + log_proposal_ratio;
    if (std::isnan(r)) throw NumericalError("Metropolis ratio is NaN");
    const double u = rng.uniform();
    return std::log(u) < r;
}

ChainState gs_step(const Target& target, const ChainState& state, Rng& rng) {
    check_state(target, state);
    Workspace ws;
    ChainState s = state;
    gs_update(target, s, rng, ws);
    return s;
}

ChainState gs_ell_step(const Target& target, const ChainState& state, Index ell, Rng& rng) {
    check_state(target, state);
    Workspace ws;
    ChainState s = state;
    gs_ell_update(target, s, ell, rng, ws);
    return s;
}

ChainState hr_ell_step(const Target& target, const ChainState& state, Index ell, Rng& rng) {
    check_state(target, state);
    Workspace ws;
    ChainState s = state;
    const ConditionNumbers<double> cn =
        std::holds_alternative<CompositeTarget>(target) ? numbers_for(target) : ConditionNumbers<double>{};
    hr_update(target, cn, s, ell, rng, ws);
    return s;
}

ChainState mwg_step(const Target& target, const ConditionNumbers<double>& cn, const MwGConfig& cfg,
                    const ChainState& state, Rng& rng) {
    check_state(target, state);
    if (static_cast<Index>(cn.block_L.size()) != blocks_of(target).num_blocks())
        throw DimensionError("condition numbers do not match the target blocks");
    Workspace ws;
    ChainState s = state;
    mwg_update(target, cn, cfg, s, rng, ws);
    return s;
}

KernelKind parse_kernel(const std::string& name) {
    if (name == "gs") return KernelKind::GS;
    if (name == "gs-ell") return KernelKind::GSEll;
    if (name == "hr") return KernelKind::HR;
    if (name == "mwg-rwm") return KernelKind::MwGRWM;
    if (name == "mwg-imh") return KernelKind::MwGIMH;
    throw ConfigError("unknown kernel '" + name + "'");
}

std::string kernel_name(KernelKind k) {
    switch (k) {
        case KernelKind::GS: return "gs";
        case KernelKind::GSEll: return "gs-ell";
        case KernelKind::HR: return "hr";
        case KernelKind::MwGRWM: return "mwg-rwm";
        case KernelKind::MwGIMH: return "mwg-imh";
    }
    return "?";
}

ChainRunner::ChainRunner(const Target& target, KernelKind kind, Index ell, MwGConfig cfg)
    : target_(target), kind_(kind), ell_(ell), cfg_(std::move(cfg)) {
    const BlockStructure& blocks = blocks_of(target);
    const bool composite = std::holds_alternative<CompositeTarget>(target);
    if (kind == KernelKind::GSEll) {
        if (ell < 1 || ell > blocks.num_blocks()) throw ConfigError("ell must lie in [1, M]");
        if (ell > 1 && composite) throw UnsupportedError("joint conditional updates need a Gaussian target");
    }
    if (kind == KernelKind::HR) {
        if (ell < 1 || ell > blocks.dim()) throw ConfigError("ell must lie in [1, d]");
        if (ell > 1 && composite) throw UnsupportedError("Hit-and-Run with ell > 1 needs a Gaussian target");
    }
    if (kind == KernelKind::MwGRWM) cfg_.proposal = MwGConfig::Proposal::RandomWalk;
    if (kind == KernelKind::MwGIMH) cfg_.proposal = MwGConfig::Proposal::Independent;
    if (kind == KernelKind::MwGRWM || kind == KernelKind::MwGIMH) cfg_.validate(blocks.num_blocks());
    if (kind == KernelKind::MwGRWM || kind == KernelKind::MwGIMH || (kind == KernelKind::HR && composite))
        cn_ = numbers_for(target);
}

void ChainRunner::step(ChainState& state, Rng& rng) {
    Workspace& ws = ws_;
    switch (kind_) {
        case KernelKind::GS: gs_update(target_, state, rng, ws); break;
        case KernelKind::GSEll: gs_ell_update(target_, state, ell_, rng, ws); break;
        case KernelKind::HR: hr_update(target_, cn_, state, ell_, rng, ws); break;
        case KernelKind::MwGRWM:
        case KernelKind::MwGIMH: mwg_update(target_, cn_, cfg_, state, rng, ws); break;
    }
}

VectorXd default_start(const Target& target) {
    if (const auto* g = std::get_if<GaussianTarget<double>>(&target)) return g->mean();
    const auto& c = std::get<CompositeTarget>(target);
    return c.mode.size() == c.dim() ? c.mode : VectorXd::Zero(c.dim());
}

std::string format_double(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, r.ptr);
}

void write_chain_header(std::ostream& os, Index d) {
    os << "step,block_or_frame_id";
    for (Index i = 1; i <= d; ++i) os << ",x_" << i;
    os << ",accepted\n";
}

void write_chain_row(std::ostream& os, const ChainState& state, KernelKind kind) {
    os << state.step << ',';
    if (kind == KernelKind::HR) {
        os << state.step;
    } else {
        for (std::size_t i = 0; i < state.updated.size(); ++i) os << (i ? ";" : "") << state.updated[i] + 1;
    }
    for (Index i = 0; i < state.x.size(); ++i) os << ',' << format_double(state.x[i]);
    os << ',';
    if (state.accepted) os << (*state.accepted ? 1 : 0);
    os << '\n';
}

}  // namespace lcgibbs
