#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "lcgibbs/ars.hpp"
#include "lcgibbs/errors.hpp"
#include "lcgibbs/rng.hpp"
#include "lcgibbs/targets.hpp"

namespace lcgibbs {

struct ChainState {
    VectorXd x;
    std::uint64_t step = 0;
    /// Identity of the RNG substream driving this chain.
    std::uint64_t stream = 0;
    /// Blocks (0-based) touched by the last step; empty for Hit-and-Run.
    std::vector<Index> updated;
    /// Set by Metropolis updates only.
    std::optional<bool> accepted;
};

/// d x l matrix with orthonormal columns.
class StiefelFrame {
public:
    explicit StiefelFrame(MatrixXd columns);
    Index dim() const { return v_.rows(); }
    Index ell() const { return v_.cols(); }
    const MatrixXd& columns() const { return v_; }

private:
    MatrixXd v_;
};

/// Haar-distributed frame: QR of a d x l standard normal matrix, signs fixed so that R has positive diagonal.
StiefelFrame sample_stiefel_frame(Index d, Index ell, Rng& rng);

struct GaussianConditional {
    VectorXd mean;
    MatrixXd precision;
    Eigen::LLT<MatrixXd> llt;
};

/// Law of x_S given x_{-S} under N(mean, Q^{-1}); `x` supplies the conditioning values.
GaussianConditional gaussian_conditional(const MatrixXd& Q, const VectorXd& mean, const BlockStructure& blocks,
                                         std::span<const Index> S, const VectorXd& x);

struct MwGConfig {
    enum class Proposal { RandomWalk, Independent, ExactGibbs };
    Proposal proposal = Proposal::Independent;
    std::optional<double> beta_hint;
    /// Per-block proposal variances. Empty selects 1/(L_m d_m) for random walk and 1/L_m for independence proposals.
    std::vector<double> step_scales;

    void validate(Index num_blocks) const;
    double variance(Index m, const ConditionNumbers<double>& cn, const BlockStructure& blocks) const;
};

/// Accepts with probability min(1, exp(log_target_ratio + log_proposal_ratio)); always consumes one uniform.
bool mh_accept(double log_target_ratio, double log_proposal_ratio, Rng& rng);

ChainState gs_step(const Target& target, const ChainState& state, Rng& rng);
ChainState gs_ell_step(const Target& target, const ChainState& state, Index ell, Rng& rng);
ChainState hr_ell_step(const Target& target, const ChainState& state, Index ell, Rng& rng);
ChainState mwg_step(const Target& target, const ConditionNumbers<double>& cn, const MwGConfig& cfg,
                    const ChainState& state, Rng& rng);

enum class KernelKind { GS, GSEll, HR, MwGRWM, MwGIMH };

namespace detail {
struct SamplerWorkspace {
    VectorXd work;
    Envelope env;
    std::vector<Index> perm;
};
}  // namespace detail

KernelKind parse_kernel(const std::string& name);
std::string kernel_name(KernelKind k);

/**
 * Runs a chain in place, reusing buffers between steps. Each step produces
 * the same state and consumes the same random numbers as the corresponding
 * single-step function.
 */
class ChainRunner {
public:
    ChainRunner(const Target& target, KernelKind kind, Index ell = 1, MwGConfig cfg = {});
    void step(ChainState& state, Rng& rng);
    const Target& target() const { return target_; }
    KernelKind kind() const { return kind_; }

private:
    const Target& target_;
    KernelKind kind_;
    Index ell_;
    MwGConfig cfg_;
    ConditionNumbers<double> cn_;
    detail::SamplerWorkspace ws_;
};

/// Initial point used by the command-line sampler: the mean for Gaussians, the mode or zero otherwise.
VectorXd default_start(const Target& target);

void write_chain_header(std::ostream& os, Index d);
/// One CSV row: step, block_or_frame_id, x_1..x_d, accepted (blank for exact kernels).
void write_chain_row(std::ostream& os, const ChainState& state, KernelKind kind);

/// Shortest decimal text that round-trips to the same double.
std::string format_double(double v);

}  // namespace lcgibbs
