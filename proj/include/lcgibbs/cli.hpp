#pragma once

#include <ostream>

namespace lcgibbs {

enum ExitCode : int { kExitOk = 0, kExitChecksFailed = 1, kExitConfig = 2, kExitNumerical = 3 };

/**
 *   sample --target FILE [--kernel gs|gs-ell|hr|mwg-rwm|mwg-imh] [--ell L] [--steps N]
 *          [--seed S] [--replicas R] [--out PATH|-]
 *   verify SUITE [--dim D] [--trials T] [--seed S] [...] [--out PATH|-]
 *
 * CSV goes to `out` when the output path is "-". Diagnostics and, in that
 * case, the human-readable summary go to `err`.
 */
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace lcgibbs
