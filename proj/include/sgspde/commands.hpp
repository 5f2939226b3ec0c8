#pragma once

#include <filesystem>
#include <optional>
#include <ostream>

#include "sgspde/runconfig.hpp"

namespace sgspde {

enum ExitCode { kExitOk = 0, kExitError = 1, kExitViolation = 2 };

struct CommandContext {
  RunConfig config;
  std::optional<std::filesystem::path> out;  // no files written when empty
  int threads = 0;
};

// Compatibility integrals for exponents m-1, m-l, 0 with a verdict each; exit 2 when the hypothesis that applies to
// the root classification fails.
int cmd_check_noise(const CommandContext& ctx, std::ostream& report);
// One Picard solve: u snapshots, norm series and iteration differences.
int cmd_solve(const CommandContext& ctx, std::ostream& report);
// Ensemble moments: mean and variance snapshots and a statistics table.
int cmd_mc(const CommandContext& ctx, std::ostream& report);
// GO propagator against the reference stepper with group and inverse residuals.
int cmd_propagator_test(const CommandContext& ctx, std::ostream& report);
int cmd_classify(const CommandContext& ctx, std::ostream& report);

// Full command line: subcommand plus --config, --preset, --seed, --out, --paths, --grid, --threads.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace sgspde
