#pragma once

// Subcommands behind the command-line tool. Each reads a validated config,
// writes its report files into an output directory and returns an exit code:
// 0 computed / all checks passed, 2 some statistical check failed.
// Operational problems surface as exceptions (the tool maps them to 1).

#include <string>
#include <vector>

#include "coupconc/config.hpp"

namespace coupconc {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitFail = 2;

struct CommandResult {
  int exit_code = kExitOk;
  std::vector<std::string> files;  // written paths
};

const std::vector<std::string>& command_names();

/// Throws ConfigError for invalid configs, PreconditionError for an unknown
/// command, and any module error raised while computing.
CommandResult run_command(const std::string& command, const Config& config,
                          const std::string& out_dir);

}  // namespace coupconc
