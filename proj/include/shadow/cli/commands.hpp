#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include <json.hpp>

#include "shadow/cli/config.hpp"
#include "shadow/errors.hpp"

namespace shadow::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitInvalidConfig = 2,
  kExitNumerical = 3,
};

struct CommandOptions {
  bool dry_run = false;
  bool self_test = false;  // converge only: synthetic power-law check, no config needed
};

/// JSON payload printed on stderr when a run exits with kExitNumerical.
[[nodiscard]] nlohmann::ordered_json numerical_diagnostic(const NumericalError& error);

/// Derived grid sizes (K, N, step counts) without computing anything. Independent of output_dir.
[[nodiscard]] nlohmann::ordered_json describe(const RunConfig& config);

/// Each command writes into resolve_output_dir(config) and a one-line report to `out`.
void cmd_run(const RunConfig& config, std::ostream& out, std::ostream& err);
void cmd_lyapunov(const RunConfig& config, std::ostream& out, std::ostream& err);
void cmd_converge(const RunConfig& config, std::ostream& out, std::ostream& err);
void cmd_oracle(const RunConfig& config, std::ostream& out, std::ostream& err);

/// Synthetic slope-fit check; returns true when both power laws are recovered to 1e-12.
bool converge_self_test(std::ostream& out);

/// Loads the config (unless self-testing), dispatches and maps exceptions to exit codes.
int run_command(const std::string& command, const std::filesystem::path& config_path, const CommandOptions& options,
                std::ostream& out, std::ostream& err);

}  // namespace shadow::cli
