#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

namespace hedonic::cli {

/// Process exit codes.
enum ExitCode : int {
  kOk = 0,
  kUsage = 1,               // bad arguments, config or input files
  kVerificationFailed = 2,
  kGridAbort = 3,           // too many maximizers on the quality-grid boundary
  kTwistRefusal = 4,
};

struct RunOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;  // overrides the config
  std::optional<std::string> out_dir; // overrides the config; default "out"
  std::optional<int> threads;         // overrides the config
};

int cmd_simulate(const RunOptions& options, std::ostream& out, std::ostream& err);
int cmd_identify(const RunOptions& options, std::ostream& out, std::ostream& err);
int cmd_transport(const RunOptions& options, std::ostream& out, std::ostream& err);
int cmd_conjugate(const RunOptions& options, std::ostream& out, std::ostream& err);
int cmd_check(const RunOptions& options, std::ostream& out, std::ostream& err);

/// Parses argv and dispatches to a command.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace hedonic::cli
