#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace lhc {

/// Exit codes of the command-line tools.
enum class ExitCode : int { Ok = 0, Usage = 2, Io = 3, Validation = 4, TrainingFailure = 5 };

/// Runs `lhc <subcommand> ...` with args[0] being the program name. Errors are
/// reported as one line on `err`:
///   error: code=<Usage|Io|Validation|TrainingFailure> message="..."
int run_cli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

/// `lhc-convert`: CSV feature table to dataset file.
int run_convert(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

} // namespace lhc
