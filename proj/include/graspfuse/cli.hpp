#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace graspfuse::cli {

inline constexpr const char* kToolVersion = "1.0.0";

/// Runs one pipeline stage. `args` excludes the program name, e.g.
/// {"segment", "--out", "work", "--k", "3"}. Returns the process exit code;
/// diagnostics and usage go to `err`, progress to `out`.
///
/// Every stage reads the artifacts of earlier stages from the work directory
/// given by --out and writes its own subdirectory plus a run_manifest.json.
int run_subcommand(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// The stages in pipeline order.
const std::vector<std::string>& stage_names();

}  // namespace graspfuse::cli
