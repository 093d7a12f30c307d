#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "reporeview/model.hpp"

namespace reporeview {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Entry point of the `reporeviewer` command. `args` excludes the program name.
/// Artifact paths go to `out`, progress and diagnostics to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// "[2/6] context: completed" style progress line for `event` within the plan of `mode`.
std::string progress_line(const ProgressEvent& event, ReviewMode mode);

}  // namespace reporeview
