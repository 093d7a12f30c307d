#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace reporeview {

struct ProcessResult {
  int exit_code = -1;
  std::string out;
  std::string err;

  bool ok() const noexcept { return exit_code == 0; }
};

/// Runs argv[0] from PATH without a shell and captures both output streams.
/// Throws std::system_error if the process cannot be started.
ProcessResult run_process(const std::vector<std::string>& argv,
                          const std::optional<std::filesystem::path>& cwd = std::nullopt,
                          const std::vector<std::pair<std::string, std::string>>& extra_env = {});

}  // namespace reporeview
