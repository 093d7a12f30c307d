#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "reporeview/github.hpp"
#include "reporeview/model.hpp"

namespace reporeview {

struct Workspace {
  std::filesystem::path root;
  std::string head_commit;
  RepoSource source;
  std::optional<std::vector<std::string>> pr_changed_files;
};

class CloneError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CloneOptions {
  /// Clone URL is "{remote_base}/{owner}/{name}". Point it at a file:// directory to
  /// review local fixture remotes.
  std::string remote_base = "https://github.com";
  /// Makes the workspace directory name unique per job.
  std::string job_id = "local";
};

std::string remote_url_for(const RepoSource& source, const std::string& remote_base);

/// Whole-repository mode makes a depth-1 clone of the default branch. PR mode resolves
/// the PR head through `github`, fetches that commit and checks it out detached.
Workspace clone_repository(const RepoSource& source, const std::filesystem::path& dest_parent,
                           GithubClient& github, const CloneOptions& options = {});

/// keep=false removes the workspace; keep=true leaves it in place and logs its path.
/// Returns false (after logging) if deletion failed. Safe to call more than once.
bool cleanup_workspace(const Workspace& ws, bool keep);

}  // namespace reporeview
