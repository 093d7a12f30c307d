#pragma once

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "reporeview/orchestrator.hpp"
#include "reporeview/provider.hpp"

namespace reporeview::testing {

namespace fs = std::filesystem;

fs::path source_dir();
fs::path fixture_path(const std::string& relative);

class TempDir {
 public:
  explicit TempDir(const std::string& prefix = "rr-test");
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const noexcept { return path_; }
  fs::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  fs::path path_;
};

std::string read_file(const fs::path& path);
void write_file(const fs::path& path, std::string_view bytes);

/// Every regular file under `dir` (relative path -> bytes).
std::map<std::string, std::string> read_tree(const fs::path& dir);

/// Initializes `dir` as a git repository and commits `files` with a fixed author and
/// date. Returns the commit sha.
std::string make_git_repo(const fs::path& dir, const std::map<std::string, std::string>& files);
/// Commits more files on a new branch without moving the current checkout's branch, and
/// stores the commit as refs/pull/{pr}/head. Returns the commit sha.
std::string add_pull_ref(const fs::path& dir, int pr, const std::map<std::string, std::string>& files);

/// A directory of git remotes served as `file://{base}/{owner}/{name}`.
class RemoteFarm {
 public:
  RemoteFarm();
  std::string add(const std::string& owner, const std::string& name, const std::map<std::string, std::string>& files);
  std::string add_fixture(const std::string& owner, const std::string& name, const std::string& fixture_dir);
  std::string remote_base() const;
  fs::path repo_dir(const std::string& owner, const std::string& name) const;

 private:
  TempDir dir_;
};

/// Deterministic stand-in for a model. It recognizes each agent by its system prompt:
/// strcpy lines are high severity (plus a near-duplicate medium report), eval lines are
/// critical, TODO lines low and an extensionless README gets an info finding on line 1.
class ScriptedProvider final : public Provider {
 public:
  ModelResponse complete(const ModelRequest& request) override;

  std::uint64_t calls() const noexcept { return calls_; }
  std::vector<ModelRequest> requests() const;

 private:
  std::atomic<std::uint64_t> calls_{0};
  mutable std::mutex mu_;
  std::vector<ModelRequest> requests_;
};

/// Fails every call with the given error kind.
class FailingProvider final : public Provider {
 public:
  explicit FailingProvider(ProviderErrorKind kind = ProviderErrorKind::server) : kind_(kind) {}
  ModelResponse complete(const ModelRequest& request) override;
  std::uint64_t calls() const noexcept { return calls_; }

 private:
  ProviderErrorKind kind_;
  std::atomic<std::uint64_t> calls_{0};
};

/// The scripted answer for a review of `path` whose numbered listing is `listing`.
std::string scripted_findings_json(const std::string& path, const std::string& listing);

/// Run deps wired for offline tests: fixed clock at 2024-01-01T00:00:00Z, virtual sleeper,
/// stub GitHub client, job id "job-1" and the given provider.
RunDeps offline_deps(const RemoteFarm& farm, std::shared_ptr<Provider> provider, const fs::path& work);

inline constexpr std::int64_t kFixedEpoch = 1704067200;

}  // namespace reporeview::testing
