#pragma once

#include <chrono>
#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <tuple>
#include <variant>
#include <vector>

#include "reporeview/model.hpp"

namespace reporeview {

struct PrMetadata {
  int number = 0;
  std::string head_ref;
  std::string head_sha;
  /// Absent when the PR file list could not be retrieved.
  std::optional<std::vector<std::string>> changed_files;

  bool operator==(const PrMetadata&) const = default;
};

enum class GithubErrorKind : std::uint8_t { not_found, rate_limited, network, auth, invalid_response };

std::string_view to_string(GithubErrorKind k);

class GithubError : public std::runtime_error {
 public:
  GithubError(GithubErrorKind kind, const std::string& message,
              std::optional<std::chrono::seconds> retry_after = std::nullopt)
      : std::runtime_error(message), kind_(kind), retry_after_(retry_after) {}

  GithubErrorKind kind() const noexcept { return kind_; }
  std::optional<std::chrono::seconds> retry_after() const noexcept { return retry_after_; }

 private:
  GithubErrorKind kind_;
  std::optional<std::chrono::seconds> retry_after_;
};

/// Pull-request metadata source. Implementations must tolerate concurrent calls.
class GithubClient {
 public:
  virtual ~GithubClient() = default;
  virtual PrMetadata pull_request(const std::string& owner, const std::string& name, int number) = 0;
};

struct HttpGithubConfig {
  std::string api_base = "https://api.github.com";
  /// Sent as a bearer token when nonempty; defaults to $GITHUB_TOKEN.
  std::string token;
  std::chrono::seconds timeout{30};

  static HttpGithubConfig from_env();
};

/// REST client for `GET /repos/{owner}/{repo}/pulls/{n}` and its paginated files list.
class HttpGithubClient final : public GithubClient {
 public:
  explicit HttpGithubClient(HttpGithubConfig config = HttpGithubConfig::from_env());
  PrMetadata pull_request(const std::string& owner, const std::string& name, int number) override;

 private:
  HttpGithubConfig config_;
};

/// Canned answers for tests. Unknown PRs raise not_found.
class StubGithubClient final : public GithubClient {
 public:
  void add(const std::string& owner, const std::string& name, PrMetadata meta);
  void fail(const std::string& owner, const std::string& name, int number, GithubError error);

  PrMetadata pull_request(const std::string& owner, const std::string& name, int number) override;
  std::size_t calls() const;

 private:
  mutable std::mutex mu_;
  std::map<std::tuple<std::string, std::string, int>, std::variant<PrMetadata, GithubError>> entries_;
  std::size_t calls_ = 0;
};

/// Rejects a missing or non-positive PR number before any client call.
PrMetadata fetch_pr_metadata(const RepoSource& source, GithubClient& github);

bool is_commit_sha(std::string_view s);

}  // namespace reporeview
