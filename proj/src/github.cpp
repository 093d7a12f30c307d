#include "reporeview/github.hpp"

#include <algorithm>
#include <cstdlib>

#include <fmt/format.h>
#include <httplib.h>
#include <nlohmann/json.hpp>

namespace reporeview {

using json = nlohmann::json;

std::string_view to_string(GithubErrorKind k) {
  switch (k) {
    case GithubErrorKind::not_found: return "not_found";
    case GithubErrorKind::rate_limited: return "rate_limited";
    case GithubErrorKind::network: return "network";
    case GithubErrorKind::auth: return "auth";
    case GithubErrorKind::invalid_response: return "invalid_response";
  }
  return "unknown";
}

bool is_commit_sha(std::string_view s) {
  return s.size() == 40 &&
         std::all_of(s.begin(), s.end(), [](char c) { return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'); });
}

HttpGithubConfig HttpGithubConfig::from_env() {
  HttpGithubConfig c;
  if (const char* token = std::getenv("GITHUB_TOKEN"); token != nullptr) c.token = token;
  if (const char* base = std::getenv("GITHUB_API_URL"); base != nullptr && *base != '\0') c.api_base = base;
  return c;
}

HttpGithubClient::HttpGithubClient(HttpGithubConfig config) : config_(std::move(config)) {
  while (!config_.api_base.empty() && config_.api_base.back() == '/') config_.api_base.pop_back();
}

namespace {

std::optional<std::chrono::seconds> rate_limit_wait(const httplib::Response& res) {
  if (res.has_header("Retry-After")) {
    try {
      return std::chrono::seconds{std::stoll(res.get_header_value("Retry-After"))};
    } catch (const std::exception&) {
    }
  }
  if (res.has_header("X-RateLimit-Reset")) {
    try {
      const auto reset = std::stoll(res.get_header_value("X-RateLimit-Reset"));
      const auto now = std::chrono::duration_cast<std::chrono::seconds>(
                           std::chrono::system_clock::now().time_since_epoch())
                           .count();
      return std::chrono::seconds{std::max<long long>(0, reset - now)};
    } catch (const std::exception&) {
    }
  }
  return std::nullopt;
}

json get_json(httplib::Client& client, const std::string& path, const httplib::Headers& headers,
              const std::string& what) {
  auto res = client.Get(path, headers);
  if (!res) {
    throw GithubError(GithubErrorKind::network, fmt::format("GitHub request for {} failed: {}", what,
                                                            httplib::to_string(res.error())));
  }
  const int status = res->status;
  if (status == 404) throw GithubError(GithubErrorKind::not_found, fmt::format("{} not found (HTTP 404)", what));
  if (status == 429 || (status == 403 && res->get_header_value("X-RateLimit-Remaining") == "0")) {
    auto wait = rate_limit_wait(*res);
    throw GithubError(GithubErrorKind::rate_limited,
                      wait ? fmt::format("GitHub rate limit reached while fetching {}; retry after {}s", what, wait->count())
                           : fmt::format("GitHub rate limit reached while fetching {}", what),
                      wait);
  }
  if (status == 401 || status == 403) {
    throw GithubError(GithubErrorKind::auth, fmt::format("GitHub denied access to {} (HTTP {})", what, status));
  }
  if (status != 200) {
    throw GithubError(GithubErrorKind::invalid_response, fmt::format("unexpected HTTP {} fetching {}", status, what));
  }
  json body = json::parse(res->body, nullptr, false);
  if (body.is_discarded()) {
    throw GithubError(GithubErrorKind::invalid_response, fmt::format("GitHub returned invalid JSON for {}", what));
  }
  return body;
}

}  // namespace

PrMetadata HttpGithubClient::pull_request(const std::string& owner, const std::string& name, int number) {
  httplib::Client client(config_.api_base);
  client.set_connection_timeout(std::chrono::seconds{10});
  client.set_read_timeout(config_.timeout);
  httplib::Headers headers{{"Accept", "application/vnd.github+json"},
                           {"User-Agent", "reporeviewer"},
                           {"X-GitHub-Api-Version", "2022-11-28"}};
  if (!config_.token.empty()) headers.emplace("Authorization", "Bearer " + config_.token);

  const std::string what = fmt::format("pull request {}/{}#{}", owner, name, number);
  const std::string base = fmt::format("/repos/{}/{}/pulls/{}", owner, name, number);
  const json pr = get_json(client, base, headers, what);

  PrMetadata meta;
  meta.number = number;
  try {
    meta.head_ref = pr.at("head").at("ref").get<std::string>();
    meta.head_sha = pr.at("head").at("sha").get<std::string>();
  } catch (const json::exception&) {
    throw GithubError(GithubErrorKind::invalid_response, what + " response lacks head.ref/head.sha");
  }
  if (!is_commit_sha(meta.head_sha)) {
    throw GithubError(GithubErrorKind::invalid_response, what + " has a malformed head sha '" + meta.head_sha + "'");
  }

  // The file list is optional: without it the whole tree at the PR head is reviewed.
  try {
    std::vector<std::string> files;
    for (int page = 1;; ++page) {
      const json batch = get_json(client, fmt::format("{}/files?per_page=100&page={}", base, page), headers,
                                  what + " files");
      if (!batch.is_array()) throw GithubError(GithubErrorKind::invalid_response, what + " files is not an array");
      for (const auto& f : batch) files.push_back(f.at("filename").get<std::string>());
      if (batch.size() < 100) break;
    }
    meta.changed_files = std::move(files);
  } catch (const GithubError&) {
    meta.changed_files.reset();
  } catch (const json::exception&) {
    meta.changed_files.reset();
  }
  return meta;
}

void StubGithubClient::add(const std::string& owner, const std::string& name, PrMetadata meta) {
  std::lock_guard lock(mu_);
  const int number = meta.number;
  entries_.insert_or_assign(std::tuple{owner, name, number}, std::move(meta));
}

void StubGithubClient::fail(const std::string& owner, const std::string& name, int number, GithubError error) {
  std::lock_guard lock(mu_);
  entries_.insert_or_assign(std::tuple{owner, name, number}, std::move(error));
}

PrMetadata StubGithubClient::pull_request(const std::string& owner, const std::string& name, int number) {
  std::lock_guard lock(mu_);
  ++calls_;
  auto it = entries_.find(std::tuple{owner, name, number});
  if (it == entries_.end()) {
    throw GithubError(GithubErrorKind::not_found,
                      fmt::format("pull request {}/{}#{} not found (HTTP 404)", owner, name, number));
  }
  if (const auto* err = std::get_if<GithubError>(&it->second)) throw *err;
  return std::get<PrMetadata>(it->second);
}

std::size_t StubGithubClient::calls() const {
  std::lock_guard lock(mu_);
  return calls_;
}

PrMetadata fetch_pr_metadata(const RepoSource& source, GithubClient& github) {
  if (!source.pr_number || *source.pr_number <= 0) {
    throw std::invalid_argument(fmt::format("fetch_pr_metadata requires a positive PR number for {}/{}",
                                            source.owner, source.name));
  }
  PrMetadata meta = github.pull_request(source.owner, source.name, *source.pr_number);
  if (!is_commit_sha(meta.head_sha)) {
    throw GithubError(GithubErrorKind::invalid_response,
                      fmt::format("pull request {} has a malformed head sha", source.display_name()));
  }
  return meta;
}

}  // namespace reporeview
