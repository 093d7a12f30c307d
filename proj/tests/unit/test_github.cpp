#include <doctest.h>

#include <thread>

#include <fmt/format.h>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "reporeview/github.hpp"

using namespace reporeview;
using json = nlohmann::json;

namespace {

const std::string kSha(40, 'a');

// Serves /repos/acme/greet/pulls/{n} and its paginated files list.
struct FakeGithub {
  httplib::Server server;
  std::thread thread;
  int port = 0;
  std::mutex mu;
  std::vector<httplib::Request> seen;
  int files_total = 3;
  int pull_status = 200;
  int files_status = 200;
  httplib::Headers extra;

  FakeGithub() {
    server.Get(R"(/repos/acme/greet/pulls/(\d+))", [this](const httplib::Request& req, httplib::Response& res) {
      record(req);
      res.status = pull_status;
      for (const auto& [k, v] : extra) res.set_header(k, v);
      res.set_content(json{{"number", std::stoi(req.matches[1])}, {"head", {{"ref", "feature"}, {"sha", kSha}}}}.dump(),
                      "application/json");
    });
    server.Get(R"(/repos/acme/greet/pulls/(\d+)/files)", [this](const httplib::Request& req, httplib::Response& res) {
      record(req);
      res.status = files_status;
      const int page = std::stoi(req.get_param_value("page"));
      const int per_page = std::stoi(req.get_param_value("per_page"));
      json batch = json::array();
      for (int i = (page - 1) * per_page; i < std::min(files_total, page * per_page); ++i) {
        batch.push_back({{"filename", fmt::format("src/f{}.c", i)}});
      }
      res.set_content(batch.dump(), "application/json");
    });
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~FakeGithub() {
    server.stop();
    thread.join();
  }
  void record(const httplib::Request& req) {
    std::lock_guard lock(mu);
    seen.push_back(req);
  }
  HttpGithubClient client(std::string token = "") const {
    return HttpGithubClient({fmt::format("http://127.0.0.1:{}", port), std::move(token), std::chrono::seconds{5}});
  }
};

GithubErrorKind kind_of(GithubClient& c, int pr = 1) {
  try {
    c.pull_request("acme", "greet", pr);
  } catch (const GithubError& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return GithubErrorKind::invalid_response;
}

}  // namespace

TEST_CASE("commit sha shape") {
  CHECK(is_commit_sha(kSha));
  CHECK_FALSE(is_commit_sha(std::string(40, 'A')));
  CHECK_FALSE(is_commit_sha(std::string(39, 'a')));
  CHECK_FALSE(is_commit_sha(std::string(40, 'g')));
}

TEST_CASE("stub client answers and fails as configured") {
  StubGithubClient stub;
  stub.add("a", "b", PrMetadata{7, "topic", kSha, std::vector<std::string>{"src/x.c"}});
  const auto meta = fetch_pr_metadata(parse_repo_url("https://github.com/a/b/pull/7"), stub);
  CHECK(meta.head_sha == kSha);
  CHECK(meta.changed_files == std::vector<std::string>{"src/x.c"});

  try {
    fetch_pr_metadata(parse_repo_url("https://github.com/a/b/pull/8"), stub);
    FAIL("expected not found");
  } catch (const GithubError& e) {
    CHECK(e.kind() == GithubErrorKind::not_found);
    CHECK(std::string(e.what()).find("a/b#8") != std::string::npos);
  }

  stub.fail("a", "b", 9, GithubError(GithubErrorKind::rate_limited, "slow down", std::chrono::seconds{30}));
  try {
    fetch_pr_metadata(parse_repo_url("https://github.com/a/b/pull/9"), stub);
    FAIL("expected rate limit");
  } catch (const GithubError& e) {
    CHECK(e.kind() == GithubErrorKind::rate_limited);
    CHECK(e.retry_after() == std::chrono::seconds{30});
  }
}

TEST_CASE("missing or zero PR number is rejected before any call") {
  StubGithubClient stub;
  auto src = parse_repo_url("https://github.com/a/b");
  CHECK_THROWS_AS(fetch_pr_metadata(src, stub), std::invalid_argument);
  src.pr_number = 0;
  CHECK_THROWS_AS(fetch_pr_metadata(src, stub), std::invalid_argument);
  CHECK(stub.calls() == 0);
}

TEST_CASE("http client reads head and paginated files") {
  FakeGithub gh;
  gh.files_total = 230;
  auto client = gh.client("tok");
  const auto meta = client.pull_request("acme", "greet", 5);
  CHECK(meta.number == 5);
  CHECK(meta.head_ref == "feature");
  CHECK(meta.head_sha == kSha);
  REQUIRE(meta.changed_files.has_value());
  CHECK(meta.changed_files->size() == 230);
  CHECK(meta.changed_files->back() == "src/f229.c");
  std::lock_guard lock(gh.mu);
  CHECK(gh.seen.size() == 4);
  CHECK(gh.seen[0].get_header_value("Authorization") == "Bearer tok");
  CHECK(gh.seen[1].get_param_value("per_page") == "100");
}

TEST_CASE("http client without a token sends no authorization") {
  FakeGithub gh;
  auto client = gh.client();
  client.pull_request("acme", "greet", 1);
  std::lock_guard lock(gh.mu);
  CHECK_FALSE(gh.seen[0].has_header("Authorization"));
}

TEST_CASE("an unreadable file list leaves changed_files absent") {
  FakeGithub gh;
  gh.files_status = 500;
  auto client = gh.client();
  const auto meta = client.pull_request("acme", "greet", 1);
  CHECK(meta.head_sha == kSha);
  CHECK_FALSE(meta.changed_files.has_value());
}

TEST_CASE("http status mapping") {
  FakeGithub gh;
  auto client = gh.client();
  gh.pull_status = 404;
  CHECK(kind_of(client) == GithubErrorKind::not_found);
  gh.pull_status = 401;
  CHECK(kind_of(client) == GithubErrorKind::auth);
  gh.pull_status = 403;
  CHECK(kind_of(client) == GithubErrorKind::auth);
  gh.extra = {{"X-RateLimit-Remaining", "0"}, {"Retry-After", "12"}};
  try {
    client.pull_request("acme", "greet", 1);
    FAIL("expected rate limit");
  } catch (const GithubError& e) {
    CHECK(e.kind() == GithubErrorKind::rate_limited);
    CHECK(e.retry_after() == std::chrono::seconds{12});
  }
  gh.extra.clear();
  gh.pull_status = 429;
  CHECK(kind_of(client) == GithubErrorKind::rate_limited);
  gh.pull_status = 502;
  CHECK(kind_of(client) == GithubErrorKind::invalid_response);
}

TEST_CASE("unknown repository path is not found") {
  FakeGithub gh;
  auto client = gh.client();
  try {
    client.pull_request("other", "repo", 1);
    FAIL("expected not found");
  } catch (const GithubError& e) {
    CHECK(e.kind() == GithubErrorKind::not_found);
  }
}
