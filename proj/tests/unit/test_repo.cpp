#include <doctest.h>

#include <future>
#include <set>

#include "reporeview/process.hpp"
#include "reporeview/repo.hpp"
#include "reporeview/text.hpp"
#include "support.hpp"

using namespace reporeview;
using namespace reporeview::testing;

namespace {

// Independent read of a repository's HEAD.
std::string git_head(const fs::path& dir) {
  const auto r = run_process({"git", "-C", dir.string(), "rev-parse", "HEAD"});
  REQUIRE(r.ok());
  return trim(r.out);
}

}  // namespace

TEST_CASE("remote url joins base, owner and name") {
  const auto src = parse_repo_url("https://github.com/a/b");
  CHECK(remote_url_for(src, "https://github.com") == "https://github.com/a/b");
  CHECK(remote_url_for(src, "file:///tmp/r/") == "file:///tmp/r/a/b");
}

TEST_CASE("whole-repository clone checks out the remote head") {
  RemoteFarm farm;
  farm.add("acme", "one", {{"README.md", "hi\n"}, {"src/a.c", "int x;\n"}});
  const auto expected = git_head(farm.repo_dir("acme", "one"));
  TempDir parent;
  StubGithubClient gh;
  const auto ws = clone_repository(parse_repo_url("https://github.com/acme/one"), parent.path(), gh,
                                   {farm.remote_base(), "j1"});
  CHECK(ws.head_commit == expected);
  CHECK(git_head(ws.root) == expected);
  CHECK(ws.root.is_absolute());
  CHECK(ws.root.parent_path() == fs::absolute(parent.path()));
  CHECK(read_file(ws.root / "src/a.c") == "int x;\n");
  CHECK_FALSE(ws.pr_changed_files.has_value());
  CHECK(gh.calls() == 0);
  // depth 1
  const auto count = run_process({"git", "-C", ws.root.string(), "rev-list", "--count", "HEAD"});
  CHECK(trim(count.out) == "1");
}

TEST_CASE("PR mode checks out the PR head") {
  RemoteFarm farm;
  farm.add("acme", "two", {{"a.c", "base\n"}});
  const auto head = add_pull_ref(farm.repo_dir("acme", "two"), 3, {{"a.c", "changed\n"}, {"b.c", "new\n"}});
  StubGithubClient gh;
  gh.add("acme", "two", PrMetadata{3, "pr-3", head, std::vector<std::string>{"a.c", "b.c"}});
  TempDir parent;
  const auto ws = clone_repository(parse_repo_url("https://github.com/acme/two/pull/3"), parent.path(), gh,
                                   {farm.remote_base(), "j2"});
  CHECK(ws.head_commit == head);
  CHECK(git_head(ws.root) == head);
  CHECK(read_file(ws.root / "a.c") == "changed\n");
  CHECK(ws.pr_changed_files == std::vector<std::string>{"a.c", "b.c"});
}

TEST_CASE("PR mode without a file list still clones") {
  RemoteFarm farm;
  farm.add("acme", "two", {{"a.c", "base\n"}});
  const auto head = add_pull_ref(farm.repo_dir("acme", "two"), 4, {{"c.c", "x\n"}});
  StubGithubClient gh;
  gh.add("acme", "two", PrMetadata{4, "pr-4", head, std::nullopt});
  TempDir parent;
  const auto ws = clone_repository(parse_repo_url("https://github.com/acme/two/pull/4"), parent.path(), gh,
                                   {farm.remote_base(), "j"});
  CHECK(ws.head_commit == head);
  CHECK_FALSE(ws.pr_changed_files.has_value());
}

TEST_CASE("clone failures") {
  RemoteFarm farm;
  farm.add("acme", "two", {{"a.c", "base\n"}});
  TempDir parent;
  StubGithubClient gh;
  CHECK_THROWS_AS(clone_repository(parse_repo_url("https://github.com/acme/none"), parent.path(), gh,
                                   {farm.remote_base(), "j"}),
                  CloneError);
  // A sha the remote does not have.
  gh.add("acme", "two", PrMetadata{5, "x", std::string(40, 'b'), std::nullopt});
  CHECK_THROWS_AS(clone_repository(parse_repo_url("https://github.com/acme/two/pull/5"), parent.path(), gh,
                                   {farm.remote_base(), "j"}),
                  CloneError);
  // Unknown PR surfaces the hosting error.
  CHECK_THROWS(clone_repository(parse_repo_url("https://github.com/acme/two/pull/6"), parent.path(), gh,
                                {farm.remote_base(), "j"}));
  // Failed clones leave nothing behind.
  CHECK(fs::is_empty(parent.path()));
}

TEST_CASE("workspaces never collide") {
  RemoteFarm farm;
  farm.add("acme", "one", {{"a", "1\n"}});
  TempDir parent;
  StubGithubClient gh;
  const auto src = parse_repo_url("https://github.com/acme/one");
  std::vector<std::future<Workspace>> jobs;
  for (int i = 0; i < 6; ++i) {
    jobs.push_back(std::async(std::launch::async, [&, i] {
      return clone_repository(src, parent.path(), gh, {farm.remote_base(), "job" + std::to_string(i)});
    }));
  }
  std::set<fs::path> roots;
  for (auto& j : jobs) roots.insert(j.get().root);
  CHECK(roots.size() == 6);
  // Same job id twice in a row gets a suffixed directory.
  const auto a = clone_repository(src, parent.path(), gh, {farm.remote_base(), "same"});
  const auto b = clone_repository(src, parent.path(), gh, {farm.remote_base(), "same"});
  CHECK(a.root != b.root);
}

TEST_CASE("cleanup is idempotent and honors keep") {
  RemoteFarm farm;
  farm.add("acme", "one", {{"a", "1\n"}});
  TempDir parent;
  StubGithubClient gh;
  const auto src = parse_repo_url("https://github.com/acme/one");
  const auto kept = clone_repository(src, parent.path(), gh, {farm.remote_base(), "k"});
  CHECK(cleanup_workspace(kept, true));
  CHECK(fs::exists(kept.root));
  const auto gone = clone_repository(src, parent.path(), gh, {farm.remote_base(), "g"});
  CHECK(cleanup_workspace(gone, false));
  CHECK_FALSE(fs::exists(gone.root));
  CHECK(cleanup_workspace(gone, false));
}
