#include "reporeview/repo.hpp"

#include <system_error>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "reporeview/process.hpp"
#include "reporeview/text.hpp"

namespace reporeview {

namespace fs = std::filesystem;

namespace {

const std::vector<std::pair<std::string, std::string>> kGitEnv = {
    {"GIT_TERMINAL_PROMPT", "0"},
    {"GIT_ASKPASS", "true"},
    {"GIT_CONFIG_NOSYSTEM", "1"},
    {"LC_ALL", "C"},
};

ProcessResult git(const std::vector<std::string>& args, const std::optional<fs::path>& cwd = std::nullopt) {
  std::vector<std::string> argv{"git"};
  argv.insert(argv.end(), args.begin(), args.end());
  return run_process(argv, cwd, kGitEnv);
}

std::string first_line(const std::string& s) {
  const auto t = trim(s);
  return t.substr(0, t.find('\n'));
}

void require(const ProcessResult& r, const std::string& what) {
  if (!r.ok()) throw CloneError(fmt::format("{} failed: {}", what, first_line(r.err.empty() ? r.out : r.err)));
}

std::string rev_parse_head(const fs::path& root) {
  auto r = git({"rev-parse", "HEAD"}, root);
  require(r, "git rev-parse HEAD");
  return trim(r.out);
}

fs::path fresh_workspace_dir(const fs::path& parent, const std::string& job_id) {
  fs::create_directories(parent);
  const std::string base = "ws-" + job_id;
  fs::path candidate = parent / base;
  for (int i = 1; fs::exists(candidate); ++i) candidate = parent / fmt::format("{}-{}", base, i);
  return fs::absolute(candidate);
}

}  // namespace

std::string remote_url_for(const RepoSource& source, const std::string& remote_base) {
  std::string base = remote_base;
  while (!base.empty() && base.back() == '/') base.pop_back();
  return fmt::format("{}/{}/{}", base, source.owner, source.name);
}

Workspace clone_repository(const RepoSource& source, const fs::path& dest_parent, GithubClient& github,
                           const CloneOptions& options) {
  Workspace ws;
  ws.source = source;
  try {
    ws.root = fresh_workspace_dir(dest_parent, options.job_id);
  } catch (const fs::filesystem_error& e) {
    throw CloneError(fmt::format("cannot create workspace under {}: {}", dest_parent.string(), e.what()));
  }
  const std::string url = remote_url_for(source, options.remote_base);

  try {
    if (!source.pr_number) {
      require(git({"clone", "--quiet", "--depth", "1", "--no-tags", url, ws.root.string()}),
              fmt::format("git clone {}", url));
      ws.head_commit = rev_parse_head(ws.root);
      return ws;
    }

    PrMetadata meta;
    try {
      meta = fetch_pr_metadata(source, github);
    } catch (const GithubError& e) {
      throw CloneError(fmt::format("cannot resolve PR head: {}", e.what()));
    }

    fs::create_directories(ws.root);
    require(git({"init", "--quiet", ws.root.string()}), "git init");
    require(git({"remote", "add", "origin", url}, ws.root), "git remote add");
    auto fetched = git({"fetch", "--quiet", "--depth", "1", "--no-tags", "origin", meta.head_sha}, ws.root);
    if (!fetched.ok()) {
      // Some servers refuse fetching by sha; the PR ref carries the same commit.
      fetched = git({"fetch", "--quiet", "--no-tags", "origin",
                     fmt::format("pull/{}/head", *source.pr_number)},
                    ws.root);
    }
    require(fetched, fmt::format("git fetch {} {}", url, meta.head_sha));
    require(git({"checkout", "--quiet", "--detach", meta.head_sha}, ws.root),
            fmt::format("git checkout {}", meta.head_sha));
    ws.head_commit = rev_parse_head(ws.root);
    if (ws.head_commit != meta.head_sha) {
      throw CloneError(fmt::format("checked out {} but PR head is {}", ws.head_commit, meta.head_sha));
    }
    ws.pr_changed_files = meta.changed_files;
    return ws;
  } catch (...) {
    std::error_code ec;
    fs::remove_all(ws.root, ec);
    throw;
  }
}

bool cleanup_workspace(const Workspace& ws, bool keep) {
  if (keep) {
    spdlog::info("keeping workspace {}", ws.root.string());
    return true;
  }
  std::error_code ec;
  fs::remove_all(ws.root, ec);
  if (ec) {
    spdlog::warn("could not remove workspace {}: {}", ws.root.string(), ec.message());
    return false;
  }
  return true;
}

}  // namespace reporeview
