#include "support.hpp"

#include <unistd.h>

#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "reporeview/context_agent.hpp"
#include "reporeview/github.hpp"
#include "reporeview/process.hpp"
#include "reporeview/review_agent.hpp"
#include "reporeview/summary_agent.hpp"
#include "reporeview/text.hpp"

#ifndef REPOREVIEW_SOURCE_DIR
#error "REPOREVIEW_SOURCE_DIR must be defined"
#endif

namespace reporeview::testing {

using json = nlohmann::json;

fs::path source_dir() { return REPOREVIEW_SOURCE_DIR; }

fs::path fixture_path(const std::string& relative) { return source_dir() / "fixtures" / relative; }

TempDir::TempDir(const std::string& prefix) {
  static std::atomic<unsigned> counter{0};
  std::random_device rd;
  path_ = fs::temp_directory_path() / fmt::format("{}-{}-{}-{:08x}", prefix, ::getpid(), counter++, rd());
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const fs::path& path, std::string_view bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

std::map<std::string, std::string> read_tree(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    if (e.path().lexically_relative(dir).begin()->string() == ".git") continue;
    files[e.path().lexically_relative(dir).generic_string()] = read_file(e.path());
  }
  return files;
}

namespace {

const std::vector<std::pair<std::string, std::string>> kGitEnv = {
    {"GIT_AUTHOR_NAME", "Fixture"},          {"GIT_AUTHOR_EMAIL", "fixture@example.com"},
    {"GIT_COMMITTER_NAME", "Fixture"},       {"GIT_COMMITTER_EMAIL", "fixture@example.com"},
    {"GIT_AUTHOR_DATE", "2024-01-01T00:00:00Z"}, {"GIT_COMMITTER_DATE", "2024-01-01T00:00:00Z"},
    {"GIT_CONFIG_NOSYSTEM", "1"},            {"HOME", "/nonexistent"},
    {"LC_ALL", "C"}};

std::string git(const fs::path& dir, std::vector<std::string> args) {
  args.insert(args.begin(), "git");
  const auto r = run_process(args, dir, kGitEnv);
  if (!r.ok()) throw std::runtime_error(fmt::format("git {} failed: {}", args[1], r.err));
  return trim(r.out);
}

void write_files(const fs::path& dir, const std::map<std::string, std::string>& files) {
  for (const auto& [rel, bytes] : files) write_file(dir / rel, bytes);
}

}  // namespace

std::string make_git_repo(const fs::path& dir, const std::map<std::string, std::string>& files) {
  fs::create_directories(dir);
  git(dir, {"init", "--quiet", "--initial-branch=main"});
  git(dir, {"config", "uploadpack.allowAnySHA1InWant", "true"});
  write_files(dir, files);
  git(dir, {"add", "--all"});
  git(dir, {"commit", "--quiet", "--allow-empty", "-m", "fixture"});
  return git(dir, {"rev-parse", "HEAD"});
}

std::string add_pull_ref(const fs::path& dir, int pr, const std::map<std::string, std::string>& files) {
  const std::string branch = fmt::format("pr-{}", pr);
  git(dir, {"checkout", "--quiet", "-b", branch});
  write_files(dir, files);
  git(dir, {"add", "--all"});
  git(dir, {"commit", "--quiet", "--allow-empty", "-m", branch});
  const auto sha = git(dir, {"rev-parse", "HEAD"});
  git(dir, {"update-ref", fmt::format("refs/pull/{}/head", pr), sha});
  git(dir, {"checkout", "--quiet", "main"});
  return sha;
}

RemoteFarm::RemoteFarm() : dir_("rr-remotes") {}

std::string RemoteFarm::add(const std::string& owner, const std::string& name,
                            const std::map<std::string, std::string>& files) {
  return make_git_repo(repo_dir(owner, name), files);
}

std::string RemoteFarm::add_fixture(const std::string& owner, const std::string& name, const std::string& fixture_dir) {
  return add(owner, name, read_tree(fixture_path(fixture_dir)));
}

std::string RemoteFarm::remote_base() const { return "file://" + dir_.path().string(); }

fs::path RemoteFarm::repo_dir(const std::string& owner, const std::string& name) const {
  return dir_.path() / owner / name;
}

namespace {

struct Listing {
  std::string path;
  std::string numbered;
};

// FILE/CONTENT blocks of a review or combined prompt.
std::vector<Listing> listings(const std::string& user) {
  std::vector<Listing> out;
  bool in_content = false;
  for (auto line : split_lines(user)) {
    if (line.starts_with("FILE: ")) {
      out.push_back({std::string(line.substr(6)), {}});
      in_content = false;
    } else if (line == "CONTENT:" && !out.empty()) {
      in_content = true;
    } else if (in_content) {
      out.back().numbered += std::string(line) + "\n";
    }
  }
  return out;
}

json scripted_array(const std::string& path, const std::string& listing) {
  json findings = json::array();
  const auto base = path.substr(path.find_last_of('/') == std::string::npos ? 0 : path.find_last_of('/') + 1);
  if (to_lower_ascii(base) == "readme") {
    findings.push_back({{"file", path},
                        {"line", 1},
                        {"severity", "info"},
                        {"issue", "README has no file extension, so most hosts will not render it as Markdown"},
                        {"suggestion", "Rename it to README.md"}});
  }
  for (auto line : split_lines(listing)) {
    const auto colon = line.find(": ");
    if (colon == std::string_view::npos) continue;
    const auto number = std::string(line.substr(0, colon));
    if (number.empty() || number.find_first_not_of("0123456789") != std::string::npos) continue;
    const int n = std::stoi(number);
    const auto text = line.substr(colon + 2);
    if (text.find("strcpy(") != std::string_view::npos) {
      findings.push_back({{"file", path},
                          {"line", n},
                          {"severity", "high"},
                          {"issue", "Unbounded strcpy into a fixed-size buffer can overflow"},
                          {"suggestion", "Check the length first or use snprintf"}});
      findings.push_back({{"file", path},
                          {"line", n},
                          {"severity", "medium"},
                          {"issue", "unbounded strcpy into a fixed size buffer can overflow!"},
                          {"suggestion", ""}});
    }
    if (text.find("eval(") != std::string_view::npos) {
      findings.push_back({{"file", path},
                          {"line", n},
                          {"severity", "critical"},
                          {"issue", "eval on user-supplied input allows arbitrary code execution"},
                          {"suggestion", "Use string.Template or a sandboxed template engine"}});
    }
    if (text.find("TODO") != std::string_view::npos) {
      findings.push_back({{"file", path},
                          {"line", std::to_string(n)},
                          {"severity", "minor"},
                          {"issue", "Unresolved TODO comment"},
                          {"suggestion", "Track the work in an issue or finish it"}});
    }
  }
  return findings;
}

std::string section(const std::string& text, const std::string& start, const std::string& end) {
  const auto a = text.find(start);
  if (a == std::string::npos) return {};
  const auto from = a + start.size();
  const auto b = text.find(end, from);
  return text.substr(from, b == std::string::npos ? std::string::npos : b - from);
}

std::string first_nonblank(const std::string& text) {
  for (auto line : split_lines(text)) {
    if (auto t = trim(line); !t.empty()) return t;
  }
  return "(none)";
}

}  // namespace

std::string scripted_findings_json(const std::string& path, const std::string& listing) {
  return scripted_array(path, listing).dump();
}

ModelResponse ScriptedProvider::complete(const ModelRequest& request) {
  ++calls_;
  {
    std::lock_guard lock(mu_);
    requests_.push_back(request);
  }
  const std::string system = request.messages.empty() ? "" : request.messages.front().content;
  const std::string user = request.messages.size() < 2 ? "" : request.messages[1].content;
  std::string text = "[]";
  if (system == kContextSystemPrompt) {
    const auto readme = section(user, "README:\n", "\n\nKEY FILE PREVIEWS:");
    std::vector<std::string> previews;
    for (auto line : split_lines(user)) {
      if (line.starts_with("--- ") && line.ends_with(" ---")) previews.emplace_back(line.substr(4, line.size() - 8));
    }
    text = fmt::format("A small repository. README opening line: {}. Previewed files: {}.", first_nonblank(readme),
                       previews.empty() ? std::string("none") : fmt::format("{}", fmt::join(previews, ", ")));
  } else if (system == kReviewSystemPrompt) {
    const auto files = listings(user);
    if (!files.empty()) {
      text = "Here is my review.\n```json\n" + scripted_findings_json(files.front().path, files.front().numbered) + "\n```\n";
    }
  } else if (system == kCombinedSystemPrompt) {
    json all = json::array();
    const auto files = listings(user);
    for (const auto& f : files) {
      for (auto& item : scripted_array(f.path, f.numbered)) all.push_back(std::move(item));
    }
    json reply{{"findings", all},
               {"summary", fmt::format("Single-pass review of {} files found {} issues. Action list: 1. Fix the "
                                       "most severe issue first.",
                                       files.size(), all.size())}};
    text = reply.dump();
  } else if (system == kSummarySystemPrompt) {
    const auto total = trim(section(user, "TOTAL FINDINGS: ", "\n"));
    const auto top = first_nonblank(section(user, "TOP FINDINGS:\n", "\n\nTOTAL FINDINGS:"));
    text = fmt::format(
        "The review produced {} findings. Most urgent: {}.\n\nAction list:\n1. Fix the highest-severity finding.\n"
        "2. Add tests around the affected code.",
        total, top);
  }
  ModelResponse r;
  r.text = std::move(text);
  r.tokens_in = estimate_tokens(request.messages);
  r.tokens_out = estimate_tokens(r.text.size());
  return r;
}

std::vector<ModelRequest> ScriptedProvider::requests() const {
  std::lock_guard lock(mu_);
  return requests_;
}

ModelResponse FailingProvider::complete(const ModelRequest&) {
  ++calls_;
  throw ProviderError(kind_, fmt::format("scripted {} failure", to_string(kind_)));
}

RunDeps offline_deps(const RemoteFarm& farm, std::shared_ptr<Provider> provider, const fs::path& work) {
  RunDeps d;
  d.github = std::make_shared<StubGithubClient>();
  d.provider = std::move(provider);
  d.clock = std::make_shared<FixedClock>(Timestamp{std::chrono::seconds{kFixedEpoch}});
  d.sleeper = std::make_shared<VirtualSleeper>();
  d.workspace_parent = work / "ws";
  d.output_dir = work / "out";
  d.job_id = "job-1";
  d.model_id = "default";
  d.remote_base = farm.remote_base();
  return d;
}

}  // namespace reporeview::testing
