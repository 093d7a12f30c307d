#include "reporeview/cli.hpp"

#include <signal.h>

#include <algorithm>
#include <fstream>
#include <memory>
#include <optional>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "reporeview/evaluation.hpp"
#include "reporeview/orchestrator.hpp"
#include "reporeview/runtime.hpp"
#include "reporeview/service.hpp"

namespace reporeview {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string progress_line(const ProgressEvent& event, ReviewMode mode) {
  const auto plan = plan_stages(mode);
  const auto it = std::find(plan.begin(), plan.end(), event.stage);
  std::string line = fmt::format("[{}/{}] {}: {}", it - plan.begin() + 1, plan.size(), to_string(event.stage),
                                 to_string(event.status));
  if (event.current && event.total) line += fmt::format(" {}/{}", *event.current, *event.total);
  if (!event.detail.empty()) line += fmt::format(" ({})", event.detail);
  return line;
}

namespace {

inline constexpr const char* kDefaultConfigFile = "reporeviewer.json";

struct UsageFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunOptions {
  std::optional<std::string> model;
  std::optional<std::string> replay;
  std::optional<std::string> record;
  std::optional<std::string> prices;
  std::optional<std::string> workspace_dir;
  std::optional<std::string> remote_base;
  std::size_t max_files = 50;
  std::uint64_t max_file_kb = 200;
  std::vector<std::string> exclude;
  std::vector<std::string> include;
  bool keep_workspace = false;
  bool show_prompts = false;
  std::size_t parallel = 1;
};

struct Options {
  std::optional<std::string> config;
  bool verbose = false;

  RunOptions review_run;
  std::string url;
  std::optional<int> pr;
  std::string mode = "full";
  std::string out = "review-out";
  std::optional<std::string> job_id;

  RunOptions serve_run;
  std::optional<std::string> host;
  std::optional<int> port;
  std::optional<std::string> artifact_root;
  std::optional<std::size_t> max_jobs;
  std::vector<std::string> cors;

  RunOptions eval_run;
  std::string repos;
  std::string modes = "full,single_agent,no_context,no_priority";
  std::string eval_out;
  std::optional<std::string> replay_dir;
  bool force = false;

  std::string annotations;
  std::string runs;
  std::string agg_out;
};

struct App {
  std::unique_ptr<CLI::App> app;
  CLI::App* review = nullptr;
  CLI::App* serve = nullptr;
  CLI::App* eval = nullptr;
  CLI::App* aggregate = nullptr;
};

void add_run_options(CLI::App* sub, RunOptions& o, bool with_replay_file) {
  sub->add_option("--model", o.model, "Model id (default: $PROVIDER_MODEL)");
  if (with_replay_file) {
    sub->add_option("--replay", o.replay, "Answer model calls from a recorded transcript");
    sub->add_option("--record", o.record, "Append live model exchanges to a transcript");
  }
  sub->add_option("--prices", o.prices, "JSON price table for cost estimates");
  sub->add_option("--workspace-dir", o.workspace_dir, "Parent directory for clone workspaces");
  sub->add_option("--remote-base", o.remote_base, "Clone from {base}/{owner}/{name} instead of GitHub");
  sub->add_option("--max-files", o.max_files, "Maximum files reviewed")->check(CLI::PositiveNumber);
  sub->add_option("--max-file-kb", o.max_file_kb, "Per-file size cap in KiB")->check(CLI::PositiveNumber);
  sub->add_option("--exclude", o.exclude, "Extra exclusion glob (repeatable)");
  sub->add_option("--include", o.include, "Review only paths matching these globs (repeatable)");
  sub->add_flag("--keep-workspace", o.keep_workspace, "Leave the clone on disk");
  sub->add_flag("--show-prompts", o.show_prompts, "Print every model prompt to stderr");
  sub->add_option("--parallel", o.parallel, "Concurrent file reviews")->check(CLI::PositiveNumber);
}

App make_app(Options& o) {
  App a;
  a.app = std::make_unique<CLI::App>("Staged LLM code review for GitHub repositories", "reporeviewer");
  auto& app = *a.app;
  app.require_subcommand(1);
  app.add_option("--config", o.config, "JSON file with default flag values (default: ./reporeviewer.json)");
  app.add_flag("-v,--verbose", o.verbose, "Debug logging on stderr");
  app.set_version_flag("--version", std::string(REPOREVIEW_VERSION));

  a.review = app.add_subcommand("review", "Review a repository or pull request");
  a.review->add_option("url", o.url, "GitHub repository or pull request URL")->required();
  a.review->add_option("--pr", o.pr, "Pull request number");
  a.review->add_option("--mode", o.mode, "full, single_agent, no_context or no_priority");
  a.review->add_option("--out", o.out, "Artifact directory");
  a.review->add_option("--job-id", o.job_id, "Job id used in workspace names and events");
  add_run_options(a.review, o.review_run, true);

  a.serve = app.add_subcommand("serve", "Run the HTTP job service");
  a.serve->add_option("--host", o.host, "Listen address (default 127.0.0.1)");
  a.serve->add_option("--port", o.port, "Listen port (default $PORT or 8080)");
  a.serve->add_option("--artifact-root", o.artifact_root, "Job artifact root (default $ARTIFACT_ROOT or ./runs)");
  a.serve->add_option("--max-jobs", o.max_jobs, "Concurrent job limit")->check(CLI::PositiveNumber);
  a.serve->add_option("--cors-origin", o.cors, "Allowed browser origin (repeatable)");
  add_run_options(a.serve, o.serve_run, true);

  a.eval = app.add_subcommand("eval", "Run repositories x modes for evaluation");
  a.eval->add_option("--repos", o.repos, "Repos file: one URL or URL#PR per line")->required();
  a.eval->add_option("--modes", o.modes, "Comma separated modes");
  a.eval->add_option("--out", o.eval_out, "Experiment directory")->required();
  a.eval->add_option("--replay-dir", o.replay_dir, "Transcript directory for offline runs");
  a.eval->add_flag("--force", o.force, "Reuse a non-empty output directory");
  add_run_options(a.eval, o.eval_run, false);

  a.aggregate = app.add_subcommand("aggregate", "Compute metrics from an annotation sheet");
  a.aggregate->add_option("--annotations", o.annotations, "Annotated annotations.csv")->required();
  a.aggregate->add_option("--runs", o.runs, "Experiment directory holding runs.json")->required();
  a.aggregate->add_option("--out", o.agg_out, "Directory for metrics.csv/json/tex")->required();
  return a;
}

CLI::App* selected(const App& a) {
  for (auto* sub : {a.review, a.serve, a.eval, a.aggregate}) {
    if (sub->parsed()) return sub;
  }
  return nullptr;
}

std::vector<std::string> cli_words(const json& value, const std::string& flag, bool is_flag) {
  std::vector<std::string> words;
  auto scalar = [](const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); };
  if (is_flag) {
    if (!value.is_boolean()) throw UsageFailure(fmt::format("config key '{}' must be true or false", flag.substr(2)));
    if (value.get<bool>()) words.push_back(flag);
    return words;
  }
  if (value.is_array()) {
    for (const auto& v : value) {
      words.push_back(flag);
      words.push_back(scalar(v));
    }
  } else if (!value.is_null()) {
    words.push_back(flag);
    words.push_back(scalar(value));
  }
  return words;
}

// Options present in the config file but not on the command line, as extra argv words.
std::vector<std::string> config_words(const App& a, CLI::App* sub, const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageFailure(fmt::format("cannot read config file {}", path.string()));
  const json j = json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw UsageFailure(fmt::format("{} must hold a JSON object", path.string()));
  std::vector<std::string> words;
  for (const auto& [key, value] : j.items()) {
    std::string name = key;
    std::replace(name.begin(), name.end(), '_', '-');
    const std::string flag = "--" + name;
    if (name == "config") continue;
    const CLI::Option* opt = sub->get_option_no_throw(flag);
    if (opt == nullptr) {
      const auto subs = a.app->get_subcommands({});
      const bool known = std::any_of(subs.begin(), subs.end(),
                                     [&](const CLI::App* s) { return s->get_option_no_throw(flag) != nullptr; });
      if (!known && a.app->get_option_no_throw(flag) == nullptr) {
        throw UsageFailure(fmt::format("unknown config key '{}' in {}", key, path.string()));
      }
      continue;
    }
    if (opt->count() > 0) continue;
    auto w = cli_words(value, flag, opt->get_expected_max() == 0);
    words.insert(words.end(), w.begin(), w.end());
  }
  return words;
}

RuntimeOptions runtime_options(const RunOptions& r, std::ostream& err) {
  RuntimeOptions o;
  o.model_id = r.model;
  if (r.replay) o.replay = fs::path(*r.replay);
  if (r.record) o.record = fs::path(*r.record);
  if (r.prices) o.prices = fs::path(*r.prices);
  if (r.workspace_dir) o.workspace_parent = *r.workspace_dir;
  o.remote_base = r.remote_base;
  o.selection.max_files = r.max_files;
  o.selection.max_file_bytes = r.max_file_kb * 1024;
  o.selection.extra_exclude_globs = r.exclude;
  if (!r.include.empty()) o.selection.include_only = r.include;
  o.keep_workspace = r.keep_workspace;
  o.review_parallelism = r.parallel;
  if (r.show_prompts) o.show_prompts = &err;
  return o;
}

ReviewMode parse_mode(const std::string& name) {
  auto mode = mode_from_string(name);
  if (!mode) throw UsageFailure(fmt::format("unknown mode '{}' (expected full, single_agent, no_context or no_priority)", name));
  return *mode;
}

int cmd_review(const Options& o, std::ostream& out, std::ostream& err) {
  RepoSource source;
  try {
    source = parse_repo_url(o.url, o.pr);
  } catch (const UrlParseError& e) {
    throw UsageFailure(e.what());
  }
  const auto mode = parse_mode(o.mode);
  Runtime runtime(runtime_options(o.review_run, err));
  auto deps = runtime.deps(o.job_id.value_or(random_job_id()));
  deps.output_dir = o.out;
  deps.sink = [&err, mode](const ProgressEvent& e) { err << progress_line(e, mode) << '\n' << std::flush; };
  const auto result = run_review(source, mode, deps);
  if (!result.ok) {
    err << fmt::format("error: {} failed: {}\n", result.failed_stage ? to_string(*result.failed_stage) : "run",
                       result.error);
    return kExitFailure;
  }
  out << result.json_path.string() << '\n' << result.md_path.string() << '\n';
  return kExitOk;
}

int cmd_serve(const Options& o, std::ostream& out, std::ostream& err) {
  ServiceConfig config = ServiceConfig::from_env();
  if (o.host) config.host = *o.host;
  if (o.port) config.port = *o.port;
  if (o.artifact_root) config.artifact_root = *o.artifact_root;
  if (o.max_jobs) config.max_concurrent_jobs = *o.max_jobs;
  if (!o.cors.empty()) config.cors_origins = o.cors;
  Runtime runtime(runtime_options(o.serve_run, err));

  // Signals are taken synchronously by this thread; every thread started below
  // inherits the blocked mask.
  sigset_t signals, previous;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, &previous);

  int code = kExitOk;
  {
    ReviewService service(
        config, [&runtime](const std::string& id, const JobRequest& req) { return runtime.deps(id, req.model_id); },
        runtime.clock());
    if (!service.start()) {
      err << fmt::format("error: cannot listen on {}:{}\n", config.host, config.port);
      code = kExitFailure;
    } else {
      out << fmt::format("listening on http://{}:{}\n", config.host, service.port()) << std::flush;
      int sig = 0;
      sigwait(&signals, &sig);
      err << "shutting down\n";
      service.stop();
    }
  }
  pthread_sigmask(SIG_SETMASK, &previous, nullptr);
  return code;
}

int cmd_eval(const Options& o, std::ostream& out, std::ostream& err) {
  const auto repos = parse_repos_file(o.repos);
  if (repos.empty()) throw UsageError(fmt::format("repos file {} lists no repositories", o.repos));
  const auto modes = parse_mode_list(o.modes);
  auto ro = runtime_options(o.eval_run, err);
  if (o.replay_dir) ro.replay = fs::path(*o.replay_dir);
  Runtime runtime(std::move(ro));
  ExperimentConfig config;
  config.out_dir = o.eval_out;
  config.force = o.force;
  config.on_run = [&err](const RunRecord& r) {
    err << fmt::format("{}: {}{}\n", r.run_id, to_string(r.status), r.failure ? " (" + *r.failure + ")" : "");
  };
  const auto records = run_experiment(
      repos, modes, [&runtime](const std::string& run_id, const RepoSource&, ReviewMode) { return runtime.deps(run_id); },
      config);
  out << (fs::path(o.eval_out) / kRunsIndex).string() << '\n';
  if (std::any_of(records.begin(), records.end(), [](const RunRecord& r) { return r.status == RunStatus::ok; })) {
    out << (fs::path(o.eval_out) / kAnnotationSheet).string() << '\n';
  }
  return kExitOk;
}

int cmd_aggregate(const Options& o, std::ostream& out, std::ostream&) {
  const auto table = aggregate_files(o.annotations, o.runs);
  const auto files = export_metrics(table, o.agg_out);
  out << files.csv.string() << '\n' << files.json.string() << '\n' << files.tex.string() << '\n';
  return kExitOk;
}

void configure_logging(bool verbose) {
  static std::once_flag once;
  std::call_once(once, [] {
    auto logger = std::make_shared<spdlog::logger>("reporeviewer", std::make_shared<spdlog::sinks::stderr_sink_mt>());
    spdlog::set_default_logger(logger);
  });
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::warn);
}

int parse_error_code(const CLI::ParseError& e) {
  return e.get_exit_code() == static_cast<int>(CLI::ExitCodes::Success) ? kExitOk : kExitUsage;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  App a = make_app(o);
  // CLI11 consumes a reversed argument vector.
  auto reversed = [](std::vector<std::string> v) {
    std::reverse(v.begin(), v.end());
    return v;
  };
  try {
    auto words = reversed(args);
    a.app->parse(words);
  } catch (const CLI::ParseError& e) {
    a.app->exit(e, out, err);
    return parse_error_code(e);
  }

  try {
    CLI::App* sub = selected(a);
    std::optional<fs::path> config_path;
    if (o.config) {
      config_path = *o.config;
    } else if (fs::is_regular_file(kDefaultConfigFile)) {
      config_path = kDefaultConfigFile;
    }
    if (config_path && sub != nullptr) {
      auto extra = config_words(a, sub, *config_path);
      if (!extra.empty()) {
        // Flags given on the command line win; reparse with the config values appended.
        std::vector<std::string> merged = args;
        merged.insert(merged.end(), extra.begin(), extra.end());
        o = Options{};
        a = make_app(o);
        try {
          auto words = reversed(merged);
          a.app->parse(words);
        } catch (const CLI::ParseError& e) {
          err << "error in config file " << config_path->string() << ": " << e.what() << '\n';
          return kExitUsage;
        }
        sub = selected(a);
      }
    }
    configure_logging(o.verbose);
    if (sub == a.review) return cmd_review(o, out, err);
    if (sub == a.serve) return cmd_serve(o, out, err);
    if (sub == a.eval) return cmd_eval(o, out, err);
    if (sub == a.aggregate) return cmd_aggregate(o, out, err);
    err << a.app->help();
    return kExitUsage;
  } catch (const UsageFailure& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace reporeview
