#include "reporeview/orchestrator.hpp"

#include <algorithm>
#include <chrono>
#include <stdexcept>
#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "reporeview/artifacts.hpp"
#include "reporeview/priority.hpp"
#include "reporeview/repo.hpp"
#include "reporeview/review_agent.hpp"
#include "reporeview/summary_agent.hpp"

namespace reporeview {

StagePlan plan_stages(ReviewMode mode) {
  switch (mode) {
    case ReviewMode::full:
      return {Stage::clone, Stage::context, Stage::review, Stage::priority, Stage::summary, Stage::artifacts};
    case ReviewMode::no_context:
      return {Stage::clone, Stage::review, Stage::priority, Stage::summary, Stage::artifacts};
    case ReviewMode::no_priority:
      return {Stage::clone, Stage::context, Stage::review, Stage::summary, Stage::artifacts};
    case ReviewMode::single_agent:
      return {Stage::clone, Stage::review, Stage::artifacts};
  }
  return {};
}

ProgressEmitter::ProgressEmitter(std::string job_id, ProgressSink sink, std::shared_ptr<Clock> clock)
    : job_id_(std::move(job_id)), sink_(std::move(sink)), clock_(std::move(clock)) {}

void ProgressEmitter::emit(Stage stage, StageStatus status, std::string detail, std::optional<std::uint64_t> current,
                           std::optional<std::uint64_t> total) {
  // The lock spans delivery so the sink sees events in seq order.
  std::lock_guard lock(mutex_);
  ProgressEvent e;
  e.job_id = job_id_;
  e.seq = ++seq_;
  e.stage = stage;
  e.status = status;
  e.detail = std::move(detail);
  e.current = current;
  e.total = total;
  e.timestamp = clock_->now_seconds();
  if (!sink_) return;
  try {
    sink_(e);
  } catch (const std::exception& ex) {
    spdlog::debug("progress sink threw: {}", ex.what());
  } catch (...) {
    spdlog::debug("progress sink threw");
  }
}

std::uint64_t ProgressEmitter::last_seq() const {
  std::lock_guard lock(mutex_);
  return seq_;
}

void RunDeps::validate() const {
  if (!github) throw std::invalid_argument("run deps: github client missing");
  if (!provider) throw std::invalid_argument("run deps: provider missing");
  if (!clock) throw std::invalid_argument("run deps: clock missing");
  if (!sleeper) throw std::invalid_argument("run deps: sleeper missing");
  if (workspace_parent.empty()) throw std::invalid_argument("run deps: workspace parent missing");
  if (output_dir.empty()) throw std::invalid_argument("run deps: output dir missing");
  if (job_id.empty()) throw std::invalid_argument("run deps: job id missing");
  if (review_parallelism == 0) throw std::invalid_argument("run deps: review parallelism must be positive");
  selection.validate();
  budget.validate();
}

namespace {

struct ReviewTally {
  std::vector<ReviewComment> findings;
  std::uint64_t parse_failures = 0;
  std::uint64_t review_failures = 0;
  std::uint64_t coerced = 0;
  std::uint64_t dropped = 0;
};

void add_review(ReviewTally& tally, FileReview&& r) {
  tally.parse_failures += r.parse_failure ? 1 : 0;
  tally.review_failures += r.failed ? 1 : 0;
  tally.coerced += r.coerced;
  tally.dropped += r.dropped;
  for (auto& c : r.comments) tally.findings.push_back(std::move(c));
}

// Per-file reviews. Results are merged in selection order whatever the parallelism, so
// the generation order is deterministic; progress counts completions.
ReviewTally review_files(const std::vector<FileEntry>& files, const ContextSummary* context, Gateway& gateway,
                         ProgressEmitter& progress, std::size_t parallelism) {
  const auto total = static_cast<std::uint64_t>(files.size());
  std::vector<FileReview> results(files.size());
  if (parallelism <= 1 || files.size() <= 1) {
    for (std::size_t i = 0; i < files.size(); ++i) {
      results[i] = review_file(files[i], context, gateway);
      progress.emit(Stage::review, StageStatus::progress, files[i].path, i + 1, total);
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::mutex done_mutex;
    std::uint64_t done = 0;
    std::exception_ptr error;
    auto worker = [&] {
      for (std::size_t i; (i = next++) < files.size();) {
        try {
          results[i] = review_file(files[i], context, gateway);
        } catch (...) {
          std::lock_guard lock(done_mutex);
          if (!error) error = std::current_exception();
          next = files.size();
          return;
        }
        std::lock_guard lock(done_mutex);
        progress.emit(Stage::review, StageStatus::progress, files[i].path, ++done, total);
      }
    };
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < std::min(parallelism, files.size()); ++t) pool.emplace_back(worker);
    pool.clear();
    if (error) std::rethrow_exception(error);
  }
  ReviewTally tally;
  for (auto& r : results) add_review(tally, std::move(r));
  return tally;
}

}  // namespace

RunResult run_review(const RepoSource& source, ReviewMode mode, const RunDeps& deps) {
  deps.validate();
  const auto plan = plan_stages(mode);
  const bool has_stage_context = std::find(plan.begin(), plan.end(), Stage::context) != plan.end();
  const bool has_stage_priority = std::find(plan.begin(), plan.end(), Stage::priority) != plan.end();
  ProgressEmitter progress(deps.job_id, deps.sink, deps.clock);
  Gateway gateway(deps.provider, deps.model_id, deps.retry, deps.sleeper);
  const auto started_at = deps.clock->now();

  RunResult result;
  std::optional<Workspace> workspace;
  Stage current = Stage::clone;
  auto fail = [&](Stage stage, const std::string& message) {
    progress.emit(stage, StageStatus::failed, message);
    result.ok = false;
    result.error = message;
    result.failed_stage = stage;
    if (workspace) cleanup_workspace(*workspace, deps.keep_workspace);
    return result;
  };

  try {
    // clone
    progress.emit(Stage::clone, StageStatus::started, source.display_name());
    try {
      workspace = clone_repository(source, deps.workspace_parent, *deps.github,
                                   CloneOptions{deps.remote_base, deps.job_id});
    } catch (const CloneError& e) {
      return fail(Stage::clone, e.what());
    }
    auto selection = walk_repository(*workspace, deps.selection);
    progress.emit(Stage::clone, StageStatus::completed,
                  fmt::format("{} files selected, {} skipped", selection.selected.size(), selection.skipped.size()));

    ReviewReport report;
    report.source = source;
    report.mode = mode;
    report.model_id = deps.model_id;
    RunStats& stats = report.stats;

    // context
    std::optional<ContextSummary> context;
    if (has_stage_context) {
      current = Stage::context;
      progress.emit(Stage::context, StageStatus::started);
      const auto inputs = collect_context_inputs(workspace->root, selection.selected, selection.skipped, deps.budget);
      auto outcome = synthesize_context(inputs, gateway);
      stats.context_degraded = outcome.degraded;
      if (outcome.degraded) stats.warnings.push_back("context: fallback used: " + outcome.failure);
      context = std::move(outcome.summary);
      progress.emit(Stage::context, StageStatus::completed, outcome.degraded ? "fallback context" : "");
    }

    // review
    current = Stage::review;
    const auto total_files = static_cast<std::uint64_t>(selection.selected.size());
    progress.emit(Stage::review, StageStatus::started, fmt::format("{} files", total_files));
    std::optional<std::string> combined_summary;
    if (mode == ReviewMode::single_agent) {
      std::vector<std::string> paths;
      for (const auto& f : selection.selected) paths.push_back(f.path);
      const auto tree = render_tree(paths, selection.skipped, deps.budget);
      auto prompt = build_combined_prompt(tree, selection.selected, deps.budget.total_chars * kSingleAgentBudgetFactor);
      for (const FileEntry* f : prompt.left_out) selection.skipped.push_back({f->path, SkipReason::over_file_limit});
      stats.files_reviewed = prompt.included.size();
      try {
        const auto response = gateway.complete(prompt.messages);
        auto parsed = parse_combined(response.text, prompt.included);
        stats.parse_failures = parsed.findings.parse_failure ? 1 : 0;
        stats.coerced_fields = parsed.findings.coerced;
        stats.dropped_findings = parsed.findings.dropped;
        report.findings = std::move(parsed.findings.comments);
        combined_summary = std::move(parsed.summary);
      } catch (const ProviderError& e) {
        if (e.kind() == ProviderErrorKind::replay_miss) throw;
        stats.review_failures = 1;
        stats.warnings.push_back(fmt::format("review: combined call failed: {}", e.what()));
      }
      progress.emit(Stage::review, StageStatus::progress, fmt::format("{} files in one call", prompt.included.size()),
                    total_files, total_files);
    } else {
      auto tally = review_files(selection.selected, context ? &*context : nullptr, gateway, progress,
                                deps.review_parallelism);
      stats.files_reviewed = total_files;
      stats.parse_failures = tally.parse_failures;
      stats.review_failures = tally.review_failures;
      stats.coerced_fields = tally.coerced;
      stats.dropped_findings = tally.dropped;
      if (tally.review_failures > 0) {
        stats.warnings.push_back(fmt::format("review: {} of {} file reviews failed", tally.review_failures, total_files));
      }
      report.findings = std::move(tally.findings);
    }
    progress.emit(Stage::review, StageStatus::completed, fmt::format("{} findings", report.findings.size()));

    // priority
    if (has_stage_priority) {
      current = Stage::priority;
      progress.emit(Stage::priority, StageStatus::started, fmt::format("{} findings", report.findings.size()));
      auto dedup = deduplicate(std::move(report.findings));
      stats.duplicates_removed = dedup.removed;
      report.findings = rank(std::move(dedup.kept));
      progress.emit(Stage::priority, StageStatus::completed,
                    fmt::format("{} kept, {} duplicates removed", report.findings.size(), dedup.removed));
    }

    // summary
    if (mode == ReviewMode::single_agent) {
      if (combined_summary) {
        report.summary_text = std::move(*combined_summary);
      } else {
        report.summary_text = fallback_summary(report.findings, selection.skipped);
        stats.summary_degraded = true;
        stats.warnings.push_back("summary: combined reply had no summary; fallback used");
      }
    } else {
      current = Stage::summary;
      progress.emit(Stage::summary, StageStatus::started);
      auto outcome = summarize(report.findings, selection.skipped, context ? &*context : nullptr, gateway);
      report.summary_text = std::move(outcome.text);
      stats.summary_degraded = outcome.degraded;
      if (outcome.degraded) stats.warnings.push_back("summary: fallback used: " + outcome.failure);
      progress.emit(Stage::summary, StageStatus::completed, outcome.degraded ? "fallback summary" : "");
    }

    // artifacts
    current = Stage::artifacts;
    progress.emit(Stage::artifacts, StageStatus::started);
    report.context = std::move(context);
    report.skipped = std::move(selection.skipped);
    const auto g = gateway.stats();
    stats.files_skipped = report.skipped.size();
    stats.provider_calls = g.calls;
    stats.tokens_in = g.tokens_in;
    stats.tokens_out = g.tokens_out;
    stats.retries = g.retries;
    const auto cost = estimate_cost(g.tokens_in, g.tokens_out, deps.model_id, deps.prices);
    stats.est_cost_usd = cost.usd;
    if (cost.warning) stats.warnings.push_back(*cost.warning);
    const auto elapsed = deps.clock->now() - started_at;
    stats.duration_s = std::max(0.0, std::chrono::duration<double>(elapsed).count());
    report.generated_at = deps.clock->now_seconds();

    try {
      const auto paths = write_all(report, deps.output_dir);
      result.json_path = paths.json_path;
      result.md_path = paths.md_path;
    } catch (const ArtifactError& e) {
      return fail(Stage::artifacts, e.what());
    }
    progress.emit(Stage::artifacts, StageStatus::completed,
                  fmt::format("{}, {}", result.json_path.string(), result.md_path.string()));
    cleanup_workspace(*workspace, deps.keep_workspace);
    result.ok = true;
    result.report = std::move(report);
    return result;
  } catch (const std::exception& e) {
    return fail(current, e.what());
  }
}

}  // namespace reporeview
