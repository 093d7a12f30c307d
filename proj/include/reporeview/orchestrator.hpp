#pragma once

#include <atomic>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "reporeview/clock.hpp"
#include "reporeview/context_agent.hpp"
#include "reporeview/github.hpp"
#include "reporeview/model.hpp"
#include "reporeview/provider.hpp"
#include "reporeview/selection.hpp"

namespace reporeview {

using StagePlan = std::vector<Stage>;

StagePlan plan_stages(ReviewMode mode);

using ProgressSink = std::function<void(const ProgressEvent&)>;

/// Assigns per-job sequence numbers (from 1) and forwards events to the sink in that
/// order. Exceptions thrown by the sink are swallowed.
class ProgressEmitter {
 public:
  ProgressEmitter(std::string job_id, ProgressSink sink, std::shared_ptr<Clock> clock);

  void emit(Stage stage, StageStatus status, std::string detail = {},
            std::optional<std::uint64_t> current = std::nullopt, std::optional<std::uint64_t> total = std::nullopt);
  std::uint64_t last_seq() const;

 private:
  std::string job_id_;
  ProgressSink sink_;
  std::shared_ptr<Clock> clock_;
  mutable std::mutex mutex_;
  std::uint64_t seq_ = 0;
};

/// Single-agent prompt budget as a multiple of the context budget total.
inline constexpr std::size_t kSingleAgentBudgetFactor = 4;

struct RunDeps {
  std::shared_ptr<GithubClient> github;
  std::shared_ptr<Provider> provider;
  std::shared_ptr<Clock> clock;
  std::shared_ptr<Sleeper> sleeper;
  std::filesystem::path workspace_parent;
  SelectionConfig selection;
  ContextBudget budget;
  std::filesystem::path output_dir;
  ProgressSink sink;
  std::string job_id = "local";
  std::string model_id = "default";
  RetryPolicy retry;
  PriceTable prices;
  bool keep_workspace = false;
  std::string remote_base = "https://github.com";
  std::size_t review_parallelism = 1;

  /// Throws std::invalid_argument naming the first missing dependency.
  void validate() const;
};

struct RunResult {
  bool ok = false;
  std::optional<ReviewReport> report;
  std::filesystem::path json_path;
  std::filesystem::path md_path;
  std::string error;
  std::optional<Stage> failed_stage;
};

/// Runs plan_stages(mode) in order. Only clone, a replay miss and artifact writing end a
/// run early; model-dependent stages degrade instead.
RunResult run_review(const RepoSource& source, ReviewMode mode, const RunDeps& deps);

}  // namespace reporeview
