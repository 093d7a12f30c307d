#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>

#include "reporeview/clock.hpp"
#include "reporeview/context_agent.hpp"
#include "reporeview/github.hpp"
#include "reporeview/orchestrator.hpp"
#include "reporeview/provider.hpp"
#include "reporeview/selection.hpp"

namespace reporeview {

/// Invalid runtime configuration (bad flag combination, missing credentials).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RuntimeOptions {
  std::optional<std::string> model_id;
  /// Transcript file or directory to answer model calls from.
  std::optional<std::filesystem::path> replay;
  /// Transcript file that live calls are appended to.
  std::optional<std::filesystem::path> record;
  std::optional<std::filesystem::path> prices;
  std::filesystem::path workspace_parent;
  SelectionConfig selection;
  ContextBudget budget;
  bool keep_workspace = false;
  std::optional<std::string> remote_base;
  std::size_t review_parallelism = 1;
  /// Every model request is echoed here when set.
  std::ostream* show_prompts = nullptr;
};

/// Decorator printing each request's messages before forwarding it.
class PromptEchoProvider final : public Provider {
 public:
  PromptEchoProvider(std::shared_ptr<Provider> inner, std::ostream& out);
  ModelResponse complete(const ModelRequest& request) override;

 private:
  std::shared_ptr<Provider> inner_;
  std::ostream& out_;
  std::mutex mu_;
};

/// Fixed at $SOURCE_DATE_EPOCH when set, the system clock otherwise.
std::shared_ptr<Clock> clock_from_env();

/// Shared construction of run dependencies for the CLI, the service and the harness,
/// so equal inputs yield equal runs whichever surface starts them.
class Runtime {
 public:
  /// Throws ConfigError on conflicting or incomplete settings.
  explicit Runtime(RuntimeOptions options);

  RunDeps deps(const std::string& job_id, const std::optional<std::string>& model_override = std::nullopt) const;
  const std::shared_ptr<Clock>& clock() const noexcept { return clock_; }
  const RuntimeOptions& options() const noexcept { return options_; }

  /// Override, then configured model, then $PROVIDER_MODEL, then "default" for replay.
  std::string resolve_model(const std::optional<std::string>& model_override) const;

 private:
  RuntimeOptions options_;
  std::shared_ptr<Provider> provider_;
  std::shared_ptr<GithubClient> github_;
  std::shared_ptr<Clock> clock_;
  std::shared_ptr<Sleeper> sleeper_;
  PriceTable prices_;
};

}  // namespace reporeview
