#include "reporeview/runtime.hpp"

#include <cstdlib>

#include <fmt/format.h>

#include "reporeview/transcript.hpp"

namespace reporeview {

namespace fs = std::filesystem;

namespace {

std::optional<std::string> env(const char* name) {
  const char* v = std::getenv(name);
  if (v == nullptr || *v == '\0') return std::nullopt;
  return std::string(v);
}

std::string_view role_name(Role r) { return r == Role::system ? "system" : "user"; }

}  // namespace

PromptEchoProvider::PromptEchoProvider(std::shared_ptr<Provider> inner, std::ostream& out)
    : inner_(std::move(inner)), out_(out) {}

ModelResponse PromptEchoProvider::complete(const ModelRequest& request) {
  {
    std::lock_guard lock(mu_);
    out_ << "==== prompt (" << request.model_id << ") ====\n";
    for (const auto& m : request.messages) {
      out_ << "---- " << role_name(m.role) << " ----\n" << m.content;
      if (!m.content.ends_with('\n')) out_ << '\n';
    }
    out_.flush();
  }
  return inner_->complete(request);
}

std::shared_ptr<Clock> clock_from_env() {
  if (auto epoch = env("SOURCE_DATE_EPOCH")) {
    try {
      std::size_t used = 0;
      const long long secs = std::stoll(*epoch, &used);
      if (used == epoch->size() && secs >= 0) return std::make_shared<FixedClock>(Timestamp{std::chrono::seconds{secs}});
    } catch (const std::exception&) {
    }
    throw ConfigError(fmt::format("SOURCE_DATE_EPOCH '{}' is not a non-negative integer", *epoch));
  }
  return std::make_shared<SystemClock>();
}

Runtime::Runtime(RuntimeOptions options) : options_(std::move(options)) {
  if (options_.replay && options_.record) throw ConfigError("--replay and --record cannot be combined");
  options_.selection.validate();
  options_.budget.validate();
  if (options_.workspace_parent.empty()) options_.workspace_parent = fs::temp_directory_path() / "reporeviewer";
  if (!options_.remote_base) options_.remote_base = env("REVIEW_REMOTE_BASE").value_or("https://github.com");

  if (options_.replay) {
    try {
      provider_ = ReplayProvider::load(*options_.replay);
    } catch (const std::exception& e) {
      throw ConfigError(fmt::format("cannot load transcript: {}", e.what()));
    }
  } else {
    if (!options_.model_id && !env("PROVIDER_MODEL")) {
      throw ConfigError("a model is required for live runs (--model or PROVIDER_MODEL)");
    }
    HttpProviderConfig http;
    if (auto base = env("PROVIDER_BASE_URL")) http.base_url = *base;
    auto key = env("PROVIDER_API_KEY");
    if (!key) key = env("OPENAI_API_KEY");
    if (!key) throw ConfigError("PROVIDER_API_KEY is not set (use --replay for offline runs)");
    http.api_key = *key;
    provider_ = std::make_shared<HttpProvider>(http);
    if (options_.record) provider_ = std::make_shared<RecordingProvider>(provider_, *options_.record);
  }
  if (options_.show_prompts != nullptr) {
    provider_ = std::make_shared<PromptEchoProvider>(provider_, *options_.show_prompts);
  }
  if (options_.prices) {
    try {
      prices_ = load_price_table(*options_.prices);
    } catch (const std::exception& e) {
      throw ConfigError(fmt::format("cannot load price table: {}", e.what()));
    }
  }
  github_ = std::make_shared<HttpGithubClient>();
  clock_ = clock_from_env();
  sleeper_ = std::make_shared<RealSleeper>();
}

std::string Runtime::resolve_model(const std::optional<std::string>& model_override) const {
  if (model_override) return *model_override;
  if (options_.model_id) return *options_.model_id;
  if (auto m = env("PROVIDER_MODEL")) return *m;
  return "default";
}

RunDeps Runtime::deps(const std::string& job_id, const std::optional<std::string>& model_override) const {
  RunDeps d;
  d.github = github_;
  d.provider = provider_;
  d.clock = clock_;
  d.sleeper = sleeper_;
  d.workspace_parent = options_.workspace_parent;
  d.selection = options_.selection;
  d.budget = options_.budget;
  d.job_id = job_id;
  d.model_id = resolve_model(model_override);
  d.prices = prices_;
  d.keep_workspace = options_.keep_workspace;
  d.remote_base = *options_.remote_base;
  d.review_parallelism = options_.review_parallelism;
  return d;
}

}  // namespace reporeview
