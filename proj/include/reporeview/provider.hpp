#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "reporeview/clock.hpp"

namespace reporeview {

enum class Role : std::uint8_t { system, user };

std::string_view to_string(Role r);

struct Message {
  Role role = Role::user;
  std::string content;

  bool operator==(const Message&) const = default;
};

struct ModelRequest {
  std::string model_id;
  std::vector<Message> messages;
  double temperature = 0.0;
  std::uint32_t max_output_tokens = 4096;

  /// Throws std::invalid_argument on an empty message list, an empty content, a system
  /// message past the first position or a temperature outside [0, 2].
  void validate() const;

  bool operator==(const ModelRequest&) const = default;
};

struct ModelResponse {
  std::string text;
  std::uint64_t tokens_in = 0;
  std::uint64_t tokens_out = 0;
  std::uint64_t latency_ms = 0;
  std::uint32_t attempts = 1;

  bool operator==(const ModelResponse&) const = default;
};

/// ceil(chars / 4), used whenever a provider omits usage numbers.
std::uint64_t estimate_tokens(std::size_t chars);
std::uint64_t estimate_tokens(const std::vector<Message>& messages);

enum class ProviderErrorKind : std::uint8_t {
  auth,
  rate_limited,
  timeout,
  network,
  server,
  malformed_response,
  request_too_large,
  replay_miss,
};

std::string_view to_string(ProviderErrorKind k);
bool is_retryable(ProviderErrorKind k);

class ProviderError : public std::runtime_error {
 public:
  ProviderError(ProviderErrorKind kind, const std::string& message,
                std::optional<std::chrono::milliseconds> retry_after = std::nullopt)
      : std::runtime_error(message), kind_(kind), retry_after_(retry_after) {}

  ProviderErrorKind kind() const noexcept { return kind_; }
  std::optional<std::chrono::milliseconds> retry_after() const noexcept { return retry_after_; }
  std::uint32_t attempts() const noexcept { return attempts_; }
  bool exhausted() const noexcept { return exhausted_; }

  /// Copy annotated with the attempt count; `exhausted` marks a retryable error that ran
  /// out of budget.
  ProviderError annotated(std::uint32_t attempts, bool exhausted) const;

 private:
  ProviderErrorKind kind_;
  std::optional<std::chrono::milliseconds> retry_after_;
  std::uint32_t attempts_ = 1;
  bool exhausted_ = false;
};

/// Chat-completion backend. Implementations must tolerate concurrent calls.
class Provider {
 public:
  virtual ~Provider() = default;
  virtual ModelResponse complete(const ModelRequest& request) = 0;
};

nlohmann::ordered_json to_json(const ModelRequest& r);
ModelRequest request_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const ModelResponse& r);
ModelResponse response_from_json(const nlohmann::json& j);

/// SHA-256 over the canonical JSON of the whole request.
std::string request_hash(const ModelRequest& request);
/// SHA-256 over the canonical JSON of the messages only.
std::string messages_hash(const std::vector<Message>& messages);

/// Canned responses keyed by messages_hash; unknown requests get the fallback text.
class StubProvider final : public Provider {
 public:
  static constexpr std::string_view kDefaultFallback = "[]";

  explicit StubProvider(std::string fallback = std::string(kDefaultFallback))
      : fallback_(std::move(fallback)) {}

  void add(const std::vector<Message>& messages, std::string text);
  ModelResponse complete(const ModelRequest& request) override;

 private:
  std::string fallback_;
  std::mutex mu_;
  std::unordered_map<std::string, std::string> canned_;
};

struct HttpProviderConfig {
  std::string base_url = "https://api.openai.com/v1";
  std::string api_key;
  std::chrono::seconds timeout{120};
};

/// Speaks the OpenAI-compatible `POST {base}/chat/completions` wire format.
class HttpProvider final : public Provider {
 public:
  explicit HttpProvider(HttpProviderConfig config);
  ModelResponse complete(const ModelRequest& request) override;

 private:
  HttpProviderConfig config_;
  std::string origin_;
  std::string path_prefix_;
};

struct RetryPolicy {
  std::uint32_t max_retries = 3;
  std::vector<std::chrono::milliseconds> backoff{std::chrono::seconds{1}, std::chrono::seconds{2},
                                                 std::chrono::seconds{4}};

  std::chrono::milliseconds delay_before_retry(std::uint32_t retry_index) const;
};

/// Calls `call` until it succeeds or fails with a non-retryable error. A malformed
/// response is retried at most once. On failure the last error is rethrown annotated
/// with the number of attempts.
ModelResponse with_retry(const std::function<ModelResponse()>& call, const RetryPolicy& policy,
                         Sleeper& sleeper);

struct Price {
  double usd_per_million_tokens_in = 0.0;
  double usd_per_million_tokens_out = 0.0;
};

using PriceTable = std::map<std::string, Price, std::less<>>;

PriceTable load_price_table(const std::filesystem::path& path);
PriceTable price_table_from_json(const nlohmann::json& j);

struct CostEstimate {
  double usd = 0.0;
  std::optional<std::string> warning;
};

CostEstimate estimate_cost(std::uint64_t tokens_in, std::uint64_t tokens_out, std::string_view model_id,
                           const PriceTable& table);

struct GatewayStats {
  std::uint64_t calls = 0;
  std::uint64_t failures = 0;
  std::uint64_t retries = 0;
  std::uint64_t tokens_in = 0;
  std::uint64_t tokens_out = 0;
};

/// Per-run front door to a provider: fills in the model id, applies the retry policy and
/// accumulates usage. One logical call counts once however many attempts it takes.
class Gateway {
 public:
  Gateway(std::shared_ptr<Provider> provider, std::string model_id, RetryPolicy policy,
          std::shared_ptr<Sleeper> sleeper, std::uint32_t max_output_tokens = 4096);

  ModelResponse complete(std::vector<Message> messages);
  GatewayStats stats() const;
  const std::string& model_id() const noexcept { return model_id_; }

 private:
  std::shared_ptr<Provider> provider_;
  std::string model_id_;
  RetryPolicy policy_;
  std::shared_ptr<Sleeper> sleeper_;
  std::uint32_t max_output_tokens_;
  std::atomic<std::uint64_t> calls_{0};
  std::atomic<std::uint64_t> failures_{0};
  std::atomic<std::uint64_t> retries_{0};
  std::atomic<std::uint64_t> tokens_in_{0};
  std::atomic<std::uint64_t> tokens_out_{0};
};

}  // namespace reporeview
