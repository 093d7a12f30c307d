#include "reporeview/provider.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <fmt/format.h>
#include <httplib.h>
#include <spdlog/spdlog.h>

#include "reporeview/hash.hpp"

namespace reporeview {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::string_view to_string(Role r) { return r == Role::system ? "system" : "user"; }

void ModelRequest::validate() const {
  if (messages.empty()) throw std::invalid_argument("model request has no messages");
  for (std::size_t i = 0; i < messages.size(); ++i) {
    if (messages[i].content.empty()) {
      throw std::invalid_argument(fmt::format("model request message {} is empty", i));
    }
    if (i > 0 && messages[i].role == Role::system) {
      throw std::invalid_argument("only the first model request message may be a system message");
    }
  }
  if (!(temperature >= 0.0 && temperature <= 2.0)) {
    throw std::invalid_argument(fmt::format("temperature {} outside [0, 2]", temperature));
  }
}

std::uint64_t estimate_tokens(std::size_t chars) { return (chars + 3) / 4; }

std::uint64_t estimate_tokens(const std::vector<Message>& messages) {
  std::size_t chars = 0;
  for (const auto& m : messages) chars += m.content.size();
  return estimate_tokens(chars);
}

std::string_view to_string(ProviderErrorKind k) {
  switch (k) {
    case ProviderErrorKind::auth: return "auth";
    case ProviderErrorKind::rate_limited: return "rate_limited";
    case ProviderErrorKind::timeout: return "timeout";
    case ProviderErrorKind::network: return "network";
    case ProviderErrorKind::server: return "server";
    case ProviderErrorKind::malformed_response: return "malformed_response";
    case ProviderErrorKind::request_too_large: return "request_too_large";
    case ProviderErrorKind::replay_miss: return "replay_miss";
  }
  return "unknown";
}

bool is_retryable(ProviderErrorKind k) {
  switch (k) {
    case ProviderErrorKind::rate_limited:
    case ProviderErrorKind::timeout:
    case ProviderErrorKind::network:
    case ProviderErrorKind::server:
    case ProviderErrorKind::malformed_response:
      return true;
    default:
      return false;
  }
}

ProviderError ProviderError::annotated(std::uint32_t attempts, bool exhausted) const {
  const std::string prefix = exhausted ? fmt::format("retries exhausted after {} attempts: ", attempts)
                                       : std::string();
  ProviderError copy(kind_, prefix + what(), retry_after_);
  copy.attempts_ = attempts;
  copy.exhausted_ = exhausted;
  return copy;
}

ordered_json to_json(const ModelRequest& r) {
  ordered_json messages = ordered_json::array();
  for (const auto& m : r.messages) {
    messages.push_back({{"role", to_string(m.role)}, {"content", m.content}});
  }
  return {{"model_id", r.model_id},
          {"messages", std::move(messages)},
          {"temperature", r.temperature},
          {"max_output_tokens", r.max_output_tokens}};
}

ModelRequest request_from_json(const json& j) {
  ModelRequest r;
  r.model_id = j.at("model_id").get<std::string>();
  for (const auto& m : j.at("messages")) {
    const auto role = m.at("role").get<std::string>();
    if (role != "system" && role != "user") throw std::invalid_argument("unknown message role '" + role + "'");
    r.messages.push_back({role == "system" ? Role::system : Role::user, m.at("content").get<std::string>()});
  }
  r.temperature = j.at("temperature").get<double>();
  r.max_output_tokens = j.at("max_output_tokens").get<std::uint32_t>();
  return r;
}

ordered_json to_json(const ModelResponse& r) {
  return {{"text", r.text},
          {"tokens_in", r.tokens_in},
          {"tokens_out", r.tokens_out},
          {"latency_ms", r.latency_ms},
          {"attempts", r.attempts}};
}

ModelResponse response_from_json(const json& j) {
  ModelResponse r;
  r.text = j.at("text").get<std::string>();
  r.tokens_in = j.at("tokens_in").get<std::uint64_t>();
  r.tokens_out = j.at("tokens_out").get<std::uint64_t>();
  r.latency_ms = j.value("latency_ms", std::uint64_t{0});
  r.attempts = j.value("attempts", std::uint32_t{1});
  return r;
}

std::string request_hash(const ModelRequest& request) {
  return sha256_hex(to_json(request).dump(-1, ' ', false, json::error_handler_t::replace));
}

std::string messages_hash(const std::vector<Message>& messages) {
  ordered_json arr = ordered_json::array();
  for (const auto& m : messages) arr.push_back({{"role", to_string(m.role)}, {"content", m.content}});
  return sha256_hex(arr.dump(-1, ' ', false, json::error_handler_t::replace));
}

void StubProvider::add(const std::vector<Message>& messages, std::string text) {
  std::lock_guard lock(mu_);
  canned_[messages_hash(messages)] = std::move(text);
}

ModelResponse StubProvider::complete(const ModelRequest& request) {
  request.validate();
  ModelResponse r;
  {
    std::lock_guard lock(mu_);
    auto it = canned_.find(messages_hash(request.messages));
    r.text = it == canned_.end() ? fallback_ : it->second;
  }
  r.tokens_in = estimate_tokens(request.messages);
  r.tokens_out = estimate_tokens(r.text.size());
  return r;
}

namespace {

// Splits "https://host:port/v1" into the origin httplib wants and the path prefix.
std::pair<std::string, std::string> split_base_url(const std::string& base) {
  const auto scheme_end = base.find("://");
  if (scheme_end == std::string::npos) throw std::invalid_argument("provider base URL lacks a scheme: " + base);
  const auto path_start = base.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {base, ""};
  std::string prefix = base.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {base.substr(0, path_start), prefix};
}

std::optional<std::chrono::milliseconds> parse_retry_after(const httplib::Result& res) {
  if (!res || !res->has_header("Retry-After")) return std::nullopt;
  try {
    const double secs = std::stod(res->get_header_value("Retry-After"));
    if (secs < 0) return std::nullopt;
    return std::chrono::milliseconds{static_cast<std::int64_t>(std::ceil(secs * 1000.0))};
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

}  // namespace

HttpProvider::HttpProvider(HttpProviderConfig config) : config_(std::move(config)) {
  std::tie(origin_, path_prefix_) = split_base_url(config_.base_url);
}

ModelResponse HttpProvider::complete(const ModelRequest& request) {
  request.validate();
  json body = {{"model", request.model_id},
               {"temperature", request.temperature},
               {"max_tokens", request.max_output_tokens}};
  json messages = json::array();
  for (const auto& m : request.messages) messages.push_back({{"role", to_string(m.role)}, {"content", m.content}});
  body["messages"] = std::move(messages);

  httplib::Client client(origin_);
  client.set_connection_timeout(std::chrono::seconds{10});
  client.set_read_timeout(config_.timeout);
  client.set_write_timeout(config_.timeout);
  httplib::Headers headers;
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

  const auto started = std::chrono::steady_clock::now();
  auto res = client.Post(path_prefix_ + "/chat/completions", headers,
                         body.dump(-1, ' ', false, json::error_handler_t::replace), "application/json");
  const auto latency = std::chrono::duration_cast<std::chrono::milliseconds>(
      std::chrono::steady_clock::now() - started);

  if (!res) {
    const auto err = res.error();
    if (err == httplib::Error::Read || err == httplib::Error::Write || err == httplib::Error::ConnectionTimeout) {
      throw ProviderError(ProviderErrorKind::timeout, "provider request timed out: " + httplib::to_string(err));
    }
    throw ProviderError(ProviderErrorKind::network, "provider unreachable: " + httplib::to_string(err));
  }
  const int status = res->status;
  if (status == 401 || status == 403) {
    throw ProviderError(ProviderErrorKind::auth, fmt::format("provider rejected credentials (HTTP {})", status));
  }
  if (status == 429) {
    throw ProviderError(ProviderErrorKind::rate_limited, "provider rate limit (HTTP 429)", parse_retry_after(res));
  }
  if (status == 408 || status == 504) {
    throw ProviderError(ProviderErrorKind::timeout, fmt::format("provider timed out (HTTP {})", status));
  }
  if (status == 413 || (status == 400 && res->body.find("context_length") != std::string::npos)) {
    throw ProviderError(ProviderErrorKind::request_too_large,
                        fmt::format("request exceeds the model context (HTTP {})", status));
  }
  if (status >= 500) {
    throw ProviderError(ProviderErrorKind::server, fmt::format("provider server error (HTTP {})", status));
  }
  if (status != 200) {
    throw ProviderError(ProviderErrorKind::malformed_response, fmt::format("unexpected provider status HTTP {}", status));
  }

  const json parsed = json::parse(res->body, nullptr, false);
  if (parsed.is_discarded() || !parsed.is_object()) {
    throw ProviderError(ProviderErrorKind::malformed_response, "provider response is not a JSON object");
  }
  const json* content = nullptr;
  if (auto choices = parsed.find("choices"); choices != parsed.end() && choices->is_array() && !choices->empty()) {
    const auto& first = (*choices)[0];
    if (auto msg = first.find("message"); msg != first.end() && msg->is_object()) {
      if (auto c = msg->find("content"); c != msg->end() && c->is_string()) content = &*c;
    }
  }
  if (content == nullptr) {
    throw ProviderError(ProviderErrorKind::malformed_response, "provider response lacks choices[0].message.content");
  }

  ModelResponse r;
  r.text = content->get<std::string>();
  r.latency_ms = static_cast<std::uint64_t>(latency.count());
  const auto usage = parsed.find("usage");
  const bool has_usage = usage != parsed.end() && usage->is_object() &&
                         usage->contains("prompt_tokens") && (*usage)["prompt_tokens"].is_number_unsigned() &&
                         usage->contains("completion_tokens") && (*usage)["completion_tokens"].is_number_unsigned();
  if (has_usage) {
    r.tokens_in = (*usage)["prompt_tokens"].get<std::uint64_t>();
    r.tokens_out = (*usage)["completion_tokens"].get<std::uint64_t>();
  } else {
    r.tokens_in = estimate_tokens(request.messages);
    r.tokens_out = estimate_tokens(r.text.size());
  }
  return r;
}

std::chrono::milliseconds RetryPolicy::delay_before_retry(std::uint32_t retry_index) const {
  if (backoff.empty()) return std::chrono::milliseconds{0};
  return backoff[std::min<std::size_t>(retry_index, backoff.size() - 1)];
}

ModelResponse with_retry(const std::function<ModelResponse()>& call, const RetryPolicy& policy,
                         Sleeper& sleeper) {
  std::uint32_t attempts = 0;
  bool malformed_seen = false;
  while (true) {
    ++attempts;
    try {
      ModelResponse r = call();
      r.attempts = attempts;
      return r;
    } catch (const ProviderError& e) {
      if (!is_retryable(e.kind())) throw e.annotated(attempts, false);
      const bool second_malformed = e.kind() == ProviderErrorKind::malformed_response && malformed_seen;
      if (attempts > policy.max_retries || second_malformed) throw e.annotated(attempts, true);
      if (e.kind() == ProviderErrorKind::malformed_response) malformed_seen = true;
      auto wait = policy.delay_before_retry(attempts - 1);
      if (e.retry_after() && *e.retry_after() > wait) wait = *e.retry_after();
      sleeper.sleep_for(wait);
    }
  }
}

PriceTable price_table_from_json(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("price table must be a JSON object keyed by model id");
  PriceTable table;
  for (const auto& [model, entry] : j.items()) {
    Price p;
    p.usd_per_million_tokens_in = entry.at("usd_per_million_tokens_in").get<double>();
    p.usd_per_million_tokens_out = entry.at("usd_per_million_tokens_out").get<double>();
    if (p.usd_per_million_tokens_in < 0 || p.usd_per_million_tokens_out < 0) {
      throw std::invalid_argument("negative price for model '" + model + "'");
    }
    table.emplace(model, p);
  }
  return table;
}

PriceTable load_price_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open price table " + path.string());
  const json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw std::runtime_error("price table " + path.string() + " is not valid JSON");
  return price_table_from_json(j);
}

CostEstimate estimate_cost(std::uint64_t tokens_in, std::uint64_t tokens_out, std::string_view model_id,
                           const PriceTable& table) {
  auto it = table.find(model_id);
  if (it == table.end()) {
    return {0.0, fmt::format("no price configured for model '{}'; cost reported as 0", model_id)};
  }
  const auto& p = it->second;
  return {static_cast<double>(tokens_in) * p.usd_per_million_tokens_in / 1e6 +
              static_cast<double>(tokens_out) * p.usd_per_million_tokens_out / 1e6,
          std::nullopt};
}

Gateway::Gateway(std::shared_ptr<Provider> provider, std::string model_id, RetryPolicy policy,
                 std::shared_ptr<Sleeper> sleeper, std::uint32_t max_output_tokens)
    : provider_(std::move(provider)),
      model_id_(std::move(model_id)),
      policy_(std::move(policy)),
      sleeper_(std::move(sleeper)),
      max_output_tokens_(max_output_tokens) {
  if (!provider_) throw std::invalid_argument("gateway requires a provider");
  if (!sleeper_) throw std::invalid_argument("gateway requires a sleeper");
}

ModelResponse Gateway::complete(std::vector<Message> messages) {
  ModelRequest request{model_id_, std::move(messages), 0.0, max_output_tokens_};
  ++calls_;
  try {
    auto r = with_retry([&] { return provider_->complete(request); }, policy_, *sleeper_);
    retries_ += r.attempts - 1;
    tokens_in_ += r.tokens_in;
    tokens_out_ += r.tokens_out;
    return r;
  } catch (const ProviderError& e) {
    retries_ += e.attempts() - 1;
    ++failures_;
    throw;
  }
}

GatewayStats Gateway::stats() const {
  return {calls_.load(), failures_.load(), retries_.load(), tokens_in_.load(), tokens_out_.load()};
}

}  // namespace reporeview
