#include "reporeview/transcript.hpp"

#include <algorithm>
#include <vector>

#include <fmt/format.h>

namespace reporeview {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

TranscriptLoadError::TranscriptLoadError(std::filesystem::path file, std::size_t line, const std::string& what)
    : std::runtime_error(fmt::format("{}: line {}: {}", file.string(), line, what)),
      file_(std::move(file)),
      line_(line) {}

RecordingProvider::RecordingProvider(std::shared_ptr<Provider> inner, const std::filesystem::path& transcript)
    : inner_(std::move(inner)) {
  if (!inner_) throw std::invalid_argument("recording provider requires an inner provider");
  if (transcript.has_parent_path()) std::filesystem::create_directories(transcript.parent_path());
  out_.open(transcript, std::ios::app | std::ios::binary);
  if (!out_) throw std::runtime_error("cannot open transcript for writing: " + transcript.string());
}

ModelResponse RecordingProvider::complete(const ModelRequest& request) {
  ModelResponse response = inner_->complete(request);
  ordered_json entry = {{"request_hash", request_hash(request)},
                        {"request", to_json(request)},
                        {"response", to_json(response)}};
  const std::string line = entry.dump(-1, ' ', false, json::error_handler_t::replace);
  std::lock_guard lock(mu_);
  out_ << line << '\n';
  out_.flush();
  return response;
}

std::shared_ptr<ReplayProvider> ReplayProvider::load(const std::filesystem::path& path) {
  auto provider = std::shared_ptr<ReplayProvider>(new ReplayProvider());
  if (std::filesystem::is_directory(path)) {
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(path)) {
      if (entry.is_regular_file() && entry.path().extension() == ".jsonl") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) provider->load_file(f);
  } else {
    provider->load_file(path);
  }
  return provider;
}

void ReplayProvider::load_file(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw TranscriptLoadError(file, 0, "cannot open transcript");
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    const json entry = json::parse(line, nullptr, false);
    if (entry.is_discarded() || !entry.is_object()) throw TranscriptLoadError(file, number, "not a JSON object");
    try {
      const auto hash = entry.at("request_hash").get<std::string>();
      // First recording wins when identical requests were recorded more than once.
      responses_.try_emplace(hash, response_from_json(entry.at("response")));
    } catch (const json::exception& e) {
      throw TranscriptLoadError(file, number, e.what());
    }
  }
}

ModelResponse ReplayProvider::complete(const ModelRequest& request) {
  const auto hash = request_hash(request);
  auto it = responses_.find(hash);
  if (it == responses_.end()) {
    throw ProviderError(ProviderErrorKind::replay_miss, "replay miss: no recorded response for request " + hash);
  }
  ModelResponse r = it->second;
  r.attempts = 1;
  return r;
}

}  // namespace reporeview
