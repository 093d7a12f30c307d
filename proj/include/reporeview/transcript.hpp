#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <unordered_map>

#include "reporeview/provider.hpp"

namespace reporeview {

// Transcript files hold one JSON object per line:
//   {"request_hash": "...", "request": {...}, "response": {...}}

class TranscriptLoadError : public std::runtime_error {
 public:
  TranscriptLoadError(std::filesystem::path file, std::size_t line, const std::string& what);

  const std::filesystem::path& file() const noexcept { return file_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::filesystem::path file_;
  std::size_t line_;
};

/// Wraps a live provider and appends every successful exchange to a transcript.
class RecordingProvider final : public Provider {
 public:
  RecordingProvider(std::shared_ptr<Provider> inner, const std::filesystem::path& transcript);

  ModelResponse complete(const ModelRequest& request) override;

 private:
  std::shared_ptr<Provider> inner_;
  std::mutex mu_;
  std::ofstream out_;
};

/// Serves recorded responses by request hash and never touches the network.
class ReplayProvider final : public Provider {
 public:
  /// `path` is a transcript file, or a directory whose `*.jsonl` files are all loaded.
  static std::shared_ptr<ReplayProvider> load(const std::filesystem::path& path);

  ModelResponse complete(const ModelRequest& request) override;
  std::size_t size() const noexcept { return responses_.size(); }

 private:
  void load_file(const std::filesystem::path& file);

  std::unordered_map<std::string, ModelResponse> responses_;
};

}  // namespace reporeview
