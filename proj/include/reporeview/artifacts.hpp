#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "reporeview/model.hpp"

namespace reporeview {

inline constexpr const char* kJsonArtifact = "review.json";
inline constexpr const char* kMarkdownArtifact = "review.md";

class ArtifactError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// review.json codec. Keys are emitted in a fixed schema order.
nlohmann::ordered_json to_json(const RepoSource& s);
nlohmann::ordered_json to_json(const ReviewComment& c);
nlohmann::ordered_json to_json(const SkippedFile& s);
nlohmann::ordered_json to_json(const ContextSummary& c);
nlohmann::ordered_json to_json(const RunStats& s);
nlohmann::ordered_json to_json(const ReviewReport& r);
nlohmann::ordered_json to_json(const ProgressEvent& e);

RepoSource repo_source_from_json(const nlohmann::json& j);
RunStats run_stats_from_json(const nlohmann::json& j);
/// Throws ArtifactError on a missing field or an out-of-range enum value.
ReviewReport report_from_json(const nlohmann::json& j);
ProgressEvent progress_event_from_json(const nlohmann::json& j);

/// Canonical bytes of review.json: two-space indent, trailing newline.
std::string serialize_report(const ReviewReport& report);
ReviewReport read_report(const std::filesystem::path& path);

/// Single-line JSON for event streams and events.jsonl.
std::string serialize_event(const ProgressEvent& event);

/// Writes through a temporary sibling and renames it into place.
void atomic_write(const std::filesystem::path& path, std::string_view bytes);

/// Requires validate_report(report) to be empty; throws ArtifactError otherwise.
std::filesystem::path write_json_report(const ReviewReport& report, const std::filesystem::path& dir);

std::string render_markdown(const ReviewReport& report);

struct ArtifactPaths {
  std::filesystem::path json_path;
  std::filesystem::path md_path;
};

ArtifactPaths write_all(const ReviewReport& report, const std::filesystem::path& dir);

}  // namespace reporeview
