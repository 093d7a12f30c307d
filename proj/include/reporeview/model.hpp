#pragma once

#include <chrono>
#include <compare>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace reporeview {

using Timestamp = std::chrono::sys_seconds;

// Underlying values follow urgency so that a larger value is more severe.
enum class Severity : std::uint8_t { info = 0, low, medium, high, critical };

inline constexpr Severity kSeveritiesDescending[] = {
    Severity::critical, Severity::high, Severity::medium, Severity::low, Severity::info};

std::string_view to_string(Severity s);
/// Title-case label used in headings ("High").
std::string_view display_name(Severity s);
std::optional<Severity> severity_from_string(std::string_view name);

/// Total order over severities. `greater` means `a` is more urgent and sorts first.
std::strong_ordering compare_severity(Severity a, Severity b);

enum class ReviewMode : std::uint8_t { full, single_agent, no_context, no_priority };

inline constexpr ReviewMode kAllModes[] = {
    ReviewMode::full, ReviewMode::single_agent, ReviewMode::no_context, ReviewMode::no_priority};

std::string_view to_string(ReviewMode m);
std::optional<ReviewMode> mode_from_string(std::string_view name);
bool mode_has_context(ReviewMode m);
bool mode_has_priority(ReviewMode m);

struct RepoSource {
  std::string owner;
  std::string name;
  std::optional<int> pr_number;
  std::string original_url;

  std::string canonical_url() const;
  /// "owner/name" or "owner/name#pr".
  std::string display_name() const;

  bool operator==(const RepoSource&) const = default;
};

class UrlParseError : public std::invalid_argument {
 public:
  UrlParseError(std::string part, const std::string& message)
      : std::invalid_argument(message), part_(std::move(part)) {}

  /// Which piece of the URL was rejected: "scheme", "host", "owner", "name", "path", "pr".
  const std::string& part() const noexcept { return part_; }

 private:
  std::string part_;
};

/// Accepts https://github.com/{owner}/{name} with an optional `.git`, trailing slash
/// or `/pull/{n}` suffix. `pr_override` wins over a URL-embedded PR number.
RepoSource parse_repo_url(std::string_view url, std::optional<int> pr_override = std::nullopt);

struct ReviewComment {
  std::string id;
  std::string file;
  std::uint32_t line = 1;
  Severity severity = Severity::medium;
  std::string issue;
  std::string suggestion;
  std::string snippet;

  bool operator==(const ReviewComment&) const = default;
};

/// First 12 hex chars of SHA-256 over "{file}\n{line}\n{normalized issue}".
std::string comment_id(std::string_view file, std::uint32_t line, std::string_view issue);

/// Repo-relative, forward slashes, no `..` or empty segments.
bool is_clean_relative_path(std::string_view path);

enum class SkipReason : std::uint8_t {
  binary,
  oversized,
  generated,
  excluded_by_config,
  over_file_limit,
  unreadable
};

inline constexpr SkipReason kAllSkipReasons[] = {
    SkipReason::binary,          SkipReason::oversized,       SkipReason::generated,
    SkipReason::excluded_by_config, SkipReason::over_file_limit, SkipReason::unreadable};

std::string_view to_string(SkipReason r);
std::optional<SkipReason> skip_reason_from_string(std::string_view name);

struct SkippedFile {
  std::string path;
  SkipReason reason = SkipReason::unreadable;

  bool operator==(const SkippedFile&) const = default;
};

struct ContextSummary {
  std::string text;
  std::string tree_excerpt;
  std::string readme_excerpt;
  std::vector<std::string> preview_paths;
  bool truncated = false;

  bool operator==(const ContextSummary&) const = default;
};

struct RunStats {
  std::uint64_t files_reviewed = 0;
  std::uint64_t files_skipped = 0;
  std::uint64_t provider_calls = 0;
  std::uint64_t tokens_in = 0;
  std::uint64_t tokens_out = 0;
  double est_cost_usd = 0.0;
  double duration_s = 0.0;
  std::uint64_t parse_failures = 0;
  std::uint64_t retries = 0;
  std::uint64_t review_failures = 0;
  std::uint64_t coerced_fields = 0;
  std::uint64_t dropped_findings = 0;
  std::uint64_t duplicates_removed = 0;
  bool context_degraded = false;
  bool summary_degraded = false;
  std::vector<std::string> warnings;

  bool operator==(const RunStats&) const = default;
};

inline constexpr std::string_view kSchemaVersion = "1";

struct ReviewReport {
  std::string schema_version{kSchemaVersion};
  RepoSource source;
  ReviewMode mode = ReviewMode::full;
  std::string model_id;
  Timestamp generated_at{};
  std::optional<ContextSummary> context;
  std::vector<ReviewComment> findings;
  std::vector<SkippedFile> skipped;
  std::string summary_text;
  RunStats stats;

  bool operator==(const ReviewReport&) const = default;
};

/// Every violated invariant of the report and its nested values; empty means ok.
std::vector<std::string> validate_report(const ReviewReport& report);

enum class Stage : std::uint8_t { clone, context, review, priority, summary, artifacts };
enum class StageStatus : std::uint8_t { started, progress, completed, failed };

std::string_view to_string(Stage s);
std::string_view to_string(StageStatus s);
std::optional<Stage> stage_from_string(std::string_view name);
std::optional<StageStatus> stage_status_from_string(std::string_view name);

struct ProgressEvent {
  std::string job_id;
  std::uint64_t seq = 0;
  Stage stage = Stage::clone;
  StageStatus status = StageStatus::started;
  std::string detail;
  std::optional<std::uint64_t> current;
  std::optional<std::uint64_t> total;
  Timestamp timestamp{};

  bool operator==(const ProgressEvent&) const = default;
};

/// RFC 3339 in UTC, second precision: "2026-01-02T03:04:05Z".
std::string format_timestamp(Timestamp t);
std::optional<Timestamp> parse_timestamp(std::string_view text);

}  // namespace reporeview
