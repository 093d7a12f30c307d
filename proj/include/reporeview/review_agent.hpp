#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "reporeview/model.hpp"
#include "reporeview/provider.hpp"
#include "reporeview/selection.hpp"

namespace reporeview {

inline constexpr std::size_t kMaxReviewContentChars = 48000;
inline constexpr std::size_t kDefaultSnippetRadius = 2;

extern const char* const kReviewSystemPrompt;
extern const char* const kCombinedSystemPrompt;

std::vector<Message> build_review_prompt(const FileEntry& file, const ContextSummary* context);

/// Finds the JSON payload in free-form model output: fence lines are dropped, then each
/// '[' or '{' is tried in order, its partner located by bracket counting that skips
/// string literals. Arrays holding no objects are passed over. Never throws.
std::optional<nlohmann::json> extract_json_payload(std::string_view text);

/// Maps severity words and common synonyms onto the scale; nullopt when unknown.
std::optional<Severity> coerce_severity(std::string_view word);

struct ParsedFindings {
  std::vector<ReviewComment> comments;
  std::size_t dropped = 0;
  std::size_t coerced = 0;
  bool parse_failure = false;
};

/// Total: accepts any text. Emitted comments carry the reviewed file's path, a line
/// clamped into [1, line_count], a severity on the scale and a nonempty issue.
ParsedFindings parse_findings(std::string_view text, const FileEntry& file);

/// Snippet of lines [line - radius, line + radius] clipped to the file, each "N: ".
ReviewComment attach_snippet(ReviewComment comment, const FileEntry& file, std::size_t radius = kDefaultSnippetRadius);

struct FileReview {
  std::vector<ReviewComment> comments;
  std::size_t dropped = 0;
  std::size_t coerced = 0;
  bool parse_failure = false;
  bool failed = false;
  std::string failure;
};

/// One model call for one file. Provider failures yield no comments and failed=true;
/// replay misses propagate.
FileReview review_file(const FileEntry& file, const ContextSummary* context, Gateway& gateway);

struct CombinedPrompt {
  std::vector<Message> messages;
  std::vector<const FileEntry*> included;
  std::vector<const FileEntry*> left_out;
};

/// Single-call prompt: tree, then each selected file that still fits in `budget_chars`
/// (taken greedily in selection order).
CombinedPrompt build_combined_prompt(const std::string& tree_text, const std::vector<FileEntry>& selected,
                                     std::size_t budget_chars);

struct ParsedCombined {
  ParsedFindings findings;
  std::optional<std::string> summary;
};

/// Parses {"findings": [...], "summary": "..."}; findings must name one of `files`
/// (or are attributed to the only file when there is just one).
ParsedCombined parse_combined(std::string_view text, const std::vector<const FileEntry*>& files);

}  // namespace reporeview
