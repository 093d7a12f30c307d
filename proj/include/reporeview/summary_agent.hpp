#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "reporeview/model.hpp"
#include "reporeview/provider.hpp"

namespace reporeview {

inline constexpr std::size_t kSummaryPromptFindings = 10;
inline constexpr std::size_t kFallbackSummaryFindings = 5;

extern const char* const kSummarySystemPrompt;

/// "binary: 2, oversized: 1" in skip-reason order, or "none".
std::string skip_tally_inline(const std::vector<SkippedFile>& skipped);

/// "high — src/a.c:3 — issue text"
std::string finding_line(const ReviewComment& c);

std::vector<Message> build_summary_prompt(const std::vector<ReviewComment>& ranked,
                                          const std::vector<SkippedFile>& skipped, const ContextSummary* context);

/// Deterministic digest used when the model is unavailable.
std::string fallback_summary(const std::vector<ReviewComment>& ranked, const std::vector<SkippedFile>& skipped);

struct SummaryOutcome {
  std::string text;
  bool degraded = false;
  std::string failure;
};

/// One model call; falls back to fallback_summary on provider failure or an empty reply.
SummaryOutcome summarize(const std::vector<ReviewComment>& ranked, const std::vector<SkippedFile>& skipped,
                         const ContextSummary* context, Gateway& gateway);

}  // namespace reporeview
