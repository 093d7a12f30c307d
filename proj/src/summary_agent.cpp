#include "reporeview/summary_agent.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "reporeview/priority.hpp"
#include "reporeview/text.hpp"

namespace reporeview {

const char* const kSummarySystemPrompt =
    "You are a senior code reviewer writing the final report for a repository review. Using the "
    "top findings, skipped-file tally and project context provided, write a concise reviewer "
    "summary of at most 300 words that ends with a prioritized action list. Mention skipped-file "
    "categories when they limit the review.";

std::string skip_tally_inline(const std::vector<SkippedFile>& skipped) {
  std::string out;
  for (auto reason : kAllSkipReasons) {
    const auto n = std::count_if(skipped.begin(), skipped.end(), [&](const SkippedFile& s) { return s.reason == reason; });
    if (n == 0) continue;
    if (!out.empty()) out += ", ";
    out += fmt::format("{}: {}", to_string(reason), n);
  }
  return out.empty() ? "none" : out;
}

std::string finding_line(const ReviewComment& c) {
  return fmt::format("{} — {}:{} — {}", to_string(c.severity), c.file, c.line, c.issue);
}

std::vector<Message> build_summary_prompt(const std::vector<ReviewComment>& ranked,
                                          const std::vector<SkippedFile>& skipped, const ContextSummary* context) {
  std::string user = "TOP FINDINGS:\n";
  const auto top = top_k(ranked, kSummaryPromptFindings);
  if (top.empty()) user += "No findings.\n";
  for (const auto& c : top) user += finding_line(c) + "\n";
  user += fmt::format("\nTOTAL FINDINGS: {}\n", ranked.size());
  user += fmt::format("SKIPPED FILES: {}\n", skip_tally_inline(skipped));
  if (context != nullptr) {
    user += "\nPROJECT CONTEXT:\n";
    user += context->text;
    user += '\n';
  }
  return {{Role::system, kSummarySystemPrompt}, {Role::user, std::move(user)}};
}

std::string fallback_summary(const std::vector<ReviewComment>& ranked, const std::vector<SkippedFile>& skipped) {
  std::string out = fmt::format("Automated summary (model unavailable): {} findings.\n", ranked.size());
  std::string counts;
  for (auto sev : kSeveritiesDescending) {
    const auto n = std::count_if(ranked.begin(), ranked.end(), [&](const ReviewComment& c) { return c.severity == sev; });
    if (n == 0) continue;
    if (!counts.empty()) counts += ", ";
    counts += fmt::format("{}: {}", to_string(sev), n);
  }
  out += fmt::format("By severity: {}\n", counts.empty() ? "none" : counts);
  const auto top = top_k(ranked, kFallbackSummaryFindings);
  if (!top.empty()) {
    out += "Top findings:\n";
    for (const auto& c : top) out += "- " + finding_line(c) + "\n";
  }
  out += fmt::format("Skipped files: {}", skip_tally_inline(skipped));
  return out;
}

SummaryOutcome summarize(const std::vector<ReviewComment>& ranked, const std::vector<SkippedFile>& skipped,
                         const ContextSummary* context, Gateway& gateway) {
  SummaryOutcome out;
  try {
    auto text = trim(gateway.complete(build_summary_prompt(ranked, skipped, context)).text);
    if (!text.empty()) {
      out.text = std::move(text);
      return out;
    }
    out.failure = "model returned an empty summary";
  } catch (const ProviderError& e) {
    if (e.kind() == ProviderErrorKind::replay_miss) throw;
    out.failure = e.what();
  }
  out.degraded = true;
  out.text = fallback_summary(ranked, skipped);
  return out;
}

}  // namespace reporeview
