#include "reporeview/priority.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace reporeview {

std::string normalize_issue(std::string_view issue) {
  std::string out;
  out.reserve(issue.size());
  bool pending_space = false;
  for (char ch : issue) {
    const auto c = static_cast<unsigned char>(ch);
    const bool keep = c >= 0x80 || std::isalnum(c) != 0;
    if (!keep) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : ch);
  }
  return out;
}

Fingerprint fingerprint_of(const ReviewComment& c) { return {c.file, normalize_issue(c.issue)}; }

std::set<std::string> issue_tokens(std::string_view normalized_issue) {
  std::set<std::string> tokens;
  std::istringstream in{std::string(normalized_issue)};
  for (std::string tok; in >> tok;) tokens.insert(tok);
  return tokens;
}

double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
  if (a.empty() && b.empty()) return 1.0;
  std::size_t common = 0;
  for (const auto& t : a) common += b.count(t);
  const std::size_t unite = a.size() + b.size() - common;
  return static_cast<double>(common) / static_cast<double>(unite);
}

bool is_duplicate(const ReviewComment& a, const ReviewComment& b) {
  if (a.file != b.file) return false;
  const auto na = normalize_issue(a.issue);
  const auto nb = normalize_issue(b.issue);
  if (na == nb) return true;
  const auto distance = a.line > b.line ? a.line - b.line : b.line - a.line;
  if (distance > kFuzzyLineDistance) return false;
  return jaccard(issue_tokens(na), issue_tokens(nb)) >= kFuzzyJaccardThreshold;
}

bool prefer(const ReviewComment& challenger, const ReviewComment& incumbent) {
  const auto sev = compare_severity(challenger.severity, incumbent.severity);
  if (sev != 0) return sev > 0;
  return challenger.line < incumbent.line;
}

DedupResult deduplicate(std::vector<ReviewComment> comments) {
  struct Indexed {
    std::size_t index;
    ReviewComment comment;
  };
  DedupResult result;
  std::vector<Indexed> kept;
  for (std::size_t i = 0; i < comments.size(); ++i) {
    Indexed candidate{i, std::move(comments[i])};
    std::optional<std::size_t> slot;
    while (true) {
      auto it = std::find_if(kept.begin(), kept.end(), [&](const Indexed& k) {
        return is_duplicate(k.comment, candidate.comment);
      });
      if (it == kept.end()) break;
      ++result.removed;
      const auto pos = static_cast<std::size_t>(it - kept.begin());
      // Full ties go to whichever came first in the input.
      const bool earlier = candidate.index < it->index;
      const bool challenger_wins = earlier ? !prefer(it->comment, candidate.comment)
                                           : prefer(candidate.comment, it->comment);
      if (!challenger_wins) candidate = std::move(*it);
      kept.erase(it);
      slot = slot ? std::min(*slot, pos) : pos;
    }
    if (slot) {
      kept.insert(kept.begin() + static_cast<std::ptrdiff_t>(*slot), std::move(candidate));
    } else {
      kept.push_back(std::move(candidate));
    }
  }
  result.kept.reserve(kept.size());
  for (auto& k : kept) result.kept.push_back(std::move(k.comment));
  return result;
}

bool ranked_before(const ReviewComment& a, const ReviewComment& b) {
  const auto sev = compare_severity(a.severity, b.severity);
  if (sev != 0) return sev > 0;
  if (a.file != b.file) return a.file < b.file;
  if (a.line != b.line) return a.line < b.line;
  return a.id < b.id;
}

std::vector<ReviewComment> rank(std::vector<ReviewComment> comments) {
  std::stable_sort(comments.begin(), comments.end(), ranked_before);
  return comments;
}

bool is_ranked(const std::vector<ReviewComment>& comments) {
  return std::is_sorted(comments.begin(), comments.end(), ranked_before);
}

std::vector<ReviewComment> top_k(const std::vector<ReviewComment>& ranked, std::size_t k) {
  const auto n = std::min(k, ranked.size());
  return {ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(n)};
}

}  // namespace reporeview
