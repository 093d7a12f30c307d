#pragma once

#include <cstddef>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "reporeview/model.hpp"

namespace reporeview {

/// Lowercases, maps every non-alphanumeric ASCII character to a space and collapses
/// whitespace runs. Bytes outside ASCII are kept as-is.
std::string normalize_issue(std::string_view issue);

struct Fingerprint {
  std::string file;
  std::string normalized_issue;

  auto operator<=>(const Fingerprint&) const = default;
};

Fingerprint fingerprint_of(const ReviewComment& c);

inline constexpr double kFuzzyJaccardThreshold = 0.8;
inline constexpr std::uint32_t kFuzzyLineDistance = 3;

std::set<std::string> issue_tokens(std::string_view normalized_issue);
double jaccard(const std::set<std::string>& a, const std::set<std::string>& b);

/// Same file and either the same normalized issue, or token-set Jaccard >= 0.8 with
/// lines no more than 3 apart.
bool is_duplicate(const ReviewComment& a, const ReviewComment& b);

/// True when `challenger` beats `incumbent` on severity, then on lower line. Full ties
/// return false; deduplicate() resolves those by input order.
bool prefer(const ReviewComment& challenger, const ReviewComment& incumbent);

struct DedupResult {
  std::vector<ReviewComment> kept;
  std::size_t removed = 0;
};

/// Greedy first-survivor deduplication in input order. A winner that replaces a kept
/// comment is re-checked against the rest of the kept list, so no two survivors are
/// duplicates of each other.
DedupResult deduplicate(std::vector<ReviewComment> comments);

/// Stable sort: severity descending, then file, line, id ascending.
std::vector<ReviewComment> rank(std::vector<ReviewComment> comments);
bool ranked_before(const ReviewComment& a, const ReviewComment& b);
bool is_ranked(const std::vector<ReviewComment>& comments);

std::vector<ReviewComment> top_k(const std::vector<ReviewComment>& ranked, std::size_t k);

}  // namespace reporeview
