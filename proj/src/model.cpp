#include "reporeview/model.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <ctime>

#include <fmt/format.h>

#include "reporeview/hash.hpp"
#include "reporeview/priority.hpp"
#include "reporeview/text.hpp"

namespace reporeview {

namespace {

template <typename Enum, std::size_t N>
std::optional<Enum> lookup(std::string_view name, const std::string_view (&names)[N]) {
  for (std::size_t i = 0; i < N; ++i) {
    if (names[i] == name) return static_cast<Enum>(i);
  }
  return std::nullopt;
}

constexpr std::string_view kSeverityNames[] = {"info", "low", "medium", "high", "critical"};
constexpr std::string_view kSeverityDisplay[] = {"Info", "Low", "Medium", "High", "Critical"};
constexpr std::string_view kModeNames[] = {"full", "single_agent", "no_context", "no_priority"};
constexpr std::string_view kSkipNames[] = {"binary",          "oversized",       "generated",
                                           "excluded_by_config", "over_file_limit", "unreadable"};
constexpr std::string_view kStageNames[] = {"clone",    "context", "review",
                                            "priority", "summary", "artifacts"};
constexpr std::string_view kStatusNames[] = {"started", "progress", "completed", "failed"};

bool valid_repo_segment(std::string_view s) {
  if (s.empty() || s == "." || s == "..") return false;
  return std::all_of(s.begin(), s.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '-' || c == '_' || c == '.';
  });
}

std::optional<int> parse_positive(std::string_view digits) {
  if (digits.empty() || !std::all_of(digits.begin(), digits.end(),
                                     [](char c) { return c >= '0' && c <= '9'; })) {
    return std::nullopt;
  }
  int value = 0;
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
  if (ec != std::errc{} || ptr != digits.data() + digits.size() || value <= 0) return std::nullopt;
  return value;
}

}  // namespace

std::string_view to_string(Severity s) { return kSeverityNames[static_cast<int>(s)]; }
std::string_view display_name(Severity s) { return kSeverityDisplay[static_cast<int>(s)]; }
std::optional<Severity> severity_from_string(std::string_view name) {
  return lookup<Severity>(name, kSeverityNames);
}

std::strong_ordering compare_severity(Severity a, Severity b) {
  return static_cast<int>(a) <=> static_cast<int>(b);
}

std::string_view to_string(ReviewMode m) { return kModeNames[static_cast<int>(m)]; }
std::optional<ReviewMode> mode_from_string(std::string_view name) {
  return lookup<ReviewMode>(name, kModeNames);
}
bool mode_has_context(ReviewMode m) { return m == ReviewMode::full || m == ReviewMode::no_priority; }
bool mode_has_priority(ReviewMode m) { return m == ReviewMode::full || m == ReviewMode::no_context; }

std::string_view to_string(SkipReason r) { return kSkipNames[static_cast<int>(r)]; }
std::optional<SkipReason> skip_reason_from_string(std::string_view name) {
  return lookup<SkipReason>(name, kSkipNames);
}

std::string_view to_string(Stage s) { return kStageNames[static_cast<int>(s)]; }
std::string_view to_string(StageStatus s) { return kStatusNames[static_cast<int>(s)]; }
std::optional<Stage> stage_from_string(std::string_view name) {
  return lookup<Stage>(name, kStageNames);
}
std::optional<StageStatus> stage_status_from_string(std::string_view name) {
  return lookup<StageStatus>(name, kStatusNames);
}

std::string RepoSource::canonical_url() const {
  return fmt::format("https://github.com/{}/{}", owner, name);
}

std::string RepoSource::display_name() const {
  if (pr_number) return fmt::format("{}/{}#{}", owner, name, *pr_number);
  return fmt::format("{}/{}", owner, name);
}

RepoSource parse_repo_url(std::string_view url, std::optional<int> pr_override) {
  const std::string original(url);
  std::string_view rest = url;
  const std::string lowered = to_lower_ascii(url.substr(0, std::min<std::size_t>(url.size(), 8)));
  if (lowered.starts_with("https://")) {
    rest.remove_prefix(8);
  } else if (lowered.starts_with("http://")) {
    rest.remove_prefix(7);
  } else {
    throw UrlParseError("scheme", fmt::format("malformed URL '{}': expected https://github.com/...", original));
  }

  const auto slash = rest.find('/');
  const std::string host = to_lower_ascii(rest.substr(0, slash));
  if (host.empty()) throw UrlParseError("host", fmt::format("malformed URL '{}': missing host", original));
  if (host != "github.com" && host != "www.github.com") {
    throw UrlParseError("host", fmt::format("unsupported host '{}': only github.com is accepted", host));
  }
  if (rest.find_first_of("?#") != std::string_view::npos) {
    throw UrlParseError("path", fmt::format("malformed URL '{}': query strings and fragments are not accepted", original));
  }

  std::vector<std::string_view> segments;
  if (slash != std::string_view::npos) {
    std::string_view path = rest.substr(slash + 1);
    if (!path.empty() && path.back() == '/') path.remove_suffix(1);
    std::size_t start = 0;
    while (start <= path.size() && !path.empty()) {
      const auto next = path.find('/', start);
      const auto seg = path.substr(start, next == std::string_view::npos ? std::string_view::npos : next - start);
      if (seg.empty()) throw UrlParseError("path", fmt::format("malformed URL '{}': empty path segment", original));
      segments.push_back(seg);
      if (next == std::string_view::npos) break;
      start = next + 1;
    }
  }

  if (segments.empty()) throw UrlParseError("owner", fmt::format("URL '{}' is missing the repository owner", original));
  if (segments.size() < 2) throw UrlParseError("name", fmt::format("URL '{}' is missing the repository name", original));

  RepoSource source;
  source.original_url = original;
  source.owner = std::string(segments[0]);
  std::string_view name = segments[1];
  if (name.ends_with(".git")) name.remove_suffix(4);
  source.name = std::string(name);

  if (!valid_repo_segment(source.owner)) {
    throw UrlParseError("owner", fmt::format("invalid repository owner '{}'", source.owner));
  }
  if (!valid_repo_segment(source.name)) {
    throw UrlParseError("name", fmt::format("invalid repository name '{}'", source.name));
  }

  if (segments.size() == 4 && segments[2] == "pull") {
    auto pr = parse_positive(segments[3]);
    if (!pr) throw UrlParseError("pr", fmt::format("invalid pull request number '{}'", segments[3]));
    source.pr_number = pr;
  } else if (segments.size() != 2) {
    throw UrlParseError("path", fmt::format("unsupported URL path in '{}': expected /{{owner}}/{{name}} or /{{owner}}/{{name}}/pull/{{n}}", original));
  }

  if (pr_override) {
    if (*pr_override <= 0) throw UrlParseError("pr", fmt::format("pull request number must be positive, got {}", *pr_override));
    source.pr_number = pr_override;
  }
  return source;
}

std::string comment_id(std::string_view file, std::uint32_t line, std::string_view issue) {
  const std::string key = fmt::format("{}\n{}\n{}", file, line, normalize_issue(issue));
  return sha256_hex(key).substr(0, 12);
}

bool is_clean_relative_path(std::string_view path) {
  if (path.empty() || path.front() == '/' || path.find('\\') != std::string_view::npos) return false;
  std::size_t start = 0;
  while (true) {
    const auto next = path.find('/', start);
    const auto seg = path.substr(start, next == std::string_view::npos ? std::string_view::npos : next - start);
    if (seg.empty() || seg == "." || seg == "..") return false;
    if (next == std::string_view::npos) return true;
    start = next + 1;
  }
}

std::vector<std::string> validate_report(const ReviewReport& report) {
  std::vector<std::string> v;
  if (report.schema_version != kSchemaVersion) {
    v.push_back(fmt::format("schema_version must be \"{}\", got \"{}\"", kSchemaVersion, report.schema_version));
  }
  const auto& src = report.source;
  if (!valid_repo_segment(src.owner)) v.push_back(fmt::format("source.owner invalid: '{}'", src.owner));
  if (!valid_repo_segment(src.name)) v.push_back(fmt::format("source.name invalid: '{}'", src.name));
  if (src.pr_number && *src.pr_number <= 0) v.push_back("source.pr_number must be positive");

  const bool wants_context = mode_has_context(report.mode);
  if (!wants_context && report.context) v.push_back("context must be absent");
  if (wants_context && !report.context) v.push_back("context must be present");
  if (report.context && report.context->truncated &&
      !report.context->tree_excerpt.ends_with(kTruncationMarker) &&
      !report.context->readme_excerpt.ends_with(kTruncationMarker)) {
    v.push_back("context marked truncated but no excerpt ends with the truncation marker");
  }
  if (report.context) {
    for (const auto& p : report.context->preview_paths) {
      if (!is_clean_relative_path(p)) v.push_back(fmt::format("context preview path invalid: '{}'", p));
    }
  }

  for (std::size_t i = 0; i < report.findings.size(); ++i) {
    const auto& c = report.findings[i];
    if (!is_clean_relative_path(c.file)) v.push_back(fmt::format("finding {}: file path invalid: '{}'", i, c.file));
    if (c.line < 1) v.push_back(fmt::format("finding {}: line must be >= 1", i));
    if (trim(c.issue).empty()) v.push_back(fmt::format("finding {}: issue is empty", i));
    if (c.id != comment_id(c.file, c.line, c.issue)) {
      v.push_back(fmt::format("finding {}: id '{}' does not match its file/line/issue", i, c.id));
    }
  }
  if (mode_has_priority(report.mode) && !is_ranked(report.findings)) {
    v.push_back("findings not sorted");
  }

  for (const auto& s : report.skipped) {
    if (!is_clean_relative_path(s.path)) v.push_back(fmt::format("skipped path invalid: '{}'", s.path));
  }

  const auto& st = report.stats;
  if (!(st.est_cost_usd >= 0.0) || !std::isfinite(st.est_cost_usd)) v.push_back("stats.est_cost_usd must be a non-negative number");
  if (!(st.duration_s >= 0.0) || !std::isfinite(st.duration_s)) v.push_back("stats.duration_s must be a non-negative number");
  if (st.files_skipped != report.skipped.size()) {
    v.push_back(fmt::format("stats.files_skipped ({}) does not match skipped list ({})", st.files_skipped, report.skipped.size()));
  }
  return v;
}

std::string format_timestamp(Timestamp t) {
  const std::time_t tt = t.time_since_epoch().count();
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::optional<Timestamp> parse_timestamp(std::string_view text) {
  std::tm tm{};
  const std::string s(text);
  const char* end = strptime(s.c_str(), "%Y-%m-%dT%H:%M:%SZ", &tm);
  if (end == nullptr || *end != '\0') return std::nullopt;
  return Timestamp{std::chrono::seconds{timegm(&tm)}};
}

}  // namespace reporeview
