#include "reporeview/review_agent.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "reporeview/text.hpp"

namespace reporeview {

using json = nlohmann::json;

const char* const kReviewSystemPrompt =
    "You are a meticulous senior code reviewer. Review the file below for bugs, security "
    "problems, performance issues and maintainability concerns. Use the line numbers shown "
    "in the listing. Respond with only a JSON array of objects with keys file, line, severity, "
    "issue, suggestion; severity one of critical|high|medium|low|info. Respond with [] when "
    "nothing is worth reporting.";

const char* const kCombinedSystemPrompt =
    "You are a meticulous senior code reviewer. Review every file below for bugs, security "
    "problems, performance issues and maintainability concerns, then summarize the review. "
    "Use the line numbers shown in each listing. Respond with only a JSON object "
    "{\"findings\": [...], \"summary\": \"...\"} where findings is an array of objects with "
    "keys file, line, severity, issue, suggestion; severity one of critical|high|medium|low|info; "
    "and summary is a concise reviewer summary with a prioritized action list.";

std::vector<Message> build_review_prompt(const FileEntry& file, const ContextSummary* context) {
  std::string user;
  if (context != nullptr) {
    user += "PROJECT CONTEXT:\n";
    user += context->text;
    user += "\n\n";
  }
  user += "FILE: ";
  user += file.path;
  user += '\n';
  const auto body = truncate_with_marker(file.content, kMaxReviewContentChars);
  if (body.truncated) {
    user += fmt::format("NOTE: the file was truncated to its first {} characters; review only the lines shown.\n",
                        kMaxReviewContentChars);
  }
  user += "CONTENT:\n";
  user += body.text.empty() ? "(empty file)" : number_lines(body.text);
  return {{Role::system, kReviewSystemPrompt}, {Role::user, std::move(user)}};
}

namespace {

std::string strip_fence_lines(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (auto line : split_lines(text)) {
    auto first = line.find_first_not_of(" \t");
    if (first != std::string_view::npos && line.substr(first).starts_with("```")) continue;
    out.append(line);
    out.push_back('\n');
  }
  return out;
}

// Index one past the bracket matching text[open], or npos.
std::size_t matching_close(std::string_view text, std::size_t open) {
  std::string stack;
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = open; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    switch (c) {
      case '"': in_string = true; break;
      case '[': stack.push_back(']'); break;
      case '{': stack.push_back('}'); break;
      case ']':
      case '}':
        if (stack.empty() || stack.back() != c) return std::string_view::npos;
        stack.pop_back();
        if (stack.empty()) return i + 1;
        break;
      default: break;
    }
  }
  return std::string_view::npos;
}

constexpr std::size_t kMaxPayloadAttempts = 64;

std::optional<std::int64_t> parse_integer(std::string_view s) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return std::nullopt;
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ptr != s.data() + s.size()) return std::nullopt;
  if (ec == std::errc::result_out_of_range) {
    return s.front() == '-' ? std::numeric_limits<std::int64_t>::min() : std::numeric_limits<std::int64_t>::max();
  }
  if (ec != std::errc{}) return std::nullopt;
  return v;
}

std::optional<std::int64_t> coerce_line(const json& value) {
  if (value.is_number_unsigned()) {
    const auto u = value.get<std::uint64_t>();
    return u > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max())
               ? std::numeric_limits<std::int64_t>::max()
               : static_cast<std::int64_t>(u);
  }
  if (value.is_number_integer()) return value.get<std::int64_t>();
  if (value.is_number_float()) {
    const double d = value.get<double>();
    if (!std::isfinite(d) || d != std::floor(d)) return std::nullopt;
    if (d >= 9.0e18) return std::numeric_limits<std::int64_t>::max();
    if (d <= -9.0e18) return std::numeric_limits<std::int64_t>::min();
    return static_cast<std::int64_t>(d);
  }
  if (value.is_string()) return parse_integer(trim(value.get_ref<const std::string&>()));
  return std::nullopt;
}

struct CoercionCounts {
  std::size_t dropped = 0;
  std::size_t coerced = 0;
};

// Turns one loosely-typed element into a comment about `file`, or nullopt to drop it.
std::optional<ReviewComment> coerce_finding(const json& element, const FileEntry& file, bool file_checked,
                                            CoercionCounts& counts) {
  if (!element.is_object()) {
    ++counts.dropped;
    return std::nullopt;
  }
  const auto issue_it = element.find("issue");
  if (issue_it == element.end() || !issue_it->is_string() || trim(issue_it->get_ref<const std::string&>()).empty()) {
    ++counts.dropped;
    return std::nullopt;
  }

  ReviewComment c;
  c.file = file.path;
  c.issue = trim(issue_it->get_ref<const std::string&>());

  if (!file_checked) {
    if (auto f = element.find("file"); f != element.end() && !f->is_null()) {
      if (!f->is_string() || f->get_ref<const std::string&>() != file.path) ++counts.coerced;
    }
  }

  const std::int64_t max_line = std::max<std::int64_t>(1, static_cast<std::int64_t>(file.line_count));
  std::int64_t line = 1;
  if (auto l = element.find("line"); l != element.end()) {
    if (auto v = coerce_line(*l)) {
      line = std::clamp<std::int64_t>(*v, 1, max_line);
      if (line != *v) ++counts.coerced;
    } else {
      ++counts.coerced;
    }
  } else {
    ++counts.coerced;
  }
  c.line = static_cast<std::uint32_t>(std::min<std::int64_t>(line, std::numeric_limits<std::uint32_t>::max()));

  std::optional<Severity> sev;
  if (auto s = element.find("severity"); s != element.end() && s->is_string()) {
    sev = coerce_severity(s->get_ref<const std::string&>());
  }
  if (!sev) ++counts.coerced;
  c.severity = sev.value_or(Severity::medium);

  if (auto s = element.find("suggestion"); s != element.end() && s->is_string()) {
    c.suggestion = trim(s->get_ref<const std::string&>());
  }
  c.id = comment_id(c.file, c.line, c.issue);
  return c;
}

const json* findings_array(const json& payload) {
  if (payload.is_array()) return &payload;
  if (payload.is_object()) {
    if (auto it = payload.find("findings"); it != payload.end() && it->is_array()) return &*it;
  }
  return nullptr;
}

}  // namespace

std::optional<json> extract_json_payload(std::string_view text) {
  const std::string cleaned = strip_fence_lines(text);
  std::string_view view(cleaned);
  std::size_t attempts = 0;
  for (std::size_t pos = view.find_first_of("[{"); pos != std::string_view::npos && attempts < kMaxPayloadAttempts;
       pos = view.find_first_of("[{", pos + 1)) {
    ++attempts;
    const auto end = matching_close(view, pos);
    if (end == std::string_view::npos) continue;
    json parsed = json::parse(view.substr(pos, end - pos), nullptr, false);
    if (parsed.is_discarded()) continue;
    if (parsed.is_array() && !parsed.empty() &&
        std::none_of(parsed.begin(), parsed.end(), [](const json& e) { return e.is_object(); })) {
      continue;
    }
    return parsed;
  }
  return std::nullopt;
}

std::optional<Severity> coerce_severity(std::string_view word) {
  const auto w = to_lower_ascii(trim(word));
  if (w == "blocker" || w == "critical") return Severity::critical;
  if (w == "high" || w == "major" || w == "error" || w == "severe") return Severity::high;
  if (w == "medium" || w == "warning" || w == "moderate") return Severity::medium;
  if (w == "low" || w == "minor" || w == "nit" || w == "nitpick") return Severity::low;
  if (w == "info" || w == "note" || w == "style" || w == "informational") return Severity::info;
  return std::nullopt;
}

ParsedFindings parse_findings(std::string_view text, const FileEntry& file) {
  ParsedFindings out;
  auto payload = extract_json_payload(text);
  const json* array = nullptr;
  json wrapped;
  if (payload) {
    array = findings_array(*payload);
    if (array == nullptr && payload->is_object()) {
      wrapped = json::array({*payload});
      array = &wrapped;
    }
  }
  if (array == nullptr) {
    out.parse_failure = true;
    return out;
  }
  CoercionCounts counts;
  for (const auto& element : *array) {
    if (auto c = coerce_finding(element, file, false, counts)) out.comments.push_back(std::move(*c));
  }
  out.dropped = counts.dropped;
  out.coerced = counts.coerced;
  return out;
}

ReviewComment attach_snippet(ReviewComment comment, const FileEntry& file, std::size_t radius) {
  const auto lines = split_lines(file.content);
  if (lines.empty()) {
    comment.snippet.clear();
    return comment;
  }
  const std::size_t line = std::clamp<std::size_t>(comment.line, 1, lines.size());
  const std::size_t first = line > radius ? line - radius : 1;
  const std::size_t last = std::min(lines.size(), line + radius);
  std::string snippet;
  for (std::size_t n = first; n <= last; ++n) {
    if (n != first) snippet.push_back('\n');
    snippet += fmt::format("{}: {}", n, lines[n - 1]);
  }
  comment.snippet = std::move(snippet);
  return comment;
}

FileReview review_file(const FileEntry& file, const ContextSummary* context, Gateway& gateway) {
  FileReview out;
  std::string text;
  try {
    text = gateway.complete(build_review_prompt(file, context)).text;
  } catch (const ProviderError& e) {
    if (e.kind() == ProviderErrorKind::replay_miss) throw;
    out.failed = true;
    out.failure = e.what();
    return out;
  }
  auto parsed = parse_findings(text, file);
  out.dropped = parsed.dropped;
  out.coerced = parsed.coerced;
  out.parse_failure = parsed.parse_failure;
  out.comments.reserve(parsed.comments.size());
  for (auto& c : parsed.comments) out.comments.push_back(attach_snippet(std::move(c), file));
  return out;
}

CombinedPrompt build_combined_prompt(const std::string& tree_text, const std::vector<FileEntry>& selected,
                                     std::size_t budget_chars) {
  CombinedPrompt out;
  std::string user = "REPOSITORY TREE:\n";
  user += tree_text.empty() ? "(empty)\n" : tree_text;
  if (!user.ends_with('\n')) user += '\n';
  std::size_t used = tree_text.size();
  for (const auto& f : selected) {
    std::string block = fmt::format("\nFILE: {}\nCONTENT:\n{}\n", f.path,
                                    f.content.empty() ? std::string("(empty file)") : number_lines(f.content));
    if (used + block.size() > budget_chars) {
      out.left_out.push_back(&f);
      continue;
    }
    used += block.size();
    user += block;
    out.included.push_back(&f);
  }
  out.messages = {{Role::system, kCombinedSystemPrompt}, {Role::user, std::move(user)}};
  return out;
}

ParsedCombined parse_combined(std::string_view text, const std::vector<const FileEntry*>& files) {
  ParsedCombined out;
  auto payload = extract_json_payload(text);
  if (!payload) {
    out.findings.parse_failure = true;
    return out;
  }
  if (payload->is_object()) {
    if (auto s = payload->find("summary"); s != payload->end() && s->is_string() &&
                                          !trim(s->get_ref<const std::string&>()).empty()) {
      out.summary = trim(s->get_ref<const std::string&>());
    }
  }
  const json* array = findings_array(*payload);
  if (array == nullptr) {
    if (!out.summary) out.findings.parse_failure = true;
    return out;
  }
  CoercionCounts counts;
  for (const auto& element : *array) {
    const FileEntry* target = nullptr;
    bool exact = false;
    if (element.is_object()) {
      if (auto f = element.find("file"); f != element.end() && f->is_string()) {
        std::string_view name = f->get_ref<const std::string&>();
        if (name.starts_with("./")) name.remove_prefix(2);
        auto it = std::find_if(files.begin(), files.end(), [&](const FileEntry* e) { return e->path == name; });
        if (it != files.end()) {
          target = *it;
          exact = true;
        }
      }
    }
    if (target == nullptr && files.size() == 1) {
      target = files.front();
    }
    if (target == nullptr) {
      ++counts.dropped;
      continue;
    }
    if (auto c = coerce_finding(element, *target, exact, counts)) {
      out.findings.comments.push_back(attach_snippet(std::move(*c), *target));
    }
  }
  out.findings.dropped = counts.dropped;
  out.findings.coerced = counts.coerced;
  return out;
}

}  // namespace reporeview
