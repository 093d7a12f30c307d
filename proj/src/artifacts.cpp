#include "reporeview/artifacts.hpp"

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <fstream>

#include <fmt/format.h>

#include "reporeview/text.hpp"

namespace reporeview {

namespace fs = std::filesystem;
using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

ordered_json to_json(const RepoSource& s) {
  return {{"owner", s.owner},
          {"name", s.name},
          {"pr_number", s.pr_number ? ordered_json(*s.pr_number) : ordered_json(nullptr)},
          {"url", s.original_url}};
}

ordered_json to_json(const ReviewComment& c) {
  return {{"id", c.id},
          {"file", c.file},
          {"line", c.line},
          {"severity", to_string(c.severity)},
          {"issue", c.issue},
          {"suggestion", c.suggestion},
          {"snippet", c.snippet}};
}

ordered_json to_json(const SkippedFile& s) { return {{"path", s.path}, {"reason", to_string(s.reason)}}; }

ordered_json to_json(const ContextSummary& c) {
  return {{"text", c.text},
          {"tree_excerpt", c.tree_excerpt},
          {"readme_excerpt", c.readme_excerpt},
          {"preview_paths", c.preview_paths},
          {"truncated", c.truncated}};
}

ordered_json to_json(const RunStats& s) {
  return {{"files_reviewed", s.files_reviewed},
          {"files_skipped", s.files_skipped},
          {"provider_calls", s.provider_calls},
          {"tokens_in", s.tokens_in},
          {"tokens_out", s.tokens_out},
          {"est_cost_usd", s.est_cost_usd},
          {"duration_s", s.duration_s},
          {"parse_failures", s.parse_failures},
          {"retries", s.retries},
          {"review_failures", s.review_failures},
          {"coerced_fields", s.coerced_fields},
          {"dropped_findings", s.dropped_findings},
          {"duplicates_removed", s.duplicates_removed},
          {"context_degraded", s.context_degraded},
          {"summary_degraded", s.summary_degraded},
          {"warnings", s.warnings}};
}

ordered_json to_json(const ReviewReport& r) {
  ordered_json findings = ordered_json::array();
  for (const auto& c : r.findings) findings.push_back(to_json(c));
  ordered_json skipped = ordered_json::array();
  for (const auto& s : r.skipped) skipped.push_back(to_json(s));
  return {{"schema_version", r.schema_version},
          {"source", to_json(r.source)},
          {"mode", to_string(r.mode)},
          {"model_id", r.model_id},
          {"generated_at", format_timestamp(r.generated_at)},
          {"context", r.context ? to_json(*r.context) : ordered_json(nullptr)},
          {"findings", std::move(findings)},
          {"skipped", std::move(skipped)},
          {"summary_text", r.summary_text},
          {"stats", to_json(r.stats)}};
}

ordered_json to_json(const ProgressEvent& e) {
  return {{"job_id", e.job_id},
          {"seq", e.seq},
          {"stage", to_string(e.stage)},
          {"status", to_string(e.status)},
          {"detail", e.detail},
          {"current", e.current ? ordered_json(*e.current) : ordered_json(nullptr)},
          {"total", e.total ? ordered_json(*e.total) : ordered_json(nullptr)},
          {"timestamp", format_timestamp(e.timestamp)}};
}

namespace {

template <typename T, typename Parse>
T parse_enum(const json& j, const char* key, Parse parse) {
  const auto s = j.at(key).get<std::string>();
  auto v = parse(s);
  if (!v) throw ArtifactError(fmt::format("unknown {} value '{}'", key, s));
  return *v;
}

Timestamp parse_time_field(const json& j, const char* key) {
  const auto s = j.at(key).get<std::string>();
  auto t = parse_timestamp(s);
  if (!t) throw ArtifactError(fmt::format("invalid {} timestamp '{}'", key, s));
  return *t;
}

}  // namespace

RepoSource repo_source_from_json(const json& j) {
  RepoSource s;
  s.owner = j.at("owner").get<std::string>();
  s.name = j.at("name").get<std::string>();
  if (!j.at("pr_number").is_null()) s.pr_number = j.at("pr_number").get<int>();
  s.original_url = j.at("url").get<std::string>();
  return s;
}

RunStats run_stats_from_json(const json& j) {
  RunStats s;
  s.files_reviewed = j.at("files_reviewed").get<std::uint64_t>();
  s.files_skipped = j.at("files_skipped").get<std::uint64_t>();
  s.provider_calls = j.at("provider_calls").get<std::uint64_t>();
  s.tokens_in = j.at("tokens_in").get<std::uint64_t>();
  s.tokens_out = j.at("tokens_out").get<std::uint64_t>();
  s.est_cost_usd = j.at("est_cost_usd").get<double>();
  s.duration_s = j.at("duration_s").get<double>();
  s.parse_failures = j.at("parse_failures").get<std::uint64_t>();
  s.retries = j.at("retries").get<std::uint64_t>();
  s.review_failures = j.value("review_failures", std::uint64_t{0});
  s.coerced_fields = j.value("coerced_fields", std::uint64_t{0});
  s.dropped_findings = j.value("dropped_findings", std::uint64_t{0});
  s.duplicates_removed = j.value("duplicates_removed", std::uint64_t{0});
  s.context_degraded = j.value("context_degraded", false);
  s.summary_degraded = j.value("summary_degraded", false);
  s.warnings = j.value("warnings", std::vector<std::string>{});
  return s;
}

ReviewReport report_from_json(const json& j) {
  try {
    ReviewReport r;
    r.schema_version = j.at("schema_version").get<std::string>();
    if (r.schema_version != kSchemaVersion) {
      throw ArtifactError(fmt::format("unsupported schema_version '{}'", r.schema_version));
    }
    r.source = repo_source_from_json(j.at("source"));
    r.mode = parse_enum<ReviewMode>(j, "mode", mode_from_string);
    r.model_id = j.at("model_id").get<std::string>();
    r.generated_at = parse_time_field(j, "generated_at");
    if (const auto& c = j.at("context"); !c.is_null()) {
      ContextSummary ctx;
      ctx.text = c.at("text").get<std::string>();
      ctx.tree_excerpt = c.at("tree_excerpt").get<std::string>();
      ctx.readme_excerpt = c.at("readme_excerpt").get<std::string>();
      ctx.preview_paths = c.at("preview_paths").get<std::vector<std::string>>();
      ctx.truncated = c.at("truncated").get<bool>();
      r.context = std::move(ctx);
    }
    for (const auto& f : j.at("findings")) {
      ReviewComment c;
      c.id = f.at("id").get<std::string>();
      c.file = f.at("file").get<std::string>();
      c.line = f.at("line").get<std::uint32_t>();
      c.severity = parse_enum<Severity>(f, "severity", severity_from_string);
      c.issue = f.at("issue").get<std::string>();
      c.suggestion = f.at("suggestion").get<std::string>();
      c.snippet = f.at("snippet").get<std::string>();
      r.findings.push_back(std::move(c));
    }
    for (const auto& s : j.at("skipped")) {
      r.skipped.push_back({s.at("path").get<std::string>(),
                           parse_enum<SkipReason>(s, "reason", skip_reason_from_string)});
    }
    r.summary_text = j.at("summary_text").get<std::string>();
    r.stats = run_stats_from_json(j.at("stats"));
    return r;
  } catch (const json::exception& e) {
    throw ArtifactError(std::string("malformed review.json: ") + e.what());
  }
}

ProgressEvent progress_event_from_json(const json& j) {
  ProgressEvent e;
  e.job_id = j.at("job_id").get<std::string>();
  e.seq = j.at("seq").get<std::uint64_t>();
  e.stage = parse_enum<Stage>(j, "stage", stage_from_string);
  e.status = parse_enum<StageStatus>(j, "status", stage_status_from_string);
  e.detail = j.at("detail").get<std::string>();
  if (!j.at("current").is_null()) e.current = j.at("current").get<std::uint64_t>();
  if (!j.at("total").is_null()) e.total = j.at("total").get<std::uint64_t>();
  e.timestamp = parse_time_field(j, "timestamp");
  return e;
}

std::string serialize_report(const ReviewReport& report) {
  return to_json(report).dump(2, ' ', false, json::error_handler_t::replace) + "\n";
}

ReviewReport read_report(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArtifactError("cannot open " + path.string());
  const json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ArtifactError(path.string() + " is not valid JSON");
  return report_from_json(j);
}

std::string serialize_event(const ProgressEvent& event) {
  return to_json(event).dump(-1, ' ', false, json::error_handler_t::replace);
}

void atomic_write(const fs::path& path, std::string_view bytes) {
  static std::atomic<unsigned> counter{0};
  const fs::path tmp = path.parent_path() / fmt::format(".{}.tmp-{}-{}", path.filename().string(), ::getpid(), counter++);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ArtifactError(fmt::format("cannot write artifacts in {}", path.parent_path().string()));
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw ArtifactError(fmt::format("failed writing {}", tmp.string()));
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw ArtifactError(fmt::format("cannot replace {}: {}", path.string(), ec.message()));
  }
}

namespace {

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw ArtifactError(fmt::format("cannot create artifact directory {}: {}", dir.string(), ec.message()));
  }
}

void require_valid(const ReviewReport& report) {
  const auto violations = validate_report(report);
  if (!violations.empty()) {
    std::string joined;
    for (const auto& v : violations) joined += "\n  " + v;
    throw ArtifactError("refusing to write an invalid report:" + joined);
  }
}

std::string one_line(std::string_view s) {
  std::string out(s);
  std::replace(out.begin(), out.end(), '\n', ' ');
  std::replace(out.begin(), out.end(), '\r', ' ');
  return out;
}

// A fence longer than any backtick run inside the snippet.
std::string fence_for(std::string_view body) {
  std::size_t longest = 0;
  std::size_t run = 0;
  for (char c : body) {
    run = c == '`' ? run + 1 : 0;
    longest = std::max(longest, run);
  }
  return std::string(std::max<std::size_t>(3, longest + 1), '`');
}

std::string format_seconds(double s) { return fmt::format("{:.1f} s", s); }

}  // namespace

fs::path write_json_report(const ReviewReport& report, const fs::path& dir) {
  require_valid(report);
  ensure_dir(dir);
  const auto path = dir / kJsonArtifact;
  atomic_write(path, serialize_report(report));
  return path;
}

std::string render_markdown(const ReviewReport& report) {
  std::string md;
  md += fmt::format("# Code review: {}/{}", report.source.owner, report.source.name);
  if (report.source.pr_number) md += fmt::format(" (PR #{})", *report.source.pr_number);
  md += "\n\n";
  md += fmt::format("- Mode: {}\n", to_string(report.mode));
  md += fmt::format("- Model: {}\n", report.model_id.empty() ? "(unspecified)" : report.model_id);
  md += fmt::format("- Generated: {}\n", format_timestamp(report.generated_at));
  md += fmt::format("- Duration: {}\n", format_seconds(report.stats.duration_s));
  md += fmt::format("- Estimated cost: ${:.4f}\n", report.stats.est_cost_usd);
  md += fmt::format("- Files reviewed: {}, skipped: {}\n", report.stats.files_reviewed, report.stats.files_skipped);

  md += "\n## Summary\n\n";
  md += report.summary_text.empty() ? "(no summary)" : report.summary_text;
  md += "\n\n## Findings\n";
  if (report.findings.empty()) md += "\nNo findings.\n";
  for (auto sev : kSeveritiesDescending) {
    const bool any = std::any_of(report.findings.begin(), report.findings.end(),
                                 [&](const ReviewComment& c) { return c.severity == sev; });
    if (!any) continue;
    md += fmt::format("\n### {}\n\n", display_name(sev));
    for (const auto& c : report.findings) {
      if (c.severity != sev) continue;
      md += fmt::format("- **{}:{}** — {}\n", c.file, c.line, one_line(c.issue));
      if (!c.suggestion.empty()) md += fmt::format("  Suggestion: {}\n", one_line(c.suggestion));
      if (!c.snippet.empty()) {
        const auto fence = fence_for(c.snippet);
        md += "\n  " + fence + "\n";
        for (auto line : split_lines(c.snippet)) {
          md += "  ";
          md += line;
          md += '\n';
        }
        md += "  " + fence + "\n";
      }
    }
  }

  md += "\n## Skipped Files\n\n";
  if (report.skipped.empty()) {
    md += "No files skipped.\n";
  } else {
    md += "| Reason | Count |\n|---|---|\n";
    for (auto reason : kAllSkipReasons) {
      const auto n = std::count_if(report.skipped.begin(), report.skipped.end(),
                                   [&](const SkippedFile& s) { return s.reason == reason; });
      if (n > 0) md += fmt::format("| {} | {} |\n", to_string(reason), n);
    }
    md += "\n";
    for (const auto& s : report.skipped) md += fmt::format("- `{}` ({})\n", s.path, to_string(s.reason));
  }
  return md;
}

ArtifactPaths write_all(const ReviewReport& report, const fs::path& dir) {
  require_valid(report);
  ensure_dir(dir);
  ArtifactPaths paths{dir / kJsonArtifact, dir / kMarkdownArtifact};
  atomic_write(paths.json_path, serialize_report(report));
  atomic_write(paths.md_path, render_markdown(report));
  return paths;
}

}  // namespace reporeview
