#include "reporeview/evaluation.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "reporeview/artifacts.hpp"
#include "reporeview/csv.hpp"
#include "reporeview/text.hpp"

namespace reporeview {

namespace fs = std::filesystem;
using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError(fmt::format("cannot read {}", path.string()));
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

std::vector<RepoSource> parse_repos_text(std::string_view text) {
  std::vector<RepoSource> out;
  std::size_t line_no = 0;
  for (auto raw : split_lines(text)) {
    ++line_no;
    const auto line = trim(raw);
    if (line.empty() || line.starts_with('#')) continue;
    std::string url = line;
    std::optional<int> pr;
    if (const auto hash = line.rfind('#'); hash != std::string::npos) {
      url = trim(line.substr(0, hash));
      const auto num = trim(line.substr(hash + 1));
      int value = 0;
      const bool digits = !num.empty() && num.size() <= 9 &&
                          std::all_of(num.begin(), num.end(), [](char c) { return c >= '0' && c <= '9'; });
      if (digits) value = std::stoi(num);
      if (!digits || value <= 0) throw UsageError(fmt::format("repos line {}: invalid PR number '{}'", line_no, num));
      pr = value;
    }
    try {
      out.push_back(parse_repo_url(url, pr));
    } catch (const UrlParseError& e) {
      throw UsageError(fmt::format("repos line {}: {}", line_no, e.what()));
    }
  }
  return out;
}

std::vector<RepoSource> parse_repos_file(const fs::path& path) {
  if (!fs::is_regular_file(path)) throw UsageError(fmt::format("repos file {} not found", path.string()));
  return parse_repos_text(read_text(path));
}

std::vector<ReviewMode> parse_mode_list(std::string_view text) {
  std::vector<ReviewMode> modes;
  std::stringstream in{std::string(text)};
  for (std::string item; std::getline(in, item, ',');) {
    const auto name = trim(item);
    if (name.empty()) continue;
    const auto mode = mode_from_string(name);
    if (!mode) throw UsageError(fmt::format("unknown mode '{}'", name));
    if (std::find(modes.begin(), modes.end(), *mode) == modes.end()) modes.push_back(*mode);
  }
  if (modes.empty()) throw UsageError("no modes given");
  return modes;
}

std::string_view to_string(RunStatus s) { return s == RunStatus::ok ? "ok" : "failed"; }

ordered_json to_json(const RunRecord& r) {
  return {{"run_id", r.run_id},
          {"source", to_json(r.source)},
          {"mode", to_string(r.mode)},
          {"status", to_string(r.status)},
          {"report_path", r.report_path ? ordered_json(*r.report_path) : ordered_json(nullptr)},
          {"stats", r.stats ? to_json(*r.stats) : ordered_json(nullptr)},
          {"failure", r.failure ? ordered_json(*r.failure) : ordered_json(nullptr)}};
}

RunRecord run_record_from_json(const json& j) {
  RunRecord r;
  r.run_id = j.at("run_id").get<std::string>();
  r.source = repo_source_from_json(j.at("source"));
  const auto mode = mode_from_string(j.at("mode").get<std::string>());
  if (!mode) throw EvaluationError(fmt::format("run {}: unknown mode", r.run_id));
  r.mode = *mode;
  const auto status = j.at("status").get<std::string>();
  if (status != "ok" && status != "failed") throw EvaluationError(fmt::format("run {}: unknown status", r.run_id));
  r.status = status == "ok" ? RunStatus::ok : RunStatus::failed;
  if (!j.at("report_path").is_null()) r.report_path = j.at("report_path").get<std::string>();
  if (!j.at("stats").is_null()) r.stats = run_stats_from_json(j.at("stats"));
  if (!j.at("failure").is_null()) r.failure = j.at("failure").get<std::string>();
  return r;
}

std::string make_run_id(const RepoSource& source, ReviewMode mode, std::size_t seq) {
  return fmt::format("{}-{}-{}-{}", source.owner, source.name, to_string(mode), seq);
}

std::vector<RunRecord> run_experiment(const std::vector<RepoSource>& repos, const std::vector<ReviewMode>& modes,
                                      const RunDepsFactory& factory, const ExperimentConfig& config) {
  if (repos.empty()) throw UsageError("no repositories to run");
  if (modes.empty()) throw UsageError("no modes given");
  if (config.out_dir.empty()) throw UsageError("no output directory given");
  std::error_code ec;
  if (fs::exists(config.out_dir, ec) && !fs::is_empty(config.out_dir, ec) && !config.force) {
    throw UsageError(fmt::format("output directory {} is not empty (use --force to reuse it)", config.out_dir.string()));
  }
  fs::create_directories(config.out_dir, ec);
  if (ec) throw UsageError(fmt::format("cannot create {}: {}", config.out_dir.string(), ec.message()));

  std::vector<RunRecord> records;
  std::size_t seq = 0;
  for (const auto& source : repos) {
    for (auto mode : modes) {
      RunRecord rec;
      rec.run_id = make_run_id(source, mode, ++seq);
      rec.source = source;
      rec.mode = mode;
      const fs::path run_dir = config.out_dir / rec.run_id;
      std::vector<ProgressEvent> events;
      try {
        fs::create_directories(run_dir);
        RunDeps deps = factory(rec.run_id, source, mode);
        deps.output_dir = run_dir;
        deps.sink = [&events](const ProgressEvent& e) { events.push_back(e); };
        const auto result = run_review(source, mode, deps);
        if (result.ok) {
          rec.status = RunStatus::ok;
          rec.report_path = (fs::path(rec.run_id) / kJsonArtifact).generic_string();
          rec.stats = result.report->stats;
        } else {
          rec.failure = result.error;
        }
      } catch (const std::exception& e) {
        rec.status = RunStatus::failed;
        rec.failure = e.what();
      }
      std::string log;
      for (const auto& e : events) log += serialize_event(e) + "\n";
      try {
        atomic_write(run_dir / kEventsLog, log);
      } catch (const std::exception& e) {
        if (!rec.failure) rec.failure = e.what();
        rec.status = RunStatus::failed;
        rec.report_path.reset();
      }
      if (config.on_run) config.on_run(rec);
      records.push_back(std::move(rec));
    }
  }

  ordered_json index = ordered_json::array();
  for (const auto& r : records) index.push_back(to_json(r));
  atomic_write(config.out_dir / kRunsIndex, index.dump(2) + "\n");
  const bool any_ok = std::any_of(records.begin(), records.end(), [](const RunRecord& r) { return r.status == RunStatus::ok; });
  if (any_ok) export_annotation_sheet(records, config.out_dir, config.out_dir / kAnnotationSheet);
  return records;
}

std::vector<RunRecord> read_runs_index(const fs::path& runs_dir) {
  const auto path = runs_dir / kRunsIndex;
  if (!fs::is_regular_file(path)) throw UsageError(fmt::format("runs index {} not found", path.string()));
  const json j = json::parse(read_text(path), nullptr, false);
  if (j.is_discarded() || !j.is_array()) throw EvaluationError(fmt::format("{} is not a JSON array", path.string()));
  std::vector<RunRecord> out;
  try {
    for (const auto& item : j) out.push_back(run_record_from_json(item));
  } catch (const json::exception& e) {
    throw EvaluationError(fmt::format("{}: {}", path.string(), e.what()));
  }
  return out;
}

namespace {

std::string escape_newlines(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\r') {
      if (i + 1 < s.size() && s[i + 1] == '\n') ++i;
      out += "\\n";
    } else if (s[i] == '\n') {
      out += "\\n";
    } else {
      out += s[i];
    }
  }
  return out;
}

std::map<std::string, ReviewReport> load_ok_reports(const std::vector<RunRecord>& records, const fs::path& runs_dir) {
  std::map<std::string, ReviewReport> reports;
  for (const auto& r : records) {
    if (r.status != RunStatus::ok || !r.report_path) continue;
    try {
      reports.emplace(r.run_id, read_report(runs_dir / *r.report_path));
    } catch (const ArtifactError& e) {
      throw EvaluationError(fmt::format("run {}: {}", r.run_id, e.what()));
    }
  }
  return reports;
}

}  // namespace

std::string annotation_sheet(const std::vector<RunRecord>& records, const std::map<std::string, ReviewReport>& reports) {
  std::string out = std::string(kAnnotationHeader) + "\n";
  for (const auto& r : records) {
    if (r.status != RunStatus::ok) continue;
    auto it = reports.find(r.run_id);
    if (it == reports.end()) throw EvaluationError(fmt::format("run {}: report not loaded", r.run_id));
    for (const auto& c : it->second.findings) {
      out += fmt::format("{},{},{},{},{},{},{},,,,,\n", csv_field(r.run_id), csv_field(c.id), csv_field(c.file), c.line,
                         to_string(c.severity), csv_field(escape_newlines(c.issue), true),
                         csv_field(escape_newlines(c.suggestion), true));
    }
  }
  return out;
}

void export_annotation_sheet(const std::vector<RunRecord>& records, const fs::path& runs_dir, const fs::path& out_path) {
  const bool any_ok = std::any_of(records.begin(), records.end(), [](const RunRecord& r) { return r.status == RunStatus::ok; });
  if (!any_ok) throw EvaluationError("no successful runs to export");
  atomic_write(out_path, annotation_sheet(records, load_ok_reports(records, runs_dir)));
}

std::string format_ratio(const Ratio& r, int decimals) {
  if (!r.defined()) return "--";
  std::uint64_t scale = 1;
  for (int i = 0; i < decimals; ++i) scale *= 10;
  const auto scaled = static_cast<unsigned __int128>(r.num) * scale;
  auto q = static_cast<std::uint64_t>(scaled / r.den);
  const auto rem = static_cast<std::uint64_t>(scaled % r.den);
  if (static_cast<unsigned __int128>(rem) * 2 >= r.den) ++q;
  if (decimals == 0) return fmt::format("{}", q);
  return fmt::format("{}.{:0{}}", q / scale, q % scale, decimals);
}

namespace {

Ratio reduced(std::uint64_t num, std::uint64_t den) {
  if (den == 0) return {};
  const auto g = std::gcd(num, den);
  return {num / (g == 0 ? 1 : g), den / (g == 0 ? 1 : g)};
}

Ratio add(const Ratio& a, const Ratio& b) {
  if (a.den == 0) return b;
  if (b.den == 0) return a;
  const auto l = std::lcm(a.den, b.den);
  return reduced(a.num * (l / a.den) + b.num * (l / b.den), l);
}

enum Column : std::size_t {
  kRunId,
  kFindingId,
  kFile,
  kLine,
  kSystemSeverity,
  kIssue,
  kSuggestion,
  kValid,
  kActionable,
  kDuplicateOf,
  kAnnotatorSeverity,
  kUsefulness,
  kColumnCount
};

const std::vector<std::string>& column_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    std::stringstream in(kAnnotationHeader);
    for (std::string s; std::getline(in, s, ',');) v.push_back(s);
    return v;
  }();
  return names;
}

[[noreturn]] void cell_error(std::size_t row, Column col, const std::string& what) {
  throw EvaluationError(fmt::format("row {}, column {}: {}", row, column_names()[col], what));
}

struct Annotation {
  std::string run_id;
  std::string finding_id;
  Severity system_severity = Severity::info;
  bool annotated = false;
  std::string valid;
  bool actionable = false;
  bool duplicate = false;
  std::optional<Severity> annotator_severity;
  std::optional<int> usefulness;
};

}  // namespace

MetricsTable aggregate(std::string_view annotations_csv, const std::vector<RunRecord>& records,
                       const std::map<std::string, ReviewReport>& reports) {
  std::vector<std::vector<std::string>> rows;
  try {
    rows = parse_csv(annotations_csv);
  } catch (const CsvError& e) {
    throw EvaluationError(e.what());
  }
  if (rows.empty()) throw EvaluationError("annotation sheet has no rows");
  if (rows.front() != column_names()) throw EvaluationError("row 1: header does not match the annotation sheet format");
  if (rows.size() == 1) throw EvaluationError("annotation sheet has no rows");

  std::map<std::string, const RunRecord*> by_id;
  for (const auto& r : records) by_id.emplace(r.run_id, &r);

  std::vector<Annotation> annotations;
  std::set<std::pair<std::string, std::string>> seen;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const std::size_t row = i + 1;
    const auto& cells = rows[i];
    if (cells.size() != kColumnCount) {
      throw EvaluationError(fmt::format("row {}: expected {} columns, found {}", row, kColumnCount, cells.size()));
    }
    Annotation a;
    a.run_id = cells[kRunId];
    auto rec = by_id.find(a.run_id);
    if (rec == by_id.end()) cell_error(row, kRunId, fmt::format("unknown run '{}'", a.run_id));
    if (rec->second->status != RunStatus::ok) cell_error(row, kRunId, fmt::format("run '{}' did not succeed", a.run_id));
    const auto rep = reports.find(a.run_id);
    if (rep == reports.end()) cell_error(row, kRunId, fmt::format("no report for run '{}'", a.run_id));
    const auto& findings = rep->second.findings;
    auto has_finding = [&](const std::string& id) {
      return std::any_of(findings.begin(), findings.end(), [&](const ReviewComment& c) { return c.id == id; });
    };
    a.finding_id = cells[kFindingId];
    if (!has_finding(a.finding_id)) {
      cell_error(row, kFindingId, fmt::format("unknown finding '{}' in run '{}'", a.finding_id, a.run_id));
    }
    if (!seen.emplace(a.run_id, a.finding_id).second) cell_error(row, kFindingId, "finding annotated twice");
    const auto& line = cells[kLine];
    if (line.empty() || line.size() > 9 || !std::all_of(line.begin(), line.end(), [](char c) { return c >= '0' && c <= '9'; }) ||
        std::stoul(line) == 0) {
      cell_error(row, kLine, fmt::format("'{}' is not a positive integer", line));
    }
    const auto sys = severity_from_string(trim(cells[kSystemSeverity]));
    if (!sys) cell_error(row, kSystemSeverity, fmt::format("unknown severity '{}'", cells[kSystemSeverity]));
    a.system_severity = *sys;

    a.valid = to_lower_ascii(trim(cells[kValid]));
    const auto actionable = to_lower_ascii(trim(cells[kActionable]));
    const auto duplicate_of = trim(cells[kDuplicateOf]);
    const auto annotator = to_lower_ascii(trim(cells[kAnnotatorSeverity]));
    const auto usefulness = trim(cells[kUsefulness]);
    a.annotated = !a.valid.empty();
    if (!a.annotated) {
      if (!actionable.empty() || !duplicate_of.empty() || !annotator.empty() || !usefulness.empty()) {
        cell_error(row, kValid, "blank while other annotation columns are filled");
      }
      annotations.push_back(std::move(a));
      continue;
    }
    if (a.valid != "yes" && a.valid != "no" && a.valid != "unsure") {
      cell_error(row, kValid, fmt::format("'{}' is not yes, no or unsure", cells[kValid]));
    }
    if (actionable != "yes" && actionable != "no") {
      cell_error(row, kActionable, actionable.empty() ? "required for annotated rows"
                                                      : fmt::format("'{}' is not yes or no", cells[kActionable]));
    }
    a.actionable = actionable == "yes";
    if (!duplicate_of.empty()) {
      if (duplicate_of == a.finding_id) cell_error(row, kDuplicateOf, "a finding cannot duplicate itself");
      if (!has_finding(duplicate_of)) {
        cell_error(row, kDuplicateOf, fmt::format("unknown finding '{}' in run '{}'", duplicate_of, a.run_id));
      }
      a.duplicate = true;
    }
    if (!annotator.empty()) {
      a.annotator_severity = severity_from_string(annotator);
      if (!a.annotator_severity) cell_error(row, kAnnotatorSeverity, fmt::format("unknown severity '{}'", annotator));
    }
    if (!usefulness.empty()) {
      if (usefulness.size() != 1 || usefulness[0] < '1' || usefulness[0] > '5') {
        cell_error(row, kUsefulness, fmt::format("'{}' is not an integer from 1 to 5", usefulness));
      }
      a.usefulness = usefulness[0] - '0';
    }
    annotations.push_back(std::move(a));
  }

  MetricsTable table;
  for (auto mode : kAllModes) {
    const bool present = std::any_of(records.begin(), records.end(), [&](const RunRecord& r) { return r.mode == mode; });
    if (!present) continue;
    MetricsRow m;
    m.mode = mode;
    std::uint64_t yes = 0, judged = 0, actionable = 0, duplicates = 0, agree = 0, rated = 0;
    for (const auto& a : annotations) {
      if (by_id.at(a.run_id)->mode != mode) continue;
      ++m.n_findings;
      if (!a.annotated) continue;
      ++m.n_annotated;
      if (a.valid == "unsure") {
        ++m.n_unsure;
      } else {
        ++judged;
        if (a.valid == "yes") ++yes;
      }
      if (a.actionable) ++actionable;
      if (a.duplicate) ++duplicates;
      if (a.annotator_severity) {
        ++rated;
        if (*a.annotator_severity == a.system_severity) ++agree;
      }
    }
    m.precision = {yes, judged};
    m.actionable_rate = {actionable, m.n_annotated};
    m.duplicate_rate = {duplicates, m.n_annotated};
    m.severity_agreement = {agree, rated};

    Ratio sum;
    double runtime = 0.0, cost = 0.0;
    std::uint64_t timed = 0;
    for (const auto& r : records) {
      if (r.mode != mode || r.status != RunStatus::ok) continue;
      ++m.n_runs;
      if (r.stats) {
        runtime += r.stats->duration_s;
        cost += r.stats->est_cost_usd;
        ++timed;
      }
      const auto rep = reports.find(r.run_id);
      if (rep == reports.end()) continue;
      std::uint64_t total = 0, count = 0;
      const auto& findings = rep->second.findings;
      for (std::size_t k = 0; k < std::min<std::size_t>(5, findings.size()); ++k) {
        auto it = std::find_if(annotations.begin(), annotations.end(), [&](const Annotation& a) {
          return a.run_id == r.run_id && a.finding_id == findings[k].id;
        });
        if (it != annotations.end() && it->usefulness) {
          total += static_cast<std::uint64_t>(*it->usefulness);
          ++count;
        }
      }
      if (count == 0) continue;
      sum = add(sum, reduced(total, count));
      ++m.top5_runs;
    }
    if (m.top5_runs > 0) m.top5_usefulness = reduced(sum.num, sum.den * m.top5_runs);
    if (timed > 0) {
      m.mean_runtime_s = runtime / static_cast<double>(timed);
      m.mean_cost_usd = cost / static_cast<double>(timed);
    }
    table.rows.push_back(m);
  }
  return table;
}

MetricsTable aggregate_files(const fs::path& annotations_csv, const fs::path& runs_dir) {
  if (!fs::is_regular_file(annotations_csv)) {
    throw UsageError(fmt::format("annotations file {} not found", annotations_csv.string()));
  }
  const auto records = read_runs_index(runs_dir);
  return aggregate(read_text(annotations_csv), records, load_ok_reports(records, runs_dir));
}

namespace {

std::string fixed_or_dash(const std::optional<double>& v, int decimals) {
  return v ? fmt::format("{:.{}f}", *v, decimals) : std::string("--");
}

std::vector<std::string> row_cells(const MetricsRow& m) {
  return {std::string(to_string(m.mode)),
          std::to_string(m.n_runs),
          std::to_string(m.n_findings),
          format_ratio(m.precision, 3),
          format_ratio(m.actionable_rate, 3),
          format_ratio(m.duplicate_rate, 3),
          format_ratio(m.severity_agreement, 3),
          format_ratio(m.top5_usefulness, 3),
          fixed_or_dash(m.mean_runtime_s, 1),
          fixed_or_dash(m.mean_cost_usd, 4)};
}

ordered_json ratio_json(const Ratio& r) { return r.defined() ? ordered_json(r.value()) : ordered_json(nullptr); }

std::string tex_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '_' || c == '%' || c == '&' || c == '#' || c == '$') out += '\\';
    out += c;
  }
  return out;
}

}  // namespace

std::string metrics_csv(const MetricsTable& table) {
  std::string out = std::string(kMetricsHeader) + "\n";
  for (const auto& m : table.rows) {
    const auto cells = row_cells(m);
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i > 0) out += ',';
      out += csv_field(cells[i]);
    }
    out += '\n';
  }
  return out;
}

std::string metrics_json(const MetricsTable& table) {
  ordered_json rows = ordered_json::array();
  for (const auto& m : table.rows) {
    rows.push_back({{"mode", to_string(m.mode)},
                    {"n_runs", m.n_runs},
                    {"n_findings", m.n_findings},
                    {"precision", ratio_json(m.precision)},
                    {"actionable_rate", ratio_json(m.actionable_rate)},
                    {"duplicate_rate", ratio_json(m.duplicate_rate)},
                    {"severity_agreement", ratio_json(m.severity_agreement)},
                    {"top5_usefulness", ratio_json(m.top5_usefulness)},
                    {"mean_runtime_s", m.mean_runtime_s ? ordered_json(*m.mean_runtime_s) : ordered_json(nullptr)},
                    {"mean_cost_usd", m.mean_cost_usd ? ordered_json(*m.mean_cost_usd) : ordered_json(nullptr)},
                    {"denominators",
                     {{"annotated", m.n_annotated},
                      {"unsure", m.n_unsure},
                      {"judged", m.precision.den},
                      {"severity_rated", m.severity_agreement.den},
                      {"top5_runs", m.top5_runs}}}});
  }
  return rows.dump(2) + "\n";
}

std::string metrics_tex(const MetricsTable& table) {
  std::string out = "\\begin{tabular}{lrrrrrrrrr}\n\\toprule\n";
  out += "Mode & Runs & Findings & Precision & Actionable & Duplicate & Sev.\\ agree. & Top-5 useful. & Runtime (s) & "
         "Cost (USD) \\\\\n\\midrule\n";
  for (const auto& m : table.rows) {
    const auto cells = row_cells(m);
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i > 0) out += " & ";
      out += tex_escape(cells[i]);
    }
    out += " \\\\\n";
  }
  out += "\\bottomrule\n\\end{tabular}\n";
  return out;
}

MetricsFiles export_metrics(const MetricsTable& table, const fs::path& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw EvaluationError(fmt::format("cannot create {}: {}", out_dir.string(), ec.message()));
  MetricsFiles files{out_dir / "metrics.csv", out_dir / "metrics.json", out_dir / "metrics.tex"};
  atomic_write(files.csv, metrics_csv(table));
  atomic_write(files.json, metrics_json(table));
  atomic_write(files.tex, metrics_tex(table));
  return files;
}

}  // namespace reporeview
