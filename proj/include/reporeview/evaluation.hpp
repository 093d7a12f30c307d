#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "reporeview/model.hpp"
#include "reporeview/orchestrator.hpp"

namespace reporeview {

/// Bad input detected before any work starts (missing file, unusable output dir).
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EvaluationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One target per line, `URL` or `URL#PRNUMBER`; blank and `#` comment lines ignored.
/// Throws UsageError naming the line on a bad entry.
std::vector<RepoSource> parse_repos_text(std::string_view text);
std::vector<RepoSource> parse_repos_file(const std::filesystem::path& path);

/// Comma separated mode names; throws UsageError on an unknown or empty list.
std::vector<ReviewMode> parse_mode_list(std::string_view text);

enum class RunStatus : std::uint8_t { ok, failed };
std::string_view to_string(RunStatus s);

struct RunRecord {
  std::string run_id;
  RepoSource source;
  ReviewMode mode = ReviewMode::full;
  RunStatus status = RunStatus::failed;
  /// Relative to the experiment directory.
  std::optional<std::string> report_path;
  std::optional<RunStats> stats;
  std::optional<std::string> failure;

  bool operator==(const RunRecord&) const = default;
};

nlohmann::ordered_json to_json(const RunRecord& r);
RunRecord run_record_from_json(const nlohmann::json& j);

inline constexpr const char* kRunsIndex = "runs.json";
inline constexpr const char* kEventsLog = "events.jsonl";
inline constexpr const char* kAnnotationSheet = "annotations.csv";

/// "{owner}-{name}-{mode}-{seq}", seq counting runs of the batch from 1.
std::string make_run_id(const RepoSource& source, ReviewMode mode, std::size_t seq);

using RunDepsFactory = std::function<RunDeps(const std::string& run_id, const RepoSource& source, ReviewMode mode)>;

struct ExperimentConfig {
  std::filesystem::path out_dir;
  bool force = false;
  /// Called after every run, e.g. to print progress.
  std::function<void(const RunRecord&)> on_run;
};

/// Runs repos x modes sequentially into `{out}/{run_id}/`, then writes runs.json and,
/// when at least one run succeeded, annotations.csv. A non-empty out dir is refused
/// unless `force` is set.
std::vector<RunRecord> run_experiment(const std::vector<RepoSource>& repos, const std::vector<ReviewMode>& modes,
                                      const RunDepsFactory& factory, const ExperimentConfig& config);

std::vector<RunRecord> read_runs_index(const std::filesystem::path& runs_dir);

inline constexpr const char* kAnnotationHeader =
    "run_id,finding_id,file,line,system_severity,issue,suggestion,valid,actionable,duplicate_of,annotator_severity,"
    "usefulness";

/// Sheet text for the ok records, one row per finding in report order, grouped by run.
std::string annotation_sheet(const std::vector<RunRecord>& records, const std::map<std::string, ReviewReport>& reports);

/// Reads each ok run's report from `runs_dir` and writes the sheet to `out_path`.
/// Throws EvaluationError when no run is ok.
void export_annotation_sheet(const std::vector<RunRecord>& records, const std::filesystem::path& runs_dir,
                             const std::filesystem::path& out_path);

/// An exact non-negative ratio; den == 0 means undefined.
struct Ratio {
  std::uint64_t num = 0;
  std::uint64_t den = 0;

  bool defined() const noexcept { return den != 0; }
  double value() const noexcept { return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den); }
  bool operator==(const Ratio&) const = default;
};

/// Rounds half away from zero to `decimals` places using integer arithmetic.
std::string format_ratio(const Ratio& r, int decimals);

struct MetricsRow {
  ReviewMode mode = ReviewMode::full;
  std::uint64_t n_runs = 0;
  std::uint64_t n_findings = 0;
  std::uint64_t n_annotated = 0;
  std::uint64_t n_unsure = 0;
  Ratio precision;
  Ratio actionable_rate;
  Ratio duplicate_rate;
  Ratio severity_agreement;
  /// Mean of per-run means, kept as one reduced fraction.
  Ratio top5_usefulness;
  std::uint64_t top5_runs = 0;
  std::optional<double> mean_runtime_s;
  std::optional<double> mean_cost_usd;
};

struct MetricsTable {
  std::vector<MetricsRow> rows;
};

/// Pools annotated findings per mode. Throws EvaluationError naming the row (header is
/// row 1) and, for cell problems, the column.
MetricsTable aggregate(std::string_view annotations_csv, const std::vector<RunRecord>& records,
                       const std::map<std::string, ReviewReport>& reports);
MetricsTable aggregate_files(const std::filesystem::path& annotations_csv, const std::filesystem::path& runs_dir);

inline constexpr const char* kMetricsHeader =
    "mode,n_runs,n_findings,precision,actionable_rate,duplicate_rate,severity_agreement,top5_usefulness,"
    "mean_runtime_s,mean_cost_usd";

std::string metrics_csv(const MetricsTable& table);
std::string metrics_json(const MetricsTable& table);
std::string metrics_tex(const MetricsTable& table);

struct MetricsFiles {
  std::filesystem::path csv;
  std::filesystem::path json;
  std::filesystem::path tex;
};

MetricsFiles export_metrics(const MetricsTable& table, const std::filesystem::path& out_dir);

}  // namespace reporeview
