#pragma once

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "reporeview/clock.hpp"
#include "reporeview/model.hpp"
#include "reporeview/orchestrator.hpp"

namespace httplib {
class Server;
}

namespace reporeview {

enum class JobState : std::uint8_t { queued, running, succeeded, failed };
std::string_view to_string(JobState s);

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path artifact_root = "runs";
  std::size_t max_concurrent_jobs = 4;
  std::vector<std::string> cors_origins{"http://localhost:5173"};
  std::chrono::milliseconds keepalive{15000};
  std::size_t http_threads = 32;

  /// Reads PORT, CORS_ORIGINS (comma separated), MAX_CONCURRENT_JOBS and ARTIFACT_ROOT.
  static ServiceConfig from_env();
};

struct JobRequest {
  RepoSource source;
  ReviewMode mode = ReviewMode::full;
  std::optional<std::string> model_id;
};

/// Validates a POST /reviews body. On failure returns the field-level messages instead.
struct ParsedJobRequest {
  std::optional<JobRequest> request;
  std::map<std::string, std::string> field_errors;
};
ParsedJobRequest parse_job_request(std::string_view body);

/// Builds run dependencies for one job; the service fills in output dir and sink.
using DepsFactory = std::function<RunDeps(const std::string& job_id, const JobRequest& request)>;
using JobIdGenerator = std::function<std::string()>;

/// 16 random hex characters.
std::string random_job_id();

struct JobRecord {
  std::string job_id;
  JobState state = JobState::queued;
  RepoSource source;
  ReviewMode mode = ReviewMode::full;
  Timestamp created_at{};
  std::optional<Timestamp> finished_at;
  std::optional<std::string> error;
  std::vector<ProgressEvent> event_log;
  std::filesystem::path artifact_dir;
};

/// GET /reviews/{id} body: the record without its event log.
nlohmann::ordered_json job_view(const JobRecord& job);

/// Wire form of one SSE event.
std::string sse_progress_frame(const ProgressEvent& event);
std::string sse_terminal_frame(const JobRecord& job);

class ReviewService {
 public:
  ReviewService(ServiceConfig config, DepsFactory factory, std::shared_ptr<Clock> clock,
                JobIdGenerator ids = random_job_id);
  ~ReviewService();
  ReviewService(const ReviewService&) = delete;
  ReviewService& operator=(const ReviewService&) = delete;

  /// Binds the listening socket; false when the address is unavailable. Port 0 picks a
  /// free port, reported by port().
  bool bind();
  /// Serves until stop(). Requires a successful bind().
  void listen();
  /// bind() then listen() on a background thread.
  bool start();
  void stop();
  int port() const noexcept { return port_; }

  enum class SubmitStatus { accepted, invalid, busy };
  struct SubmitResult {
    SubmitStatus status;
    std::string job_id;
    std::map<std::string, std::string> field_errors;
  };
  SubmitResult submit(std::string_view body);
  std::optional<JobRecord> snapshot(const std::string& job_id) const;
  /// Blocks until the job is terminal or the timeout passes; true if terminal.
  bool wait_for(const std::string& job_id, std::chrono::milliseconds timeout) const;

 private:
  struct Job;
  void register_routes();
  void run_job(const std::shared_ptr<Job>& job, JobRequest request);
  std::shared_ptr<Job> find(const std::string& job_id) const;

  ServiceConfig config_;
  DepsFactory factory_;
  std::shared_ptr<Clock> clock_;
  JobIdGenerator ids_;
  std::unique_ptr<httplib::Server> server_;
  int port_ = 0;
  bool bound_ = false;
  std::thread listener_;

  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Job>> jobs_;
  std::vector<std::thread> workers_;
  std::size_t active_ = 0;
  bool stopping_ = false;
};

}  // namespace reporeview
