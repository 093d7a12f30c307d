#include "reporeview/service.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>

#include <fmt/format.h>
#include <httplib.h>
#include <spdlog/spdlog.h>

#include "reporeview/artifacts.hpp"
#include "reporeview/text.hpp"

#ifndef REPOREVIEW_VERSION
#define REPOREVIEW_VERSION "0.0.0"
#endif

namespace reporeview {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::string_view to_string(JobState s) {
  switch (s) {
    case JobState::queued: return "queued";
    case JobState::running: return "running";
    case JobState::succeeded: return "succeeded";
    case JobState::failed: return "failed";
  }
  return "unknown";
}

ServiceConfig ServiceConfig::from_env() {
  ServiceConfig c;
  auto env = [](const char* name) -> std::optional<std::string> {
    const char* v = std::getenv(name);
    if (v == nullptr || *v == '\0') return std::nullopt;
    return std::string(v);
  };
  if (auto v = env("PORT")) c.port = std::stoi(*v);
  if (auto v = env("MAX_CONCURRENT_JOBS")) c.max_concurrent_jobs = std::stoul(*v);
  if (auto v = env("ARTIFACT_ROOT")) c.artifact_root = *v;
  if (auto v = env("CORS_ORIGINS")) {
    c.cors_origins.clear();
    std::stringstream in(*v);
    for (std::string item; std::getline(in, item, ',');) {
      if (auto t = trim(item); !t.empty()) c.cors_origins.push_back(t);
    }
  }
  return c;
}

ParsedJobRequest parse_job_request(std::string_view body) {
  ParsedJobRequest out;
  const json j = json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    out.field_errors["body"] = "request body must be a JSON object";
    return out;
  }
  std::optional<int> pr;
  if (auto it = j.find("pr_number"); it != j.end() && !it->is_null()) {
    if (!it->is_number_integer() || it->get<std::int64_t>() <= 0 || it->get<std::int64_t>() > INT32_MAX) {
      out.field_errors["pr_number"] = "must be a positive integer";
    } else {
      pr = it->get<int>();
    }
  }
  JobRequest req;
  if (auto it = j.find("repo_url"); it == j.end() || !it->is_string()) {
    out.field_errors["repo_url"] = "required string";
  } else {
    try {
      req.source = parse_repo_url(it->get<std::string>(), pr);
    } catch (const UrlParseError& e) {
      out.field_errors["repo_url"] = e.what();
    }
  }
  if (auto it = j.find("mode"); it != j.end() && !it->is_null()) {
    std::optional<ReviewMode> mode;
    if (it->is_string()) mode = mode_from_string(it->get<std::string>());
    if (mode) {
      req.mode = *mode;
    } else {
      out.field_errors["mode"] = "must be one of full, single_agent, no_context, no_priority";
    }
  }
  if (auto it = j.find("model_id"); it != j.end() && !it->is_null()) {
    if (!it->is_string() || trim(it->get<std::string>()).empty()) {
      out.field_errors["model_id"] = "must be a nonempty string";
    } else {
      req.model_id = trim(it->get<std::string>());
    }
  }
  if (out.field_errors.empty()) out.request = std::move(req);
  return out;
}

std::string random_job_id() {
  static thread_local std::mt19937_64 rng{std::random_device{}()};
  return fmt::format("{:016x}", rng());
}

ordered_json job_view(const JobRecord& job) {
  return {{"job_id", job.job_id},
          {"state", to_string(job.state)},
          {"source", to_json(job.source)},
          {"mode", to_string(job.mode)},
          {"created_at", format_timestamp(job.created_at)},
          {"finished_at", job.finished_at ? ordered_json(format_timestamp(*job.finished_at)) : ordered_json(nullptr)},
          {"error", job.error ? ordered_json(*job.error) : ordered_json(nullptr)},
          {"artifact_dir", job.artifact_dir.string()},
          {"events", job.event_log.size()}};
}

std::string sse_progress_frame(const ProgressEvent& event) {
  return fmt::format("id: {}\nevent: progress\ndata: {}\n\n", event.seq, serialize_event(event));
}

std::string sse_terminal_frame(const JobRecord& job) {
  if (job.state == JobState::succeeded) {
    ordered_json data{{"job_id", job.job_id}, {"state", "succeeded"}};
    return fmt::format("event: done\ndata: {}\n\n", data.dump());
  }
  std::string frame = "event: error\n";
  const std::string error = job.error.value_or("job failed");
  for (auto line : split_lines(error)) frame += fmt::format("data: {}\n", line);
  return frame + "\n";
}

struct ReviewService::Job {
  mutable std::mutex mutex;
  mutable std::condition_variable changed;
  JobRecord record;
  bool watchers_released = false;

  bool terminal() const { return record.state == JobState::succeeded || record.state == JobState::failed; }
};

ReviewService::ReviewService(ServiceConfig config, DepsFactory factory, std::shared_ptr<Clock> clock,
                             JobIdGenerator ids)
    : config_(std::move(config)),
      factory_(std::move(factory)),
      clock_(std::move(clock)),
      ids_(std::move(ids)),
      server_(std::make_unique<httplib::Server>()) {
  const auto threads = config_.http_threads;
  server_->new_task_queue = [threads] { return new httplib::ThreadPool(threads); };
  server_->set_keep_alive_timeout(1);
  // httplib defaults to SO_REUSEPORT, which lets a second server share a busy port.
  server_->set_socket_options([](socket_t sock) {
    int yes = 1;
    ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  });
  register_routes();
}

ReviewService::~ReviewService() { stop(); }

bool ReviewService::bind() {
  if (bound_) return true;
  if (config_.port == 0) {
    port_ = server_->bind_to_any_port(config_.host);
    bound_ = port_ > 0;
  } else {
    bound_ = server_->bind_to_port(config_.host, config_.port);
    if (bound_) port_ = config_.port;
  }
  return bound_;
}

void ReviewService::listen() {
  if (!bound_) throw std::logic_error("ReviewService::listen before bind");
  server_->listen_after_bind();
}

bool ReviewService::start() {
  if (!bind()) return false;
  listener_ = std::thread([this] { listen(); });
  server_->wait_until_ready();
  return true;
}

void ReviewService::stop() {
  std::vector<std::thread> workers;
  {
    std::lock_guard lock(mutex_);
    if (stopping_ && workers_.empty() && !listener_.joinable()) return;
    stopping_ = true;
    for (auto& [id, job] : jobs_) {
      std::lock_guard job_lock(job->mutex);
      job->watchers_released = true;
      job->changed.notify_all();
    }
    workers.swap(workers_);
  }
  server_->stop();
  if (listener_.joinable()) listener_.join();
  for (auto& t : workers) {
    if (t.joinable()) t.join();
  }
}

std::shared_ptr<ReviewService::Job> ReviewService::find(const std::string& job_id) const {
  std::lock_guard lock(mutex_);
  auto it = jobs_.find(job_id);
  return it == jobs_.end() ? nullptr : it->second;
}

ReviewService::SubmitResult ReviewService::submit(std::string_view body) {
  auto parsed = parse_job_request(body);
  if (!parsed.request) return {SubmitStatus::invalid, {}, std::move(parsed.field_errors)};
  std::lock_guard lock(mutex_);
  if (stopping_) return {SubmitStatus::busy, {}, {{"service", "shutting down"}}};
  if (active_ >= config_.max_concurrent_jobs) {
    return {SubmitStatus::busy, {}, {{"service", fmt::format("{} jobs already running", active_)}}};
  }
  std::string id = ids_();
  while (jobs_.contains(id)) id = random_job_id();
  auto job = std::make_shared<Job>();
  job->record.job_id = id;
  job->record.source = parsed.request->source;
  job->record.mode = parsed.request->mode;
  job->record.created_at = clock_->now_seconds();
  job->record.artifact_dir = config_.artifact_root / id;
  jobs_.emplace(id, job);
  ++active_;
  workers_.emplace_back([this, job, request = std::move(*parsed.request)]() mutable { run_job(job, std::move(request)); });
  return {SubmitStatus::accepted, id, {}};
}

void ReviewService::run_job(const std::shared_ptr<Job>& job, JobRequest request) {
  {
    std::lock_guard lock(job->mutex);
    job->record.state = JobState::running;
    job->changed.notify_all();
  }
  RunResult result;
  try {
    RunDeps deps = factory_(job->record.job_id, request);
    deps.job_id = job->record.job_id;
    deps.output_dir = job->record.artifact_dir;
    deps.sink = [job](const ProgressEvent& e) {
      std::lock_guard lock(job->mutex);
      job->record.event_log.push_back(e);
      job->changed.notify_all();
    };
    result = run_review(request.source, request.mode, deps);
  } catch (const std::exception& e) {
    result.ok = false;
    result.error = e.what();
  }
  {
    std::lock_guard lock(job->mutex);
    job->record.state = result.ok ? JobState::succeeded : JobState::failed;
    if (!result.ok) job->record.error = result.error.empty() ? "run failed" : result.error;
    job->record.finished_at = clock_->now_seconds();
    job->changed.notify_all();
  }
  std::lock_guard lock(mutex_);
  --active_;
}

std::optional<JobRecord> ReviewService::snapshot(const std::string& job_id) const {
  auto job = find(job_id);
  if (!job) return std::nullopt;
  std::lock_guard lock(job->mutex);
  return job->record;
}

bool ReviewService::wait_for(const std::string& job_id, std::chrono::milliseconds timeout) const {
  auto job = find(job_id);
  if (!job) return false;
  std::unique_lock lock(job->mutex);
  return job->changed.wait_for(lock, timeout, [&] { return job->terminal(); });
}

namespace {

void send_json(httplib::Response& res, int status, const ordered_json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message,
                const std::map<std::string, std::string>& fields = {}) {
  ordered_json body{{"error", message}};
  if (!fields.empty()) body["fields"] = fields;
  send_json(res, status, body);
}

std::uint64_t last_event_id(const httplib::Request& req) {
  std::string raw = req.get_header_value("Last-Event-ID");
  if (raw.empty() && req.has_param("last_event_id")) raw = req.get_param_value("last_event_id");
  raw = trim(raw);
  if (raw.empty() || !std::all_of(raw.begin(), raw.end(), [](char c) { return c >= '0' && c <= '9'; })) return 0;
  try {
    return std::stoull(raw);
  } catch (const std::exception&) {
    return 0;
  }
}

}  // namespace

void ReviewService::register_routes() {
  auto& svr = *server_;

  svr.set_post_routing_handler([this](const httplib::Request& req, httplib::Response& res) {
    const auto origin = req.get_header_value("Origin");
    if (origin.empty()) return;
    const auto& allowed = config_.cors_origins;
    if (std::find(allowed.begin(), allowed.end(), origin) != allowed.end() ||
        std::find(allowed.begin(), allowed.end(), "*") != allowed.end()) {
      res.set_header("Access-Control-Allow-Origin", origin);
      res.set_header("Vary", "Origin");
    }
  });

  svr.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) {
    res.status = 204;
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type, Last-Event-ID");
  });

  svr.Get("/health", [](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, {{"status", "ok"}, {"version", REPOREVIEW_VERSION}});
  });

  svr.Post("/reviews", [this](const httplib::Request& req, httplib::Response& res) {
    auto r = submit(req.body);
    switch (r.status) {
      case SubmitStatus::accepted:
        send_json(res, 202, {{"job_id", r.job_id}});
        return;
      case SubmitStatus::invalid:
        send_error(res, 400, "invalid request", r.field_errors);
        return;
      case SubmitStatus::busy:
        send_error(res, 429, "too many concurrent jobs", r.field_errors);
        return;
    }
  });

  svr.Get(R"(/reviews/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    auto snap = snapshot(req.matches[1]);
    if (!snap) return send_error(res, 404, "unknown job");
    send_json(res, 200, job_view(*snap));
  });

  svr.Get(R"(/reviews/([^/]+)/events)", [this](const httplib::Request& req, httplib::Response& res) {
    auto job = find(req.matches[1]);
    if (!job) return send_error(res, 404, "unknown job");
    const auto keepalive = config_.keepalive;
    auto sent = std::make_shared<std::uint64_t>(last_event_id(req));
    res.set_header("Cache-Control", "no-cache");
    res.set_header("X-Accel-Buffering", "no");
    res.set_chunked_content_provider(
        "text/event-stream", [job, keepalive, sent](std::size_t, httplib::DataSink& sink) {
          std::string out;
          bool finished = false;
          {
            std::unique_lock lock(job->mutex);
            const auto ready = [&] {
              return job->watchers_released || job->terminal() || job->record.event_log.size() > *sent;
            };
            if (!job->changed.wait_for(lock, keepalive, ready)) {
              lock.unlock();
              return sink.write(": ping\n\n", 8);
            }
            if (job->watchers_released && !job->terminal()) return false;
            // seq n sits at index n - 1.
            for (auto i = *sent; i < job->record.event_log.size(); ++i) {
              out += sse_progress_frame(job->record.event_log[i]);
            }
            *sent = std::max<std::uint64_t>(*sent, job->record.event_log.size());
            if (job->terminal()) {
              out += sse_terminal_frame(job->record);
              finished = true;
            }
          }
          if (!out.empty() && !sink.write(out.data(), out.size())) return false;
          if (finished) sink.done();
          return true;
        });
  });

  svr.Get(R"(/reviews/([^/]+)/artifacts/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    auto snap = snapshot(req.matches[1]);
    if (!snap) return send_error(res, 404, "unknown job");
    const std::string name = req.matches[2];
    std::string content_type;
    if (name == kJsonArtifact) {
      content_type = "application/json";
    } else if (name == kMarkdownArtifact) {
      content_type = "text/markdown; charset=utf-8";
    } else {
      return send_error(res, 404, "unknown artifact");
    }
    if (snap->state != JobState::succeeded) {
      return send_error(res, 409, fmt::format("job is {}", to_string(snap->state)));
    }
    std::ifstream in(snap->artifact_dir / name, std::ios::binary);
    if (!in) return send_error(res, 404, "artifact missing on disk");
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    res.status = 200;
    res.set_content(std::move(bytes), content_type);
  });
}

}  // namespace reporeview
