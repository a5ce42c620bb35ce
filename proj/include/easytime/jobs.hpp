#pragma once

#include "easytime/error.hpp"

#include <json.hpp>
#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace easytime {

enum class JobKind { evaluate, automl, pretrain };
enum class JobStatus { queued, running, done, failed };

const char *job_kind_name(JobKind kind);
const char *job_status_name(JobStatus status);

struct JobError {
	std::string code;
	std::string message;
};

struct Job {
	std::string job_id;
	JobKind kind = JobKind::evaluate;
	JobStatus status = JobStatus::queued;
	double progress = 0.0;
	std::optional<nlohmann::json> result; // present iff done
	std::optional<JobError> error;        // present iff failed
};

nlohmann::json to_json(const Job &job);

class JobRegistry;

/// Handle a running task uses to publish progress. Progress is clamped to
/// [0,1] and never decreases.
class JobContext {
public:
	JobContext(JobRegistry &registry, std::string job_id) : registry_(registry), job_id_(std::move(job_id)) {}

	void report(double fraction);
	const std::string &job_id() const noexcept { return job_id_; }

private:
	JobRegistry &registry_;
	std::string job_id_;
};

using JobTask = std::function<nlohmann::json(JobContext &)>;

/// Bounded in-process job queue. A task that throws marks its job failed
/// with the error's code; other jobs and the workers are unaffected.
class JobRegistry {
public:
	explicit JobRegistry(std::size_t workers = 4, std::size_t queue_limit = 64);
	~JobRegistry();

	JobRegistry(const JobRegistry &) = delete;
	JobRegistry &operator=(const JobRegistry &) = delete;

	/// Throws QueueFull when `queue_limit` jobs are already pending.
	std::string submit(JobKind kind, JobTask task);
	/// Snapshot of a job. Throws UnknownJob.
	Job status(const std::string &job_id) const;
	/// Blocks until the job is done or failed, or the timeout passes.
	Job wait(const std::string &job_id, std::chrono::milliseconds timeout) const;

	std::size_t pending() const;

private:
	friend class JobContext;

	struct Entry {
		Job job;
		JobTask task;
	};

	void worker_loop(std::stop_token stop);
	void set_progress(const std::string &job_id, double fraction);
	std::string fresh_id();

	std::size_t queue_limit_;
	mutable std::mutex mutex_;
	mutable std::condition_variable_any changed_;
	std::condition_variable_any work_ready_;
	std::map<std::string, Entry> jobs_;
	std::deque<std::string> queue_;
	std::vector<std::jthread> workers_;
};

} // namespace easytime
