#include "easytime/jobs.hpp"

#include <algorithm>
#include <fmt/format.h>
#include <random>

namespace easytime {

const char *job_kind_name(JobKind kind) {
	switch (kind) {
	case JobKind::evaluate:
		return "evaluate";
	case JobKind::automl:
		return "automl";
	case JobKind::pretrain:
		return "pretrain";
	}
	return "evaluate";
}

const char *job_status_name(JobStatus status) {
	switch (status) {
	case JobStatus::queued:
		return "queued";
	case JobStatus::running:
		return "running";
	case JobStatus::done:
		return "done";
	case JobStatus::failed:
		return "failed";
	}
	return "queued";
}

nlohmann::json to_json(const Job &job) {
	nlohmann::json j{{"job_id", job.job_id},
	                 {"kind", job_kind_name(job.kind)},
	                 {"status", job_status_name(job.status)},
	                 {"progress", job.progress},
	                 {"result", nullptr},
	                 {"error", nullptr}};
	if (job.result) {
		j["result"] = *job.result;
	}
	if (job.error) {
		j["error"] = {{"code", job.error->code}, {"message", job.error->message}};
	}
	return j;
}

void JobContext::report(double fraction) {
	registry_.set_progress(job_id_, fraction);
}

JobRegistry::JobRegistry(std::size_t workers, std::size_t queue_limit) : queue_limit_(queue_limit) {
	workers = std::max<std::size_t>(workers, 1);
	workers_.reserve(workers);
	for (std::size_t i = 0; i < workers; ++i) {
		workers_.emplace_back([this](std::stop_token stop) { worker_loop(stop); });
	}
}

JobRegistry::~JobRegistry() {
	for (auto &w : workers_) {
		w.request_stop();
	}
	work_ready_.notify_all();
	workers_.clear();
}

std::string JobRegistry::fresh_id() {
	static thread_local std::mt19937_64 rng{std::random_device{}()};
	for (;;) {
		auto id = fmt::format("{:016x}{:016x}", rng(), rng());
		if (!jobs_.contains(id)) {
			return id;
		}
	}
}

std::string JobRegistry::submit(JobKind kind, JobTask task) {
	std::string id;
	{
		std::lock_guard lock(mutex_);
		if (queue_.size() >= queue_limit_) {
			fail("QueueFull", fmt::format("{} jobs already pending", queue_.size()));
		}
		id = fresh_id();
		Entry entry;
		entry.job.job_id = id;
		entry.job.kind = kind;
		entry.task = std::move(task);
		jobs_.emplace(id, std::move(entry));
		queue_.push_back(id);
	}
	work_ready_.notify_one();
	return id;
}

Job JobRegistry::status(const std::string &job_id) const {
	std::lock_guard lock(mutex_);
	const auto it = jobs_.find(job_id);
	if (it == jobs_.end()) {
		fail("UnknownJob", fmt::format("no job '{}'", job_id));
	}
	return it->second.job;
}

Job JobRegistry::wait(const std::string &job_id, std::chrono::milliseconds timeout) const {
	std::unique_lock lock(mutex_);
	const auto it = jobs_.find(job_id);
	if (it == jobs_.end()) {
		fail("UnknownJob", fmt::format("no job '{}'", job_id));
	}
	const auto &job = it->second.job;
	changed_.wait_for(lock, timeout,
	                  [&] { return job.status == JobStatus::done || job.status == JobStatus::failed; });
	return job;
}

std::size_t JobRegistry::pending() const {
	std::lock_guard lock(mutex_);
	return queue_.size();
}

void JobRegistry::set_progress(const std::string &job_id, double fraction) {
	{
		std::lock_guard lock(mutex_);
		const auto it = jobs_.find(job_id);
		if (it == jobs_.end() || it->second.job.status != JobStatus::running) {
			return;
		}
		if (!(fraction >= 0.0)) {
			fraction = 0.0;
		}
		fraction = std::min(fraction, 1.0);
		auto &progress = it->second.job.progress;
		progress = std::max(progress, fraction);
	}
	changed_.notify_all();
}

void JobRegistry::worker_loop(std::stop_token stop) {
	for (;;) {
		std::string id;
		JobTask task;
		{
			std::unique_lock lock(mutex_);
			if (!work_ready_.wait(lock, stop, [this] { return !queue_.empty(); })) {
				return;
			}
			id = queue_.front();
			queue_.pop_front();
			auto &entry = jobs_.at(id);
			entry.job.status = JobStatus::running;
			task = std::move(entry.task);
			entry.task = nullptr;
		}
		changed_.notify_all();

		JobContext context(*this, id);
		std::optional<nlohmann::json> result;
		std::optional<JobError> error;
		try {
			result = task(context);
		} catch (const Error &e) {
			error = JobError{e.code(), e.what()};
		} catch (const std::exception &e) {
			error = JobError{"InternalError", e.what()};
		} catch (...) {
			error = JobError{"InternalError", "unknown failure"};
		}

		{
			std::lock_guard lock(mutex_);
			auto &job = jobs_.at(id).job;
			if (error) {
				job.status = JobStatus::failed;
				job.error = std::move(error);
			} else {
				job.status = JobStatus::done;
				job.progress = 1.0;
				job.result = std::move(result);
			}
		}
		changed_.notify_all();
	}
}

} // namespace easytime
