#pragma once

#include "easytime/config.hpp"
#include "easytime/jobs.hpp"
#include "easytime/qa.hpp"
#include "easytime/resultstore.hpp"

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

namespace easytime {

inline constexpr std::size_t kMaxUploadBytes = 50u * 1024u * 1024u;

struct ServiceOptions {
	std::string host = "127.0.0.1";
	/// 0 binds a free port; see Service::port().
	int port = 8080;
	std::filesystem::path results_db = "results.db";
	/// Classifier artifact; recommend/automl answer 409 without one.
	std::filesystem::path model;
	/// Where uploaded CSVs are kept; defaults to "uploads" next to the store.
	std::filesystem::path data_dir;
	std::size_t workers = 4;
	std::size_t queue_limit = 64;
	std::vector<Dataset> datasets;
	EvalConfig default_eval;
	qa::TranslatorConfig translator;
	/// Base directory for relative paths in /api/config/validate bodies.
	std::filesystem::path config_dir;
};

/// Options for `serve`: listen address, store, model and preloaded datasets
/// from the config; EASYTIME_WORKERS overrides the job worker count.
ServiceOptions service_options(const RunConfig &config, const std::filesystem::path &config_dir = {});

/// HTTP status for an error code from the registry.
int http_status_for(const std::string &code);

/// {"error": {"code", "message", "details"}}
nlohmann::json api_error(const std::string &code, const std::string &message,
                         const nlohmann::json &details = nullptr);

/// JSON API over datasets, recommendation, evaluation/AutoML jobs, results
/// and Q&A. Opening the store and loading the model happen in the
/// constructor; start() serves on a background thread.
class Service {
public:
	explicit Service(ServiceOptions options);
	~Service();

	Service(const Service &) = delete;
	Service &operator=(const Service &) = delete;

	/// Binds and serves in the background. Returns the bound port. Throws
	/// BindFailed.
	int start();
	/// Binds and serves on the calling thread until stop().
	void run();
	void stop();

	int port() const noexcept;
	JobRegistry &jobs();
	ResultStore &store();

private:
	struct Impl;
	std::unique_ptr<Impl> impl_;
};

} // namespace easytime
