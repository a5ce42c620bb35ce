#pragma once

#include "easytime/automl.hpp"
#include "easytime/error.hpp"
#include "easytime/evaluation.hpp"
#include "easytime/synthetic.hpp"

#include <filesystem>
#include <iosfwd>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

namespace easytime {

struct DatasetSource {
	enum class Kind { file, synthetic } kind = Kind::file;
	/// file: the resolved path; synthetic: unused.
	std::filesystem::path path;
	std::string name;
	std::string domain = "user";
	ImputePolicy impute = ImputePolicy::reject;
	SyntheticSpec spec;
	std::uint64_t seed = 0;
};

struct OutputConfig {
	std::filesystem::path results_db = "results.db";
	std::filesystem::path report = "report.md";
};

struct PretrainConfig {
	std::size_t corpus_size = 300;
	std::uint64_t corpus_seed = 7;
	std::size_t length = 240;
	automl::TrainHyper hyper;
};

struct ServiceConfig {
	std::string host = "127.0.0.1";
	int port = 8080;
	std::filesystem::path model;
	std::size_t workers = 4;
	std::size_t queue_limit = 64;
};

struct RunConfig {
	std::vector<DatasetSource> datasets;
	std::vector<MethodSpec> methods;
	EvalConfig eval;
	OutputConfig output;
	std::uint64_t seed = 0;
	/// 0 = hardware concurrency; EASYTIME_WORKERS overrides.
	std::size_t workers = 0;
	std::size_t automl_k = 3;
	PretrainConfig pretrain;
	ServiceConfig service;
};

struct ConfigIssue {
	std::string path;
	std::string expected;
	std::string got;
};

/// Every problem found in a configuration document, reported together.
class ConfigInvalid : public Error {
public:
	explicit ConfigInvalid(std::vector<ConfigIssue> issues);
	const std::vector<ConfigIssue> &issues() const noexcept { return issues_; }

private:
	std::vector<ConfigIssue> issues_;
};

/// Parses and validates a JSON configuration, filling defaults. Relative
/// paths resolve against `base_dir`; dataset files must exist. Throws
/// ConfigInvalid listing every issue.
RunConfig validate_config(std::string_view text, const std::filesystem::path &base_dir = {});
RunConfig load_config(const std::filesystem::path &path);

/// Canonical form of a validated configuration (all defaults explicit).
nlohmann::json canonical_json(const RunConfig &config);
nlohmann::json to_json(const ConfigIssue &issue);

/// Reads or generates every dataset. Throws the parse or IO error.
std::vector<Dataset> load_datasets(const RunConfig &config);

/// EASYTIME_WORKERS when set to a positive integer, else `fallback`.
std::size_t workers_from_env(std::size_t fallback);

/// The synthetic meta-corpus used for offline pretraining.
std::vector<TimeSeries> pretrain_corpus(const PretrainConfig &config);

struct Report {
	std::string markdown;
	std::string per_dataset_csv;
};

/// Deterministic report: method x metric means, failures, per-dataset table.
Report build_report(const RunConfig &config, const PipelineResult &result);

/// One-click benchmark from a config file. Returns the process exit code:
/// 0 all runs ok, 2 some runs failed, 1 config or IO error before any
/// evaluation (no store is created). Progress goes to `log`.
int run_one_click(const std::filesystem::path &config_path, std::ostream &log);

} // namespace easytime
