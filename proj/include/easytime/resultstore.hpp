#pragma once

#include "easytime/core.hpp"
#include "easytime/evaluation.hpp"
#include "easytime/sql_verify.hpp"

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

struct sqlite3;

namespace easytime {

inline constexpr int kSchemaVersion = 1;

/// The schema DDL text asset (versioned).
const std::string &schema_ddl();

enum class RunStatus { ok, failed };

struct RunRow {
	std::string run_id;
	std::string dataset_id;
	std::string method_id;
	std::string strategy;
	std::int64_t horizon = 0;
	std::int64_t lookback = 0;
	std::int64_t stride = 0;
	RunStatus status = RunStatus::ok;
	std::string started_at;
	std::string config_digest;
	std::int64_t n_windows = 0;
	std::int64_t runtime_ms = 0;
};

struct MethodRow {
	std::string method_id;
	std::string name;
	std::string family;
};

using SqlValue = std::variant<std::monostate, std::int64_t, double, std::string>;

struct QueryResult {
	std::vector<std::string> columns;
	std::vector<std::vector<SqlValue>> rows;
};

nlohmann::json to_json_value(const SqlValue &value);
nlohmann::json to_json(const QueryResult &result);
nlohmann::json to_json(const CharacteristicVector &c);
nlohmann::json to_json(const DatasetMeta &meta);

/// SQLite-backed benchmark knowledge base (datasets, methods, runs, scores).
///
/// Writes are serialized through one connection guarded by a mutex; every
/// read-only query opens its own read-only connection. Opening a file
/// stamped with a different schema version is an error (SchemaMismatch).
class ResultStore {
public:
	/// Creates the file and schema when absent. Throws StoreUnavailable.
	static ResultStore open(const std::filesystem::path &path);
	/// Opens an existing store without creating it. Throws StoreUnavailable.
	static ResultStore open_existing(const std::filesystem::path &path);

	ResultStore(ResultStore &&) noexcept;
	ResultStore &operator=(ResultStore &&) noexcept;
	~ResultStore();

	const std::filesystem::path &path() const noexcept { return path_; }

	void upsert_dataset(const DatasetMeta &meta);
	void upsert_method(const MethodRow &method);
	/// Inserts (or replaces) a run and its scores in one transaction.
	/// Throws ConstraintViolation on missing references, out-of-range
	/// characteristics, or scores attached to a failed run.
	void insert_run_with_scores(const RunRow &run, const std::map<std::string, double> &scores);
	/// Inserts bare scores for an existing run; used to exercise integrity checks.
	void insert_scores(const std::string &run_id, const std::map<std::string, double> &scores);

	std::optional<DatasetMeta> dataset(const std::string &dataset_id) const;
	std::vector<DatasetMeta> datasets() const;
	std::vector<MethodRow> methods() const;
	std::optional<RunRow> run(const std::string &run_id) const;
	std::vector<RunRow> runs() const;
	std::map<std::string, double> scores(const std::string &run_id) const;
	std::size_t count_runs(std::optional<RunStatus> status = std::nullopt) const;

	/// Reassembles an EvalRecord from runs + scores.
	std::optional<EvalRecord> eval_record(const std::string &run_id) const;

	/// Executes verified, read-only SQL. Throws QueryTimeout or ExecError.
	QueryResult execute_select(const VerifiedSql &sql,
	                           std::chrono::milliseconds timeout = std::chrono::milliseconds(5000)) const;

	/// Digest over every row of every table, in key order.
	std::string content_digest() const;

	/// Writes one CSV per table into `dir`.
	void export_csv(const std::filesystem::path &dir) const;

private:
	explicit ResultStore(std::filesystem::path path);

	std::filesystem::path path_;
	sqlite3 *db_ = nullptr;
	std::unique_ptr<std::mutex> write_mutex_;
};

const char *run_status_name(RunStatus status);

MethodRow method_row(const MethodSpec &spec);

/// The runs-table row of one evaluated (dataset, method) cell; status ok
/// when `record` is given.
RunRow make_run_row(const std::string &dataset_id, const MethodSpec &spec, const EvalConfig &config,
                    const std::string &started_at, const EvalRecord *record);

/// Current UTC time as ISO-8601 (seconds precision).
std::string utc_now_iso8601();

} // namespace easytime
