#include "easytime/resultstore.hpp"

#include "easytime/assets.hpp"
#include "easytime/digest.hpp"
#include "easytime/error.hpp"

#include <ctime>
#include <fmt/format.h>
#include <fstream>
#include <sqlite3.h>

namespace easytime {

namespace {

[[noreturn]] void sqlite_fail(sqlite3 *db, int rc, const std::string &what) {
	const std::string msg = fmt::format("{}: {}", what, db ? sqlite3_errmsg(db) : sqlite3_errstr(rc));
	if ((rc & 0xff) == SQLITE_CONSTRAINT) {
		fail("ConstraintViolation", msg);
	}
	fail("StoreUnavailable", msg);
}

class Stmt {
public:
	Stmt(sqlite3 *db, std::string_view sql) : db_(db) {
		const int rc = sqlite3_prepare_v2(db, sql.data(), static_cast<int>(sql.size()), &stmt_, nullptr);
		if (rc != SQLITE_OK) {
			sqlite_fail(db, rc, "prepare");
		}
	}
	Stmt(const Stmt &) = delete;
	Stmt &operator=(const Stmt &) = delete;
	~Stmt() { sqlite3_finalize(stmt_); }

	Stmt &bind(int i, const std::string &v) {
		sqlite3_bind_text(stmt_, i, v.data(), static_cast<int>(v.size()), SQLITE_TRANSIENT);
		return *this;
	}
	Stmt &bind(int i, const std::optional<std::string> &v) {
		if (v) {
			return bind(i, *v);
		}
		sqlite3_bind_null(stmt_, i);
		return *this;
	}
	Stmt &bind(int i, std::int64_t v) {
		sqlite3_bind_int64(stmt_, i, v);
		return *this;
	}
	Stmt &bind(int i, double v) {
		if (std::isfinite(v)) {
			sqlite3_bind_double(stmt_, i, v);
		} else {
			sqlite3_bind_null(stmt_, i);
		}
		return *this;
	}

	/// True while a row is available.
	bool step() {
		const int rc = sqlite3_step(stmt_);
		if (rc == SQLITE_ROW) {
			return true;
		}
		if (rc == SQLITE_DONE) {
			return false;
		}
		sqlite_fail(db_, rc, "step");
	}

	void run() {
		while (step()) {
		}
	}

	std::string text(int col) const {
		const auto *p = sqlite3_column_text(stmt_, col);
		return p ? std::string(reinterpret_cast<const char *>(p), static_cast<std::size_t>(sqlite3_column_bytes(stmt_, col)))
		         : std::string();
	}
	std::optional<std::string> opt_text(int col) const {
		if (sqlite3_column_type(stmt_, col) == SQLITE_NULL) {
			return std::nullopt;
		}
		return text(col);
	}
	std::int64_t integer(int col) const { return sqlite3_column_int64(stmt_, col); }
	double real(int col) const { return sqlite3_column_double(stmt_, col); }
	sqlite3_stmt *raw() const { return stmt_; }

private:
	sqlite3 *db_;
	sqlite3_stmt *stmt_ = nullptr;
};

void exec(sqlite3 *db, const std::string &sql) {
	char *err = nullptr;
	const int rc = sqlite3_exec(db, sql.c_str(), nullptr, nullptr, &err);
	if (rc != SQLITE_OK) {
		std::string msg = err ? err : sqlite3_errstr(rc);
		sqlite3_free(err);
		if ((rc & 0xff) == SQLITE_CONSTRAINT) {
			fail("ConstraintViolation", msg);
		}
		fail("StoreUnavailable", msg);
	}
}

class Transaction {
public:
	explicit Transaction(sqlite3 *db) : db_(db) { exec(db_, "BEGIN IMMEDIATE"); }
	void commit() {
		exec(db_, "COMMIT");
		done_ = true;
	}
	~Transaction() {
		if (!done_) {
			sqlite3_exec(db_, "ROLLBACK", nullptr, nullptr, nullptr);
		}
	}

private:
	sqlite3 *db_;
	bool done_ = false;
};

DatasetMeta read_dataset(const Stmt &s) {
	DatasetMeta m;
	m.dataset_id = s.text(0);
	m.name = s.text(1);
	m.domain = s.text(2);
	m.n_channels = static_cast<int>(s.integer(3));
	m.length = static_cast<int>(s.integer(4));
	m.frequency = s.opt_text(5);
	auto &c = m.characteristics;
	c.seasonality = s.real(6);
	c.trend = s.real(7);
	c.transition = s.real(8);
	c.shifting = s.real(9);
	c.stationarity = s.real(10);
	c.correlation = s.real(11);
	return m;
}

constexpr const char *kDatasetColumns = "dataset_id, name, domain, n_channels, length, frequency, seasonality, trend, "
                                        "transition, shifting, stationarity, correlation";
constexpr const char *kRunColumns = "run_id, dataset_id, method_id, strategy, horizon, lookback, stride, status, "
                                    "started_at, config_digest, n_windows, runtime_ms";

RunRow read_run(const Stmt &s) {
	RunRow r;
	r.run_id = s.text(0);
	r.dataset_id = s.text(1);
	r.method_id = s.text(2);
	r.strategy = s.text(3);
	r.horizon = s.integer(4);
	r.lookback = s.integer(5);
	r.stride = s.integer(6);
	r.status = s.text(7) == "ok" ? RunStatus::ok : RunStatus::failed;
	r.started_at = s.text(8);
	r.config_digest = s.text(9);
	r.n_windows = s.integer(10);
	r.runtime_ms = s.integer(11);
	return r;
}

SqlValue column_value(sqlite3_stmt *stmt, int col) {
	switch (sqlite3_column_type(stmt, col)) {
	case SQLITE_INTEGER:
		return static_cast<std::int64_t>(sqlite3_column_int64(stmt, col));
	case SQLITE_FLOAT:
		return sqlite3_column_double(stmt, col);
	case SQLITE_NULL:
		return std::monostate{};
	default: {
		const auto *p = sqlite3_column_text(stmt, col);
		return std::string(reinterpret_cast<const char *>(p), static_cast<std::size_t>(sqlite3_column_bytes(stmt, col)));
	}
	}
}

std::string value_text(const SqlValue &v) {
	return std::visit(
	    [](const auto &x) -> std::string {
		    using T = std::decay_t<decltype(x)>;
		    if constexpr (std::is_same_v<T, std::monostate>) {
			    return "";
		    } else if constexpr (std::is_same_v<T, std::string>) {
			    return x;
		    } else if constexpr (std::is_same_v<T, double>) {
			    return format_double(x);
		    } else {
			    return std::to_string(x);
		    }
	    },
	    v);
}

std::string csv_field(const std::string &text) {
	if (text.find_first_of(",\"\n\r") == std::string::npos) {
		return text;
	}
	std::string out = "\"";
	for (char c : text) {
		if (c == '"') {
			out += '"';
		}
		out += c;
	}
	return out + '"';
}

struct TableSpec {
	const char *name;
	const char *order_by;
};

constexpr TableSpec kTables[] = {
    {"datasets", "dataset_id"}, {"methods", "method_id"}, {"runs", "run_id"}, {"scores", "run_id, metric"}};

int authorize(void *, int action, const char *a, const char *, const char *, const char *) {
	switch (action) {
	case SQLITE_SELECT:
	case SQLITE_FUNCTION:
		return SQLITE_OK;
	case SQLITE_READ: {
		const std::string_view table = a ? a : "";
		for (const auto &t : kTables) {
			if (table == t.name) {
				return SQLITE_OK;
			}
		}
		return SQLITE_DENY;
	}
	default:
		return SQLITE_DENY;
	}
}

struct Deadline {
	std::chrono::steady_clock::time_point at;
	bool expired = false;
};

int progress_check(void *p) {
	auto *d = static_cast<Deadline *>(p);
	if (std::chrono::steady_clock::now() > d->at) {
		d->expired = true;
		return 1;
	}
	return 0;
}

} // namespace

const std::string &schema_ddl() {
	return assets::schema_sql();
}

const char *run_status_name(RunStatus status) {
	return status == RunStatus::ok ? "ok" : "failed";
}

std::string utc_now_iso8601() {
	const std::time_t now = std::time(nullptr);
	std::tm tm{};
	gmtime_r(&now, &tm);
	char buf[32];
	std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
	return buf;
}

nlohmann::json to_json_value(const SqlValue &value) {
	return std::visit(
	    [](const auto &x) -> nlohmann::json {
		    using T = std::decay_t<decltype(x)>;
		    if constexpr (std::is_same_v<T, std::monostate>) {
			    return nullptr;
		    } else if constexpr (std::is_same_v<T, double>) {
			    return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr);
		    } else {
			    return x;
		    }
	    },
	    value);
}

nlohmann::json to_json(const CharacteristicVector &c) {
	return nlohmann::json{{"seasonality", c.seasonality}, {"trend", c.trend},
	                      {"transition", c.transition},   {"shifting", c.shifting},
	                      {"stationarity", c.stationarity}, {"correlation", c.correlation},
	                      {"detected_period", c.detected_period}};
}

nlohmann::json to_json(const DatasetMeta &meta) {
	return nlohmann::json{{"dataset_id", meta.dataset_id},
	                      {"name", meta.name},
	                      {"domain", meta.domain},
	                      {"n_channels", meta.n_channels},
	                      {"length", meta.length},
	                      {"frequency", meta.frequency ? nlohmann::json(*meta.frequency) : nlohmann::json()},
	                      {"characteristics", to_json(meta.characteristics)}};
}

nlohmann::json to_json(const QueryResult &result) {
	nlohmann::json rows = nlohmann::json::array();
	for (const auto &row : result.rows) {
		nlohmann::json r = nlohmann::json::array();
		for (const auto &v : row) {
			r.push_back(to_json_value(v));
		}
		rows.push_back(std::move(r));
	}
	return nlohmann::json{{"columns", result.columns}, {"rows", std::move(rows)}};
}

ResultStore::ResultStore(std::filesystem::path path)
    : path_(std::move(path)), write_mutex_(std::make_unique<std::mutex>()) {}

ResultStore::ResultStore(ResultStore &&other) noexcept
    : path_(std::move(other.path_)), db_(std::exchange(other.db_, nullptr)),
      write_mutex_(std::move(other.write_mutex_)) {}

ResultStore &ResultStore::operator=(ResultStore &&other) noexcept {
	if (this != &other) {
		if (db_) {
			sqlite3_close_v2(db_);
		}
		path_ = std::move(other.path_);
		db_ = std::exchange(other.db_, nullptr);
		write_mutex_ = std::move(other.write_mutex_);
	}
	return *this;
}

ResultStore::~ResultStore() {
	if (db_) {
		sqlite3_close_v2(db_);
	}
}

namespace {

sqlite3 *open_connection(const std::filesystem::path &path, int flags) {
	sqlite3 *db = nullptr;
	const int rc = sqlite3_open_v2(path.c_str(), &db, flags | SQLITE_OPEN_FULLMUTEX, nullptr);
	if (rc != SQLITE_OK) {
		const std::string msg = db ? sqlite3_errmsg(db) : sqlite3_errstr(rc);
		sqlite3_close_v2(db);
		fail("StoreUnavailable", fmt::format("cannot open results store '{}': {}", path.string(), msg));
	}
	sqlite3_busy_timeout(db, 5000);
	return db;
}

void prepare_schema(sqlite3 *db, const std::filesystem::path &path) {
	bool has_meta = false;
	bool has_tables = false;
	{
		Stmt s(db, "SELECT name FROM sqlite_master WHERE type='table'");
		while (s.step()) {
			const auto name = s.text(0);
			has_meta = has_meta || name == "meta";
			has_tables = true;
		}
	}
	if (has_meta) {
		Stmt s(db, "SELECT value FROM meta WHERE key='schema_version'");
		const std::string found = s.step() ? s.text(0) : std::string("<none>");
		if (found != std::to_string(kSchemaVersion)) {
			fail("SchemaMismatch", fmt::format("store '{}' has schema version {}, this build expects {}", path.string(),
			                                   found, kSchemaVersion));
		}
	} else if (has_tables) {
		fail("SchemaMismatch", fmt::format("'{}' has tables but no schema version stamp", path.string()));
	}
	exec(db, schema_ddl());
	Stmt s(db, "INSERT OR IGNORE INTO meta(key, value) VALUES ('schema_version', ?)");
	s.bind(1, std::to_string(kSchemaVersion)).run();
}

} // namespace

ResultStore ResultStore::open(const std::filesystem::path &path) {
	if (path.has_parent_path()) {
		std::error_code ec;
		std::filesystem::create_directories(path.parent_path(), ec);
	}
	ResultStore store(path);
	store.db_ = open_connection(path, SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE);
	exec(store.db_, "PRAGMA foreign_keys = ON");
	exec(store.db_, "PRAGMA journal_mode = WAL");
	prepare_schema(store.db_, path);
	return store;
}

ResultStore ResultStore::open_existing(const std::filesystem::path &path) {
	if (!std::filesystem::is_regular_file(path)) {
		fail("StoreUnavailable", fmt::format("results store '{}' does not exist", path.string()));
	}
	ResultStore store(path);
	store.db_ = open_connection(path, SQLITE_OPEN_READWRITE);
	exec(store.db_, "PRAGMA foreign_keys = ON");
	exec(store.db_, "PRAGMA journal_mode = WAL");
	prepare_schema(store.db_, path);
	return store;
}

void ResultStore::upsert_dataset(const DatasetMeta &meta) {
	std::lock_guard lock(*write_mutex_);
	Stmt s(db_, fmt::format("INSERT INTO datasets({}) VALUES (?,?,?,?,?,?,?,?,?,?,?,?) "
	                        "ON CONFLICT(dataset_id) DO UPDATE SET name=excluded.name, domain=excluded.domain, "
	                        "n_channels=excluded.n_channels, length=excluded.length, frequency=excluded.frequency, "
	                        "seasonality=excluded.seasonality, trend=excluded.trend, transition=excluded.transition, "
	                        "shifting=excluded.shifting, stationarity=excluded.stationarity, "
	                        "correlation=excluded.correlation",
	                        kDatasetColumns));
	const auto &c = meta.characteristics;
	s.bind(1, meta.dataset_id)
	    .bind(2, meta.name)
	    .bind(3, meta.domain)
	    .bind(4, static_cast<std::int64_t>(meta.n_channels))
	    .bind(5, static_cast<std::int64_t>(meta.length))
	    .bind(6, meta.frequency)
	    .bind(7, c.seasonality)
	    .bind(8, c.trend)
	    .bind(9, c.transition)
	    .bind(10, c.shifting)
	    .bind(11, c.stationarity)
	    .bind(12, c.correlation)
	    .run();
}

void ResultStore::upsert_method(const MethodRow &method) {
	std::lock_guard lock(*write_mutex_);
	Stmt s(db_, "INSERT INTO methods(method_id, name, family) VALUES (?,?,?) "
	            "ON CONFLICT(method_id) DO UPDATE SET name=excluded.name, family=excluded.family");
	s.bind(1, method.method_id).bind(2, method.name).bind(3, method.family).run();
}

void ResultStore::insert_run_with_scores(const RunRow &run, const std::map<std::string, double> &scores) {
	if (run.status == RunStatus::failed && !scores.empty()) {
		fail("ConstraintViolation", fmt::format("run '{}' is failed and cannot carry scores", run.run_id));
	}
	std::lock_guard lock(*write_mutex_);
	Transaction tx(db_);
	Stmt(db_, "DELETE FROM scores WHERE run_id = ?").bind(1, run.run_id).run();
	Stmt s(db_, fmt::format("INSERT INTO runs({}) VALUES (?,?,?,?,?,?,?,?,?,?,?,?) "
	                        "ON CONFLICT(run_id) DO UPDATE SET dataset_id=excluded.dataset_id, "
	                        "method_id=excluded.method_id, strategy=excluded.strategy, horizon=excluded.horizon, "
	                        "lookback=excluded.lookback, stride=excluded.stride, status=excluded.status, "
	                        "started_at=excluded.started_at, config_digest=excluded.config_digest, "
	                        "n_windows=excluded.n_windows, runtime_ms=excluded.runtime_ms",
	                        kRunColumns));
	s.bind(1, run.run_id)
	    .bind(2, run.dataset_id)
	    .bind(3, run.method_id)
	    .bind(4, run.strategy)
	    .bind(5, run.horizon)
	    .bind(6, run.lookback)
	    .bind(7, run.stride)
	    .bind(8, std::string(run_status_name(run.status)))
	    .bind(9, run.started_at)
	    .bind(10, run.config_digest)
	    .bind(11, run.n_windows)
	    .bind(12, run.runtime_ms)
	    .run();
	for (const auto &[metric, value] : scores) {
		Stmt(db_, "INSERT INTO scores(run_id, metric, value) VALUES (?,?,?)")
		    .bind(1, run.run_id)
		    .bind(2, metric)
		    .bind(3, value)
		    .run();
	}
	tx.commit();
}

void ResultStore::insert_scores(const std::string &run_id, const std::map<std::string, double> &scores) {
	std::lock_guard lock(*write_mutex_);
	Transaction tx(db_);
	for (const auto &[metric, value] : scores) {
		Stmt(db_, "INSERT OR REPLACE INTO scores(run_id, metric, value) VALUES (?,?,?)")
		    .bind(1, run_id)
		    .bind(2, metric)
		    .bind(3, value)
		    .run();
	}
	tx.commit();
}

std::optional<DatasetMeta> ResultStore::dataset(const std::string &dataset_id) const {
	std::lock_guard lock(*write_mutex_);
	Stmt s(db_, fmt::format("SELECT {} FROM datasets WHERE dataset_id = ?", kDatasetColumns));
	s.bind(1, dataset_id);
	if (!s.step()) {
		return std::nullopt;
	}
	return read_dataset(s);
}

std::vector<DatasetMeta> ResultStore::datasets() const {
	std::lock_guard lock(*write_mutex_);
	Stmt s(db_, fmt::format("SELECT {} FROM datasets ORDER BY dataset_id", kDatasetColumns));
	std::vector<DatasetMeta> out;
	while (s.step()) {
		out.push_back(read_dataset(s));
	}
	return out;
}

std::vector<MethodRow> ResultStore::methods() const {
	std::lock_guard lock(*write_mutex_);
	Stmt s(db_, "SELECT method_id, name, family FROM methods ORDER BY method_id");
	std::vector<MethodRow> out;
	while (s.step()) {
		out.push_back({s.text(0), s.text(1), s.text(2)});
	}
	return out;
}

std::optional<RunRow> ResultStore::run(const std::string &run_id) const {
	std::lock_guard lock(*write_mutex_);
	Stmt s(db_, fmt::format("SELECT {} FROM runs WHERE run_id = ?", kRunColumns));
	s.bind(1, run_id);
	if (!s.step()) {
		return std::nullopt;
	}
	return read_run(s);
}

std::vector<RunRow> ResultStore::runs() const {
	std::lock_guard lock(*write_mutex_);
	Stmt s(db_, fmt::format("SELECT {} FROM runs ORDER BY run_id", kRunColumns));
	std::vector<RunRow> out;
	while (s.step()) {
		out.push_back(read_run(s));
	}
	return out;
}

std::map<std::string, double> ResultStore::scores(const std::string &run_id) const {
	std::lock_guard lock(*write_mutex_);
	Stmt s(db_, "SELECT metric, value FROM scores WHERE run_id = ? ORDER BY metric");
	s.bind(1, run_id);
	std::map<std::string, double> out;
	while (s.step()) {
		out[s.text(0)] = s.real(1);
	}
	return out;
}

std::size_t ResultStore::count_runs(std::optional<RunStatus> status) const {
	std::lock_guard lock(*write_mutex_);
	if (status) {
		Stmt s(db_, "SELECT COUNT(*) FROM runs WHERE status = ?");
		s.bind(1, std::string(run_status_name(*status)));
		s.step();
		return static_cast<std::size_t>(s.integer(0));
	}
	Stmt s(db_, "SELECT COUNT(*) FROM runs");
	s.step();
	return static_cast<std::size_t>(s.integer(0));
}

std::optional<EvalRecord> ResultStore::eval_record(const std::string &run_id) const {
	const auto row = run(run_id);
	if (!row) {
		return std::nullopt;
	}
	EvalRecord r;
	r.dataset_id = row->dataset_id;
	r.method_id = row->method_id;
	r.strategy = row->strategy == "rolling" ? Strategy::rolling : Strategy::fixed;
	r.horizon = static_cast<std::size_t>(row->horizon);
	r.lookback = static_cast<std::size_t>(row->lookback);
	r.stride = static_cast<std::size_t>(row->stride);
	r.metric_values = scores(run_id);
	r.n_windows = static_cast<std::size_t>(row->n_windows);
	r.runtime_ms = row->runtime_ms;
	r.config_digest = row->config_digest;
	return r;
}

QueryResult ResultStore::execute_select(const VerifiedSql &sql, std::chrono::milliseconds timeout) const {
	sqlite3 *ro = open_connection(path_, SQLITE_OPEN_READONLY);
	std::unique_ptr<sqlite3, int (*)(sqlite3 *)> guard(ro, sqlite3_close_v2);
	sqlite3_set_authorizer(ro, authorize, nullptr);
	Deadline deadline{std::chrono::steady_clock::now() + timeout};
	sqlite3_progress_handler(ro, 1000, progress_check, &deadline);

	sqlite3_stmt *raw = nullptr;
	const auto &text = sql.text();
	int rc = sqlite3_prepare_v2(ro, text.c_str(), static_cast<int>(text.size()), &raw, nullptr);
	std::unique_ptr<sqlite3_stmt, int (*)(sqlite3_stmt *)> stmt(raw, sqlite3_finalize);
	if (rc != SQLITE_OK) {
		fail("ExecError", sqlite3_errmsg(ro));
	}
	QueryResult result;
	const int cols = sqlite3_column_count(raw);
	for (int c = 0; c < cols; ++c) {
		result.columns.emplace_back(sqlite3_column_name(raw, c));
	}
	while ((rc = sqlite3_step(raw)) == SQLITE_ROW) {
		std::vector<SqlValue> row;
		for (int c = 0; c < cols; ++c) {
			row.push_back(column_value(raw, c));
		}
		result.rows.push_back(std::move(row));
	}
	if (rc != SQLITE_DONE) {
		if (deadline.expired || rc == SQLITE_INTERRUPT) {
			fail("QueryTimeout", fmt::format("query exceeded {} ms", timeout.count()));
		}
		fail("ExecError", sqlite3_errmsg(ro));
	}
	return result;
}

std::string ResultStore::content_digest() const {
	std::lock_guard lock(*write_mutex_);
	std::uint64_t hash = fnv1a64("");
	auto feed = [&](std::string_view text) {
		hash = fnv1a64(text, hash);
		hash = fnv1a64(std::string_view("\x1f", 1), hash);
	};
	{
		Stmt s(db_, "SELECT type, name, sql FROM sqlite_master ORDER BY type, name");
		while (s.step()) {
			feed(s.text(0));
			feed(s.text(1));
			feed(s.text(2));
		}
	}
	for (const char *table : {"meta"}) {
		Stmt s(db_, fmt::format("SELECT key, value FROM {} ORDER BY key", table));
		while (s.step()) {
			feed(s.text(0));
			feed(s.text(1));
		}
	}
	for (const auto &t : kTables) {
		feed(t.name);
		Stmt s(db_, fmt::format("SELECT * FROM {} ORDER BY {}", t.name, t.order_by));
		const int cols = sqlite3_column_count(s.raw());
		while (s.step()) {
			for (int c = 0; c < cols; ++c) {
				const auto v = column_value(s.raw(), c);
				feed(fmt::format("{}:{}", v.index(), value_text(v)));
			}
		}
	}
	return fmt::format("{:016x}", hash);
}

void ResultStore::export_csv(const std::filesystem::path &dir) const {
	std::error_code ec;
	std::filesystem::create_directories(dir, ec);
	if (ec) {
		fail("IoError", fmt::format("cannot create '{}': {}", dir.string(), ec.message()));
	}
	std::lock_guard lock(*write_mutex_);
	for (const auto &t : kTables) {
		const auto file = dir / fmt::format("{}.csv", t.name);
		std::ofstream out(file);
		if (!out) {
			fail("IoError", fmt::format("cannot write '{}'", file.string()));
		}
		Stmt s(db_, fmt::format("SELECT * FROM {} ORDER BY {}", t.name, t.order_by));
		const int cols = sqlite3_column_count(s.raw());
		for (int c = 0; c < cols; ++c) {
			out << (c ? "," : "") << csv_field(sqlite3_column_name(s.raw(), c));
		}
		out << '\n';
		while (s.step()) {
			for (int c = 0; c < cols; ++c) {
				out << (c ? "," : "") << csv_field(value_text(column_value(s.raw(), c)));
			}
			out << '\n';
		}
	}
}

} // namespace easytime
