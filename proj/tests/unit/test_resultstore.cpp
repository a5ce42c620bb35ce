#include "easytime/resultstore.hpp"
#include "easytime/sql_verify.hpp"
#include "expect.hpp"
#include "fixtures.hpp"
#include "sql_fuzz.hpp"

#include <gtest/gtest.h>
#include <sqlite3.h>

using namespace easytime;
using fixtures::error_code;

namespace {

DatasetMeta dataset_row(const std::string &id) {
	DatasetMeta d;
	d.dataset_id = id;
	d.name = "Dataset " + id;
	d.domain = "traffic";
	d.n_channels = 1;
	d.length = 100;
	d.characteristics.seasonality = 0.5;
	d.characteristics.trend = 0.25;
	return d;
}

RunRow run_row(const std::string &run_id, const std::string &dataset, const std::string &method,
               RunStatus status = RunStatus::ok) {
	RunRow r;
	r.run_id = run_id;
	r.dataset_id = dataset;
	r.method_id = method;
	r.strategy = "rolling";
	r.horizon = 12;
	r.lookback = 96;
	r.stride = 12;
	r.status = status;
	r.started_at = "2024-01-01T00:00:00Z";
	r.config_digest = "abc";
	r.n_windows = 3;
	r.runtime_ms = 5;
	return r;
}

// Three naive runs with mae 1, 2, 3.
ResultStore seeded_store(const std::filesystem::path &path) {
	auto store = ResultStore::open(path);
	store.upsert_method({"naive", "Naive", "statistical"});
	for (int i = 1; i <= 3; ++i) {
		const auto id = "d" + std::to_string(i);
		store.upsert_dataset(dataset_row(id));
		store.insert_run_with_scores(run_row("r" + std::to_string(i), id, "naive"),
		                             {{"mae", static_cast<double>(i)}, {"mse", static_cast<double>(i * i)}});
	}
	return store;
}

void raw_exec(const std::filesystem::path &path, const std::string &sql) {
	sqlite3 *db = nullptr;
	ASSERT_EQ(sqlite3_open(path.c_str(), &db), SQLITE_OK);
	ASSERT_EQ(sqlite3_exec(db, sql.c_str(), nullptr, nullptr, nullptr), SQLITE_OK);
	sqlite3_close(db);
}

bool has_violation(const SqlVerdict &v, const std::string &code) {
	for (const auto &x : v.violations) {
		if (x.code == code) {
			return true;
		}
	}
	return false;
}

} // namespace

TEST(ResultStore, RunRoundTrip) {
	fixtures::TempDir dir;
	auto store = seeded_store(dir / "s.db");
	const auto run = store.run("r2");
	ASSERT_TRUE(run.has_value());
	EXPECT_EQ(run->dataset_id, "d2");
	EXPECT_EQ(run->horizon, 12);
	EXPECT_EQ(run->status, RunStatus::ok);
	EXPECT_EQ(store.scores("r2"), (std::map<std::string, double>{{"mae", 2.0}, {"mse", 4.0}}));
	EXPECT_EQ(store.count_runs(), 3u);
	const auto d = store.dataset("d1");
	ASSERT_TRUE(d.has_value());
	EXPECT_EQ(d->name, "Dataset d1");
	EXPECT_EQ(d->characteristics.seasonality, 0.5);
	EXPECT_FALSE(store.dataset("missing").has_value());
}

TEST(ResultStore, ConstraintViolations) {
	fixtures::TempDir dir;
	auto store = seeded_store(dir / "s.db");
	EXPECT_EQ(error_code([&] { store.insert_scores("no-such-run", {{"mae", 1.0}}); }), "ConstraintViolation");
	EXPECT_EQ(error_code([&] { store.insert_run_with_scores(run_row("r9", "missing", "naive"), {}); }),
	          "ConstraintViolation");
	EXPECT_EQ(error_code([&] { store.insert_run_with_scores(run_row("r9", "d1", "unknown-method"), {}); }),
	          "ConstraintViolation");
	EXPECT_EQ(error_code([&] {
		          store.insert_run_with_scores(run_row("r9", "d1", "naive", RunStatus::failed), {{"mae", 1.0}});
	          }),
	          "ConstraintViolation");
	auto bad = dataset_row("bad");
	bad.characteristics.trend = 1.5;
	EXPECT_EQ(error_code([&] { store.upsert_dataset(bad); }), "ConstraintViolation");
	// The failed insert left nothing behind.
	EXPECT_FALSE(store.run("r9").has_value());
	EXPECT_EQ(store.count_runs(), 3u);
}

TEST(ResultStore, UpsertKeepsOneRow) {
	fixtures::TempDir dir;
	auto store = seeded_store(dir / "s.db");
	auto d = dataset_row("d1");
	d.name = "Renamed";
	store.upsert_dataset(d);
	store.upsert_dataset(d);
	EXPECT_EQ(store.datasets().size(), 3u);
	EXPECT_EQ(store.dataset("d1")->name, "Renamed");
	store.upsert_method({"naive", "Naive 2", "statistical"});
	EXPECT_EQ(store.methods().size(), 1u);
	store.insert_run_with_scores(run_row("r1", "d1", "naive"), {{"mae", 9.0}});
	EXPECT_EQ(store.scores("r1"), (std::map<std::string, double>{{"mae", 9.0}}));
	EXPECT_EQ(store.count_runs(), 3u);
}

TEST(ResultStore, SchemaVersionMismatchIsHardError) {
	fixtures::TempDir dir;
	{
		auto store = seeded_store(dir / "s.db");
	}
	raw_exec(dir / "s.db", "UPDATE meta SET value = '99' WHERE key = 'schema_version'");
	EXPECT_EQ(error_code([&] { ResultStore::open(dir / "s.db"); }), "SchemaMismatch");
	EXPECT_EQ(error_code([&] { ResultStore::open_existing(dir / "missing.db"); }), "StoreUnavailable");
	EXPECT_FALSE(std::filesystem::exists(dir / "missing.db"));
}

TEST(ResultStore, ExecuteSelectExample) {
	fixtures::TempDir dir;
	const auto store = seeded_store(dir / "s.db");
	const auto result = store.execute_select(verified_or_throw(
	    "SELECT AVG(value) FROM scores s JOIN runs r ON s.run_id=r.run_id WHERE s.metric='mae' GROUP BY r.method_id LIMIT 10"));
	ASSERT_EQ(result.rows.size(), 1u);
	ASSERT_EQ(result.columns.size(), 1u);
	EXPECT_EQ(std::get<double>(result.rows[0][0]), 2.0);
}

TEST(ResultStore, EmptyStoreReportsColumns) {
	fixtures::TempDir dir;
	const auto store = ResultStore::open(dir / "e.db");
	const auto result = store.execute_select(verified_or_throw("SELECT name, family FROM methods"));
	EXPECT_TRUE(result.rows.empty());
	EXPECT_EQ(result.columns, (std::vector<std::string>{"name", "family"}));
}

TEST(ResultStore, UnverifiedSqlCannotBeWrapped) {
	EXPECT_EQ(error_code([] { VerifiedSql{verify_sql("DROP TABLE scores")}; }), "ContractViolation");
	EXPECT_EQ(error_code([] { verified_or_throw("DROP TABLE scores"); }), "SqlRejected");
}

TEST(ResultStore, SlowQueryTimesOut) {
	fixtures::TempDir dir;
	auto store = ResultStore::open(dir / "big.db");
	store.upsert_method({"naive", "Naive", "statistical"});
	store.upsert_dataset(dataset_row("d"));
	for (int i = 0; i < 400; ++i) {
		store.insert_run_with_scores(run_row("r" + std::to_string(i), "d", "naive"), {{"mae", 1.0 * i}});
	}
	const auto sql = verified_or_throw("SELECT COUNT(*) FROM scores a JOIN scores b ON a.value >= 0 JOIN scores c ON "
	                                   "c.value >= 0 JOIN scores e ON e.value >= 0");
	const auto start = std::chrono::steady_clock::now();
	EXPECT_EQ(error_code([&] { store.execute_select(sql, std::chrono::milliseconds(100)); }), "QueryTimeout");
	EXPECT_LT(std::chrono::steady_clock::now() - start, std::chrono::seconds(5));
}

TEST(ResultStore, ExportWritesOneCsvPerTable) {
	fixtures::TempDir dir;
	const auto store = seeded_store(dir / "s.db");
	store.export_csv(dir / "csv");
	for (const char *table : {"datasets", "methods", "runs", "scores"}) {
		EXPECT_TRUE(std::filesystem::exists(dir / "csv" / (std::string(table) + ".csv"))) << table;
	}
	const auto scores = fixtures::read_file(dir / "csv" / "scores.csv");
	EXPECT_EQ(scores.substr(0, scores.find('\n')), "run_id,metric,value");
	EXPECT_EQ(std::count(scores.begin(), scores.end(), '\n'), 7);
}

TEST(ResultStore, DigestTracksContent) {
	fixtures::TempDir dir;
	auto a = seeded_store(dir / "a.db");
	const auto b = seeded_store(dir / "b.db");
	EXPECT_EQ(a.content_digest(), b.content_digest());
	a.insert_run_with_scores(run_row("r1", "d1", "naive"), {{"mae", 1.5}});
	EXPECT_NE(a.content_digest(), b.content_digest());
}

TEST(SqlVerify, DocumentedExamples) {
	EXPECT_TRUE(verify_sql("SELECT name FROM methods LIMIT 5").ok);
	const auto drop = verify_sql("DROP TABLE scores");
	EXPECT_FALSE(drop.ok);
	EXPECT_TRUE(has_violation(drop, "mutation"));
	const auto users = verify_sql("SELECT secret FROM users");
	EXPECT_FALSE(users.ok);
	EXPECT_TRUE(has_violation(users, "unknown_table"));
}

TEST(SqlVerify, LimitHandling) {
	const auto injected = verify_sql("SELECT name FROM methods;");
	ASSERT_TRUE(injected.ok);
	EXPECT_EQ(injected.sql, "SELECT name FROM methods LIMIT 1000");
	EXPECT_FALSE(injected.notices.empty());
	EXPECT_TRUE(has_violation(verify_sql("SELECT name FROM methods LIMIT 1001"), "limit_too_large"));
	EXPECT_TRUE(verify_sql("select name from methods limit 1000").ok);
}

TEST(SqlVerify, WhitelistAndStructure) {
	EXPECT_TRUE(has_violation(verify_sql("SELECT nope FROM methods"), "unknown_column"));
	EXPECT_TRUE(has_violation(verify_sql("SELECT name FROM methods; SELECT name FROM methods"), "multiple_statements"));
	EXPECT_TRUE(has_violation(verify_sql("SELECT random() FROM methods"), "unknown_function"));
	EXPECT_TRUE(has_violation(verify_sql(""), "empty"));
	EXPECT_TRUE(verify_sql("SELECT m.name, AVG(s.value) AS v FROM scores s JOIN runs r ON s.run_id = r.run_id JOIN "
	                       "methods m ON m.method_id = r.method_id WHERE s.metric IN ('mae', 'mse') AND r.horizon >= 12 "
	                       "GROUP BY m.name ORDER BY v ASC LIMIT 8")
	                .ok);
	EXPECT_TRUE(verify_sql("SELECT name FROM methods WHERE name = 'drop table; delete'").ok);
	EXPECT_EQ(sql_quote("it's"), "'it''s'");
}

TEST(SqlVerify, MutationCorpusLeavesStoreUntouched) {
	fixtures::TempDir dir;
	const auto store = seeded_store(dir / "s.db");
	const auto before = store.content_digest();
	const auto corpus = fixtures::sql_mutation_corpus();
	ASSERT_GE(corpus.size(), 50u);
	for (const auto &attempt : corpus) {
		const auto verdict = verify_sql(attempt);
		if (!verdict.ok) {
			continue;
		}
		try {
			store.execute_select(VerifiedSql(verdict));
		} catch (const Error &) {
		}
	}
	EXPECT_EQ(store.content_digest(), before);
	EXPECT_FALSE(std::filesystem::exists("/tmp/evil.db"));
}
