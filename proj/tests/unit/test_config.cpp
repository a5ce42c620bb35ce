#include "easytime/config.hpp"
#include "easytime/qa.hpp"
#include "easytime/resultstore.hpp"
#include "expect.hpp"
#include "fixtures.hpp"

#include <cstdlib>
#include <gtest/gtest.h>
#include <sstream>

using namespace easytime;
using fixtures::error_code;

namespace {

std::vector<ConfigIssue> issues_of(const std::string &text, const std::filesystem::path &base = {}) {
	try {
		validate_config(text, base);
	} catch (const ConfigInvalid &e) {
		return e.issues();
	}
	return {};
}

bool has_path(const std::vector<ConfigIssue> &issues, const std::string &path) {
	return std::any_of(issues.begin(), issues.end(), [&](const auto &i) { return i.path == path; });
}

std::string run_cli(const std::string &args, const std::filesystem::path &out_file, int &status) {
	status = fixtures::run_command(fixtures::shell_quote(fixtures::cli()) + " " + args + " > " +
	                               fixtures::shell_quote(out_file.string()) + " 2>/dev/null");
	return fixtures::read_file(out_file);
}

constexpr const char *kSmall = R"({
  "datasets": [{"synthetic": [
    {"name": "a", "seed": 1, "length": 120, "level": 5, "period": 12, "season_amp": 2, "noise_sd": 0.3},
    {"name": "b", "seed": 2, "length": 120, "level": 5, "trend_slope": 0.1, "noise_sd": 0.3}
  ]}],
  "methods": [{"method_id": "naive"}, {"method_id": "seasonal_naive", "params": {"period": 12}}],
  "eval": {"strategy": "rolling", "horizon": 6, "metrics": ["mae", "smape"]},
  "output": {"results_db": "out/r.db", "report": "out/report.md"},
  "seed": 3
})";

} // namespace

TEST(Config, MinimalConfigEchoesDefaults) {
	const auto config = validate_config(R"({"datasets": [{"synthetic": [{}]}], "methods": ["naive"]})");
	ASSERT_EQ(config.datasets.size(), 1u);
	ASSERT_EQ(config.methods.size(), 1u);
	EXPECT_EQ(config.methods[0].method_id, "naive");
	const auto canonical = canonical_json(config);
	EXPECT_EQ(canonical.at("eval").at("horizon"), EvalConfig{}.horizon);
	EXPECT_EQ(canonical.at("eval").at("strategy"), "fixed");
	EXPECT_TRUE(canonical.at("output").contains("results_db"));
	// The canonical form is itself a valid config with the same canonical form.
	EXPECT_EQ(canonical_json(validate_config(canonical.dump())), canonical);
}

TEST(Config, ZeroHorizonIsReportedAtItsPath) {
	const auto issues = issues_of(R"({"datasets": [{"synthetic": [{}]}], "methods": ["naive"], "eval": {"horizon": 0}})");
	EXPECT_TRUE(has_path(issues, "eval.horizon"));
	EXPECT_EQ(error_code([] { validate_config(R"({"datasets": [{"synthetic": [{}]}], "methods": ["naive"], "eval": {"horizon": 0}})"); }),
	          "ConfigInvalid");
}

TEST(Config, AllExpandsToBuiltins) {
	const auto config = validate_config(R"({"datasets": [{"synthetic": [{}]}], "methods": "all"})");
	std::vector<std::string> ids;
	for (const auto &m : config.methods) {
		ids.push_back(m.method_id);
	}
	EXPECT_EQ(ids, builtin_method_ids());
}

TEST(Config, EveryIssueIsReportedAtOnce) {
	const auto issues = issues_of(R"({
	  "datasets": [{"path": "nowhere/*.csv"}],
	  "methods": [{"method_id": "prophet"}, {"method_id": "ses", "params": {"alpha": 5}}],
	  "eval": {"horizon": 0, "strategy": "sideways", "bogus": 1},
	  "colour": "blue"
	})");
	EXPECT_GE(issues.size(), 6u);
	EXPECT_TRUE(has_path(issues, "eval.horizon"));
	EXPECT_TRUE(has_path(issues, "eval.strategy"));
	EXPECT_TRUE(has_path(issues, "eval.bogus"));
	EXPECT_TRUE(has_path(issues, "colour"));
	for (const auto &i : issues) {
		EXPECT_FALSE(i.expected.empty());
		EXPECT_FALSE(i.got.empty());
	}
	EXPECT_FALSE(issues_of("{not json").empty());
	EXPECT_TRUE(has_path(issues_of(R"({"methods": ["naive"]})"), "datasets"));
	EXPECT_FALSE(issues_of(R"({"datasets": [{"synthetic": [{}]}], "methods": ["naive", "naive"]})").empty());
}

TEST(Config, FileDatasetsResolveAgainstConfigDirectory) {
	fixtures::TempDir dir;
	std::filesystem::create_directories(dir / "data");
	fixtures::write_file(dir / "data" / "x.csv", "t,v\n1,1\n2,2\n");
	fixtures::write_file(dir / "data" / "y.csv", "t,v\n1,1\n2,\n3,3\n");
	const auto config = validate_config(
	    R"({"datasets": ["data/*.csv", {"path": "data/y.csv", "name": "Why", "domain": "web", "impute": "linear"}], "methods": ["naive"]})",
	    dir.path());
	ASSERT_EQ(config.datasets.size(), 3u);
	EXPECT_EQ(config.datasets[2].name, "Why");
	EXPECT_EQ(config.datasets[2].domain, "web");
	EXPECT_TRUE(config.datasets[0].path.is_absolute());
	EXPECT_TRUE(has_path(issues_of(R"({"datasets": [{"path": "data/x.csv", "domain": "space"}], "methods": ["naive"]})",
	                               dir.path()),
	                     "datasets[0].domain"));
}

TEST(Config, WorkerOverrideFromEnvironment) {
	::setenv("EASYTIME_WORKERS", "3", 1);
	EXPECT_EQ(workers_from_env(8), 3u);
	::setenv("EASYTIME_WORKERS", "zero", 1);
	EXPECT_EQ(workers_from_env(8), 8u);
	::unsetenv("EASYTIME_WORKERS");
	EXPECT_EQ(workers_from_env(8), 8u);
}

TEST(OneClick, ExitCodesAndReproducibleReport) {
	fixtures::TempDir dir;
	fixtures::write_file(dir / "ok.json", kSmall);
	std::ostringstream log;
	EXPECT_EQ(run_one_click(dir / "ok.json", log), 0);
	const auto first = fixtures::read_file(dir / "out" / "report.md");
	EXPECT_FALSE(first.empty());
	EXPECT_NE(first.find("seasonal_naive"), std::string::npos);
	{
		const auto store = ResultStore::open_existing(dir / "out" / "r.db");
		EXPECT_EQ(store.count_runs(RunStatus::ok), 4u);
	}
	std::filesystem::remove_all(dir / "out");
	EXPECT_EQ(run_one_click(dir / "ok.json", log), 0);
	EXPECT_EQ(fixtures::read_file(dir / "out" / "report.md"), first);
	EXPECT_FALSE(log.str().empty());

	std::string partial = kSmall;
	partial.replace(partial.find(R"({"period": 12})"), 14, R"({"period": 100})");
	fixtures::write_file(dir / "partial.json", partial);
	EXPECT_EQ(run_one_click(dir / "partial.json", log), 2);
	const auto report = fixtures::read_file(dir / "out" / "report.md");
	EXPECT_NE(report.find("InsufficientHistory"), std::string::npos);
}

TEST(OneClick, BadConfigCreatesNoStore) {
	fixtures::TempDir dir;
	fixtures::write_file(dir / "missing.json", R"({"datasets": ["data/none.csv"], "methods": ["naive"],
	  "output": {"results_db": "r.db", "report": "report.md"}})");
	std::ostringstream log;
	EXPECT_EQ(run_one_click(dir / "missing.json", log), 1);
	EXPECT_FALSE(std::filesystem::exists(dir / "r.db"));
	EXPECT_NE(log.str().find("none.csv"), std::string::npos);
	EXPECT_EQ(run_one_click(dir / "does-not-exist.json", log), 1);
}

TEST(Cli, RunAskAndExport) {
	fixtures::TempDir dir;
	fixtures::write_file(dir / "ok.json", kSmall);
	int status = -1;
	run_cli("run -c " + fixtures::shell_quote((dir / "ok.json").string()), dir / "run.txt", status);
	EXPECT_EQ(status, 0);
	const auto db = fixtures::shell_quote((dir / "out" / "r.db").string());

	const std::string question = "top-2 methods by mae on all datasets";
	const auto text = run_cli("ask -d " + db + " " + fixtures::shell_quote(question), dir / "ask.txt", status);
	EXPECT_EQ(status, 0);
	const auto store = ResultStore::open_existing(dir / "out" / "r.db");
	qa::SessionStore sessions;
	const auto golden = qa::answer(question, "golden", sessions, store);
	EXPECT_TRUE(text.starts_with(golden.text + "\n"));
	EXPECT_NE(text.find(golden.sql), std::string::npos);

	const auto json_text = run_cli("ask --json -d " + db + " " + fixtures::shell_quote(question), dir / "ask.json", status);
	EXPECT_EQ(status, 0);
	EXPECT_EQ(nlohmann::json::parse(json_text).at("rows"), qa::to_json(golden).at("rows"));

	run_cli("ask -d " + db + " 'tell me a joke'", dir / "help.txt", status);
	EXPECT_EQ(status, 2);

	run_cli("export -d " + db + " -o " + fixtures::shell_quote((dir / "csv").string()), dir / "export.txt", status);
	EXPECT_EQ(status, 0);
	EXPECT_TRUE(std::filesystem::exists(dir / "csv" / "runs.csv"));

	run_cli("ask -d " + fixtures::shell_quote((dir / "nope.db").string()) + " 'x'", dir / "err.txt", status);
	EXPECT_EQ(status, 1);
	run_cli("run -c " + fixtures::shell_quote((dir / "nope.json").string()), dir / "err.txt", status);
	EXPECT_EQ(status, 1);
}

TEST(Cli, PretrainWritesLoadableModel) {
	fixtures::TempDir dir;
	fixtures::write_file(dir / "p.json", R"({
	  "datasets": [{"synthetic": [{}]}],
	  "methods": ["naive", "mean", "seasonal_naive"],
	  "eval": {"strategy": "rolling", "horizon": 12, "metrics": ["mae"]},
	  "pretrain": {"corpus_size": 12, "corpus_seed": 4, "length": 160, "epochs": 50}
	})");
	int status = -1;
	run_cli("pretrain -c " + fixtures::shell_quote((dir / "p.json").string()) + " -o " +
	            fixtures::shell_quote((dir / "m.json").string()),
	        dir / "log.txt", status);
	ASSERT_EQ(status, 0);
	const auto model = automl::load_classifier(dir / "m.json");
	EXPECT_EQ(model.method_ids, (std::vector<std::string>{"naive", "mean", "seasonal_naive"}));
	EXPECT_EQ(model.train_meta.epochs, 50);
}
