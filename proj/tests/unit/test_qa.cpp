#include "easytime/config.hpp"
#include "easytime/metrics.hpp"
#include "easytime/qa.hpp"
#include "easytime/resultstore.hpp"
#include "expect.hpp"
#include "fixtures.hpp"

#include <gtest/gtest.h>
#include <httplib.h>
#include <json.hpp>
#include <atomic>
#include <thread>

using namespace easytime;
using namespace easytime::qa;
using fixtures::error_code;

namespace {

constexpr const char *kS3 =
    "What are the top-8 methods (ordered by MAE) for long-term forecasting on all multivariate datasets with trends?";

class DemoStore : public ::testing::Test {
protected:
	static void SetUpTestSuite() {
		dir_ = new fixtures::TempDir();
		fixtures::build_demo_store(*dir_ / "demo.db");
		store_ = new ResultStore(ResultStore::open_existing(*dir_ / "demo.db"));
	}
	static void TearDownTestSuite() {
		delete store_;
		delete dir_;
	}
	static const ResultStore &store() { return *store_; }

private:
	static inline fixtures::TempDir *dir_ = nullptr;
	static inline ResultStore *store_ = nullptr;
};

// A stand-in translator endpoint answering every prompt with `reply`.
class MockTranslator {
public:
	MockTranslator() {
		server_.Post("/translate", [this](const httplib::Request &req, httplib::Response &res) {
			last_prompt_ = nlohmann::json::parse(req.body).at("prompt").get<std::string>();
			std::lock_guard lock(mutex_);
			res.set_content(nlohmann::json{{"text", reply_}}.dump(), "application/json");
		});
		port_ = server_.bind_to_any_port("127.0.0.1");
		thread_ = std::thread([this] { server_.listen_after_bind(); });
		server_.wait_until_ready();
	}
	~MockTranslator() {
		server_.stop();
		thread_.join();
	}
	void reply(std::string text) {
		std::lock_guard lock(mutex_);
		reply_ = std::move(text);
	}
	TranslatorConfig config() const {
		TranslatorConfig c;
		c.url = "http://127.0.0.1:" + std::to_string(port_) + "/translate";
		c.key = "test-key";
		c.timeout = std::chrono::milliseconds(3000);
		return c;
	}
	const std::string &last_prompt() const { return last_prompt_; }

private:
	httplib::Server server_;
	std::thread thread_;
	int port_ = 0;
	std::mutex mutex_;
	std::string reply_;
	std::string last_prompt_;
};

std::vector<std::string> names(const QueryResult &r) {
	std::vector<std::string> out;
	for (const auto &row : r.rows) {
		out.push_back(std::get<std::string>(row[0]));
	}
	return out;
}

} // namespace

TEST(QaParse, DocumentedExamples) {
	QueryAst s3;
	s3.kind = QueryKind::top_k;
	s3.k = 8;
	s3.metric = "mae";
	s3.horizon = HorizonClass::long_term;
	s3.scope = {ScopeKind::multivariate, ""};
	s3.filter = CharacteristicFilter{"trend", 0.6, Direction::above};
	EXPECT_EQ(parse_question(kS3), s3);

	QueryAst traffic;
	traffic.kind = QueryKind::top_k;
	traffic.k = 3;
	traffic.metric = "smape";
	traffic.scope = {ScopeKind::domain, "traffic"};
	EXPECT_EQ(parse_question("top-3 methods by smape on domain traffic"), traffic);
	EXPECT_EQ(parse_question("TOP-3 METHODS BY SMAPE ON DOMAIN TRAFFIC"), traffic);
}

TEST(QaParse, UnknownQuestionsCarrySuggestions) {
	try {
		parse_question("tell me a joke");
		FAIL() << "expected ParseFailed";
	} catch (const ParseFailed &e) {
		EXPECT_EQ(e.code(), "ParseFailed");
		EXPECT_FALSE(e.suggestions().empty());
		for (const auto &s : e.suggestions()) {
			EXPECT_NO_THROW(parse_question(s)) << s;
		}
	}
	EXPECT_EQ(error_code([] { parse_question(""); }), "ParseFailed");
	EXPECT_EQ(error_code([] { parse_question("top-3 methods by accuracy"); }), "ParseFailed");
}

TEST(QaCompile, S3CompilesToTheDocumentedSql) {
	EXPECT_EQ(ast_to_sql(parse_question(kS3)),
	          "SELECT m.name, AVG(s.value) AS v FROM scores s JOIN runs r ON s.run_id=r.run_id JOIN methods m ON "
	          "r.method_id=m.method_id JOIN datasets d ON r.dataset_id=d.dataset_id WHERE s.metric='mae' AND "
	          "r.status='ok' AND r.horizon>=96 AND d.n_channels>1 AND d.trend>0.6 GROUP BY m.name ORDER BY v ASC LIMIT 8");
}

TEST(QaCompile, BestOnDatasetIsSingleRow) {
	const auto sql = ast_to_sql(parse_question("Which is the best method by mae on dataset ETTh1-like?"));
	EXPECT_NE(sql.find("'ETTh1-like'"), std::string::npos);
	EXPECT_TRUE(sql.ends_with("ORDER BY v ASC LIMIT 1"));
}

TEST(QaCompile, EveryProductionVerifies) {
	std::vector<Scope> scopes{{ScopeKind::all, ""},
	                          {ScopeKind::univariate, ""},
	                          {ScopeKind::multivariate, ""},
	                          {ScopeKind::domain, "traffic"},
	                          {ScopeKind::dataset, "it's-odd"}};
	std::vector<std::optional<CharacteristicFilter>> filters{std::nullopt};
	for (const char *c : {"seasonality", "trend", "transition", "shifting", "stationarity", "correlation"}) {
		filters.push_back(CharacteristicFilter{c, 0.6, Direction::above});
		filters.push_back(CharacteristicFilter{c, 0.4, Direction::below});
	}
	std::size_t compiled = 0;
	for (auto kind : {QueryKind::top_k, QueryKind::best_on_dataset, QueryKind::compare_two,
	                  QueryKind::characteristic_stats, QueryKind::horizon_breakdown}) {
		for (const auto metric : kMetricNames) {
			for (auto horizon : {HorizonClass::any, HorizonClass::short_term, HorizonClass::long_term}) {
				for (const auto &scope : scopes) {
					for (const auto &filter : filters) {
						QueryAst ast;
						ast.kind = kind;
						ast.k = 7;
						ast.metric = std::string(metric);
						ast.horizon = horizon;
						ast.scope = scope;
						ast.filter = filter;
						if (kind == QueryKind::best_on_dataset) {
							ast.scope = {ScopeKind::dataset, "ETTh1-like"};
						}
						if (kind == QueryKind::compare_two || kind == QueryKind::horizon_breakdown) {
							ast.methods = std::pair<std::string, std::string>{"naive", "ses"};
						}
						if (kind == QueryKind::characteristic_stats) {
							ast.characteristic = "trend";
							ast.stat = compiled % 2 ? StatKind::count : StatKind::average;
						}
						const auto sql = ast_to_sql(ast);
						const auto verdict = verify_sql(sql);
						EXPECT_TRUE(verdict.ok) << sql << " -> "
						                        << (verdict.violations.empty() ? "" : verdict.violations[0].message);
						EXPECT_EQ(ast_to_sql(ast), sql);
						++compiled;
					}
				}
			}
		}
	}
	EXPECT_GT(compiled, 1000u);
	for (const auto &q : template_questions()) {
		EXPECT_TRUE(verify_sql(ast_to_sql(parse_question(q))).ok) << q;
	}
}

TEST_F(DemoStore, CanonicalQuestionsMatchReferenceSql) {
	const auto canonical = nlohmann::json::parse(fixtures::read_file(fixtures::asset("qa/canonical_questions.json")));
	ASSERT_EQ(canonical.size(), 20u);
	std::size_t nonempty = 0;
	for (const auto &item : canonical) {
		const auto question = item.at("question").get<std::string>();
		const auto grammar = store().execute_select(verified_or_throw(ast_to_sql(parse_question(question))));
		const auto reference = store().execute_select(verified_or_throw(item.at("reference_sql").get<std::string>()));
		EXPECT_EQ(grammar.rows, reference.rows) << question;
		nonempty += grammar.rows.empty() ? 0 : 1;
	}
	EXPECT_GE(nonempty, 18u);
}

TEST_F(DemoStore, S3AnswerRanksEightMethods) {
	SessionStore sessions;
	const auto before = store().content_digest();
	const auto reply = answer(kS3, "s", sessions, store());
	ASSERT_EQ(reply.rows.rows.size(), 8u);
	EXPECT_EQ(reply.chart.chart_type, "bar");
	EXPECT_EQ(reply.chart.x.size(), 8u);
	EXPECT_EQ(reply.chart.x, names(reply.rows));
	for (std::size_t i = 1; i < reply.chart.y.size(); ++i) {
		EXPECT_LE(reply.chart.y[i - 1], reply.chart.y[i]);
	}
	EXPECT_EQ(reply.source, "grammar");
	EXPECT_TRUE(verify_sql(reply.sql).ok);
	for (const auto &name : reply.chart.x) {
		EXPECT_NE(reply.text.find(name), std::string::npos) << name;
	}
	EXPECT_NE(reply.text.find("1. "), std::string::npos);
	EXPECT_EQ(store().content_digest(), before);
}

TEST_F(DemoStore, ChartTypesFollowQueryKind) {
	SessionStore sessions;
	const auto breakdown = answer("mae of holt_winters by horizon", "c", sessions, store());
	EXPECT_EQ(breakdown.chart.chart_type, "line");
	EXPECT_EQ(breakdown.chart.x.size(), breakdown.rows.rows.size());
	const auto compare = answer("Compare naive and ses by mae", "c", sessions, store());
	EXPECT_EQ(compare.chart.chart_type, "bar");
	EXPECT_EQ(compare.rows.rows.size(), 2u);
	const auto empty = answer("top-3 methods by mae on domain nature", "c", sessions, store());
	EXPECT_TRUE(empty.rows.rows.empty());
	EXPECT_EQ(empty.chart.chart_type, "table");
	EXPECT_TRUE(empty.text.starts_with("No benchmark results match"));
	const auto help = answer("tell me a joke", "c", sessions, store());
	EXPECT_TRUE(help.help);
	EXPECT_FALSE(help.suggestions.empty());
	EXPECT_TRUE(help.sql.empty());
}

TEST_F(DemoStore, SessionHistoryGrowsAndIsCapped) {
	SessionStore sessions;
	const auto a = answer("top-3 methods by smape on domain traffic", "h", sessions, store());
	const auto b = answer("top-3 methods by smape on domain traffic", "h", sessions, store());
	EXPECT_EQ(sessions.history("h").size(), 2u);
	EXPECT_EQ(to_json(a), to_json(b));
	EXPECT_TRUE(sessions.history("other").empty());
	for (int i = 0; i < 30; ++i) {
		answer("How many datasets per domain?", "h", sessions, store());
	}
	EXPECT_EQ(sessions.history("h").size(), kMaxSessionTurns);
}

TEST_F(DemoStore, TranslatorEchoMatchesGrammarRows) {
	MockTranslator mock;
	SessionStore sessions;
	const auto grammar = answer(kS3, "g", sessions, store());
	mock.reply("```sql\n" + grammar.sql + ";\n```");
	const auto llm = answer(kS3, "g", sessions, store(), mock.config());
	EXPECT_EQ(llm.source, "llm");
	EXPECT_EQ(llm.rows.rows, grammar.rows.rows);
	EXPECT_NE(mock.last_prompt().find(kS3), std::string::npos);
	EXPECT_NE(mock.last_prompt().find("CREATE TABLE"), std::string::npos);
	// The previous turn is part of the prompt context.
	EXPECT_NE(mock.last_prompt().find(grammar.sql), std::string::npos);
}

TEST_F(DemoStore, TranslatorMutationFallsBackToGrammar) {
	MockTranslator mock;
	SessionStore sessions;
	const auto before = store().content_digest();
	mock.reply("DROP TABLE scores");
	const auto reply = answer(kS3, "d", sessions, store(), mock.config());
	EXPECT_EQ(reply.source, "grammar");
	EXPECT_EQ(reply.rows.rows.size(), 8u);
	const bool flagged = std::any_of(reply.notices.begin(), reply.notices.end(),
	                                 [](const std::string &n) { return n.find("mutation") != std::string::npos; });
	EXPECT_TRUE(flagged);
	mock.reply("I cannot help with that.");
	EXPECT_EQ(answer(kS3, "d", sessions, store(), mock.config()).source, "grammar");
	EXPECT_EQ(store().content_digest(), before);
}

TEST_F(DemoStore, UnreachableTranslatorFallsBack) {
	TranslatorConfig dead;
	{
		MockTranslator mock;
		dead = mock.config();
	}
	dead.timeout = std::chrono::milliseconds(500);
	SessionStore sessions;
	const auto reply = answer(kS3, "u", sessions, store(), dead);
	EXPECT_EQ(reply.source, "grammar");
	EXPECT_EQ(reply.rows.rows.size(), 8u);
	ASSERT_FALSE(reply.notices.empty());
	EXPECT_NE(reply.notices[0].find("TranslatorUnavailable"), std::string::npos);
	EXPECT_EQ(answer(kS3, "u", sessions, store(), TranslatorConfig{}).source, "grammar");
}

TEST(QaTranslator, ExtractSql) {
	EXPECT_EQ(extract_sql("Here you go:\n```sql\nSELECT name FROM methods;\n```"), "SELECT name FROM methods");
	EXPECT_EQ(extract_sql("select 'a;b' from methods; drop table x"), "select 'a;b' from methods");
	EXPECT_EQ(error_code([] { extract_sql("no idea"); }), "TranslatorBadOutput");
}

TEST(QaTranslator, PromptKeepsLastFiveTurns) {
	std::vector<Turn> history;
	for (int i = 0; i < 7; ++i) {
		QaAnswer a;
		a.sql = "SELECT " + std::to_string(i);
		history.push_back({"question " + std::to_string(i), a});
	}
	const auto prompt = render_prompt("latest?", "SCHEMA-TEXT", history);
	EXPECT_NE(prompt.find("SCHEMA-TEXT"), std::string::npos);
	EXPECT_NE(prompt.find("latest?"), std::string::npos);
	EXPECT_EQ(prompt.find("question 1"), std::string::npos);
	EXPECT_NE(prompt.find("question 2"), std::string::npos);
	EXPECT_NE(prompt.find("question 6"), std::string::npos);
}
