#pragma once

#include "easytime/error.hpp"
#include "easytime/resultstore.hpp"

#include <chrono>
#include <deque>
#include <json.hpp>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace easytime::qa {

enum class QueryKind { top_k, best_on_dataset, compare_two, characteristic_stats, horizon_breakdown };
enum class HorizonClass { any, short_term, long_term };
enum class ScopeKind { all, univariate, multivariate, domain, dataset };
enum class Direction { above, below };
enum class StatKind { average, count };

inline constexpr int kLongHorizon = 96;
inline constexpr int kShortHorizon = 48;

struct Scope {
	ScopeKind kind = ScopeKind::all;
	std::string name; // domain or dataset name

	friend bool operator==(const Scope &, const Scope &) = default;
};

struct CharacteristicFilter {
	std::string name; // one of the six characteristics
	double threshold = 0.0;
	Direction direction = Direction::above;

	friend bool operator==(const CharacteristicFilter &, const CharacteristicFilter &) = default;
};

struct QueryAst {
	QueryKind kind = QueryKind::top_k;
	int k = 5;
	std::string metric = "mae";
	HorizonClass horizon = HorizonClass::any;
	Scope scope;
	std::optional<CharacteristicFilter> filter;
	/// compare_two: both ids; horizon_breakdown: first only.
	std::optional<std::pair<std::string, std::string>> methods;
	/// characteristic_stats
	StatKind stat = StatKind::average;
	std::string characteristic;

	friend bool operator==(const QueryAst &, const QueryAst &) = default;
};

/// Raised when a question does not match the grammar; carries the closest
/// template questions.
class ParseFailed : public Error {
public:
	ParseFailed(const std::string &message, std::vector<std::string> suggestions)
	    : Error("ParseFailed", message), suggestions_(std::move(suggestions)) {}
	const std::vector<std::string> &suggestions() const noexcept { return suggestions_; }

private:
	std::vector<std::string> suggestions_;
};

/// Raised when verified SQL fails at execution time.
class QaExecError : public Error {
public:
	QaExecError(const std::string &message, std::string sql) : Error("ExecError", message), sql_(std::move(sql)) {}
	const std::string &sql() const noexcept { return sql_; }

private:
	std::string sql_;
};

/// Case-insensitive parse against the question grammar. Throws ParseFailed.
QueryAst parse_question(std::string_view text);

/// Deterministic compilation against the results schema.
std::string ast_to_sql(const QueryAst &ast);

/// Template questions, one per production family; used for suggestions.
const std::vector<std::string> &template_questions();

struct ChartSpec {
	std::string chart_type = "table"; // bar, line, pie, table
	std::string title;
	std::vector<std::string> x;
	std::vector<double> y;
	std::string y_label;
};

struct QaAnswer {
	std::string question;
	std::string text;
	std::string sql;
	QueryResult rows;
	ChartSpec chart;
	std::string source = "grammar"; // grammar or llm
	bool help = false;              // true for ParseFailed help answers
	std::vector<std::string> suggestions;
	std::vector<std::string> notices;
};

nlohmann::json to_json(const ChartSpec &chart);
nlohmann::json to_json(const QaAnswer &answer);
nlohmann::json to_json(const QueryAst &ast);

struct Turn {
	std::string question;
	QaAnswer answer;
};

inline constexpr std::size_t kMaxSessionTurns = 20;

/// Per-session Q&A history, capped at 20 turns (oldest dropped).
class SessionStore {
public:
	void append(const std::string &session_id, Turn turn);
	std::vector<Turn> history(const std::string &session_id) const;

private:
	mutable std::mutex mutex_;
	std::map<std::string, std::deque<Turn>> sessions_;
};

/// External SQL translator endpoint; disabled when `url` is empty.
struct TranslatorConfig {
	std::string url;
	std::string key;
	std::chrono::milliseconds timeout{10'000};

	bool enabled() const noexcept { return !url.empty(); }
	/// Reads QA_LLM_URL and QA_LLM_KEY.
	static TranslatorConfig from_env();
};

/// Renders the prompt template with the schema, the last five turns and the question.
std::string render_prompt(std::string_view question, std::string_view schema_text, const std::vector<Turn> &history);

/// First SQL statement in a translator response (code fences stripped, cut at
/// the first top-level semicolon). Throws TranslatorBadOutput.
std::string extract_sql(std::string_view response);

/// POSTs {"prompt"} to the translator and returns the extracted SQL. Throws
/// TranslatorUnavailable or TranslatorBadOutput.
std::string llm_translate(std::string_view question, std::string_view schema_text, const std::vector<Turn> &history,
                          const TranslatorConfig &config);

/// Full question-to-answer chain. Translator problems fall back to the
/// grammar; unparseable questions yield a help answer. The turn is appended
/// to the session. Throws QaExecError.
QaAnswer answer(std::string_view question, const std::string &session_id, SessionStore &sessions,
                const ResultStore &store, const TranslatorConfig &translator = {});

} // namespace easytime::qa
