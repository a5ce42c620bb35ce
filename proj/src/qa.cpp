#include "easytime/qa.hpp"

#include "easytime/assets.hpp"
#include "easytime/features.hpp"
#include "easytime/metrics.hpp"
#include "easytime/sql_verify.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fmt/format.h>
#include <regex>
#include <set>
#include <sstream>

namespace easytime::qa {

namespace {

const std::string kName = R"(([a-z0-9_.:/\-]+))";
const std::string kMetric = R"((mae|mse|rmse|mape|smape|s-mape|mase)\b)";
const std::string kChar =
    R"((seasonality|seasonal|trends?|transitions?|shifting|shifts?|stationarity|stationary|correlations?|correlated)\b)";

std::string characteristic_of(std::string word) {
	if (word.rfind("season", 0) == 0) {
		return "seasonality";
	}
	if (word.rfind("trend", 0) == 0) {
		return "trend";
	}
	if (word.rfind("transition", 0) == 0) {
		return "transition";
	}
	if (word.rfind("shift", 0) == 0) {
		return "shifting";
	}
	if (word.rfind("stationar", 0) == 0) {
		return "stationarity";
	}
	return "correlation";
}

std::string metric_of(std::string word) {
	return word == "s-mape" ? "smape" : word;
}

std::string normalize(std::string_view text) {
	std::string out;
	bool space = false;
	for (char c : text) {
		if (std::isspace(static_cast<unsigned char>(c))) {
			space = !out.empty();
			continue;
		}
		if (space) {
			out += ' ';
			space = false;
		}
		out += c;
	}
	while (!out.empty() && (out.back() == '?' || out.back() == '.' || out.back() == '!' || out.back() == ' ')) {
		out.pop_back();
	}
	return out;
}

std::string lower(std::string_view s) {
	std::string out(s);
	std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
	return out;
}

std::set<std::string> words_of(std::string_view text) {
	std::set<std::string> out;
	std::string current;
	for (char c : lower(text)) {
		if (std::isalnum(static_cast<unsigned char>(c)) || c == '_') {
			current += c;
		} else if (!current.empty()) {
			out.insert(std::exchange(current, {}));
		}
	}
	if (!current.empty()) {
		out.insert(current);
	}
	return out;
}

std::vector<std::string> suggest(std::string_view question) {
	const auto q = words_of(question);
	std::vector<std::pair<double, std::string>> scored;
	for (const auto &t : template_questions()) {
		const auto w = words_of(t);
		std::size_t common = 0;
		for (const auto &x : q) {
			common += w.count(x);
		}
		const double uni = static_cast<double>(q.size() + w.size() - common);
		scored.emplace_back(uni > 0 ? static_cast<double>(common) / uni : 0.0, t);
	}
	std::stable_sort(scored.begin(), scored.end(), [](const auto &a, const auto &b) { return a.first > b.first; });
	std::vector<std::string> out;
	for (std::size_t i = 0; i < 3 && i < scored.size(); ++i) {
		out.push_back(scored[i].second);
	}
	return out;
}

class Parser {
public:
	Parser(std::string original) : orig_(std::move(original)), low_(lower(orig_)) {}

	QueryAst parse() {
		if (low_.empty()) {
			failed("empty question");
		}
		head();
		modifiers();
		check();
		return ast_;
	}

private:
	std::string orig_;
	std::string low_;
	std::size_t pos_ = 0;
	QueryAst ast_;
	bool has_metric_ = false;
	bool has_horizon_ = false;
	bool has_scope_ = false;

	[[noreturn]] void failed(const std::string &why) const { throw ParseFailed(why, suggest(orig_)); }

	/// Anchored match at the cursor; on success advances past the match and
	/// any following separator.
	bool eat(const std::string &pattern, std::smatch &m) {
		static thread_local std::map<std::string, std::regex> cache;
		auto it = cache.find(pattern);
		if (it == cache.end()) {
			it = cache.emplace(pattern, std::regex(pattern)).first;
		}
		const auto begin = low_.cbegin() + static_cast<std::ptrdiff_t>(pos_);
		if (!std::regex_search(begin, low_.cend(), m, it->second, std::regex_constants::match_continuous)) {
			return false;
		}
		pos_ += static_cast<std::size_t>(m.length(0));
		while (pos_ < low_.size() && (low_[pos_] == ' ' || low_[pos_] == ',')) {
			++pos_;
		}
		return true;
	}

	std::string original(const std::smatch &m, int group) const {
		const auto offset = static_cast<std::size_t>(m.position(group)) + (pos_for_group_base_);
		return orig_.substr(offset, static_cast<std::size_t>(m.length(group)));
	}

	std::size_t pos_for_group_base_ = 0;

	bool eat_at(const std::string &pattern, std::smatch &m) {
		pos_for_group_base_ = pos_;
		return eat(pattern, m);
	}

	void head() {
		std::smatch m;
		if (eat_at(R"((?:(?:what|which) are |show(?: me)? |list |give me )?(?:the )?top[- ]?(\d+) (?:methods?|models?)\b)",
		           m)) {
			ast_.kind = QueryKind::top_k;
			const auto digits = m.str(1);
			ast_.k = digits.size() > 3 ? 1000 : std::stoi(digits);
			if (ast_.k < 1 || ast_.k > 100) {
				failed(fmt::format("k must lie in [1, 100], got {}", digits));
			}
			return;
		}
		if (eat_at(R"((?:(?:which|what) (?:is|was) )?(?:the )?best (?:method|model)\b)", m)) {
			ast_.kind = QueryKind::best_on_dataset;
			ast_.k = 1;
			return;
		}
		if (eat_at("compare " + kName + " (?:and|vs\\.?|versus|with|to) " + kName, m)) {
			ast_.kind = QueryKind::compare_two;
			ast_.k = 2;
			ast_.methods = std::make_pair(m.str(1), m.str(2));
			return;
		}
		if (eat_at("(?:what is )?(?:the )?(?:average|mean) " + kChar + " (?:score )?(?:by|per|for each) domain", m)) {
			ast_.kind = QueryKind::characteristic_stats;
			ast_.stat = StatKind::average;
			ast_.characteristic = characteristic_of(m.str(1));
			return;
		}
		if (eat_at(R"(how many datasets (?:are there )?(?:per|by|in each|for each) domain)", m)) {
			ast_.kind = QueryKind::characteristic_stats;
			ast_.stat = StatKind::count;
			return;
		}
		if (eat_at("(?:(?:show|what is) )?(?:the )?" + kMetric + " of " + kName + " (?:by|per|across|for each) horizon",
		           m)) {
			ast_.kind = QueryKind::horizon_breakdown;
			ast_.metric = metric_of(m.str(1));
			has_metric_ = true;
			ast_.methods = std::make_pair(m.str(2), std::string());
			return;
		}
		failed("the question does not match any known question form");
	}

	void modifiers() {
		while (pos_ < low_.size()) {
			std::smatch m;
			if (eat_at(R"(\(?(?:ordered|ranked|sorted) by )" + kMetric + R"(\)?)", m) ||
			    eat_at("(?:by|in terms of|using|according to) " + kMetric, m)) {
				set_metric(metric_of(m.str(1)));
			} else if (eat_at(R"((?:for|in) (long|short)[- ]term (?:forecasting|forecasts?|prediction))", m) ||
			           eat_at(R"((?:at|for|with|on) (long|short) horizons?)", m)) {
				if (has_horizon_) {
					failed("horizon given twice");
				}
				has_horizon_ = true;
				ast_.horizon = m.str(1) == "long" ? HorizonClass::long_term : HorizonClass::short_term;
			} else if (eat_at(R"((?:on|across|over|for|in) (?:all )?(?:the )?(multivariate|univariate) (?:datasets|series|data))",
			                  m)) {
				set_scope({m.str(1) == "multivariate" ? ScopeKind::multivariate : ScopeKind::univariate, {}});
			} else if (eat_at(R"((?:on|across|over|for|in) all(?: the)? (?:datasets|series|data))", m)) {
				set_scope({ScopeKind::all, {}});
			} else if (eat_at("(?:on|in|for|within) (?:the )?domain " + kName, m)) {
				set_scope({ScopeKind::domain, m.str(1)});
			} else if (eat_at("in the " + kName + " domain", m)) {
				set_scope({ScopeKind::domain, m.str(1)});
			} else if (eat_at("(?:on|for|in) (?:the )?dataset " + kName, m)) {
				set_scope({ScopeKind::dataset, original(m, 1)});
			} else if (eat_at("with (?:strong |high )?(trends?|seasonality)\\b", m) ||
			           eat_at("with (?:strong|high) " + kChar, m)) {
				set_filter(characteristic_of(m.str(1)), features::kThresholds.strong, Direction::above);
			} else if (eat_at("(?:with (?:weak|low|no|little) |without )" + kChar, m)) {
				set_filter(characteristic_of(m.str(1)), features::kThresholds.weak, Direction::below);
			} else {
				failed(fmt::format("unexpected text near '{}'", orig_.substr(pos_, 30)));
			}
		}
	}

	void set_metric(std::string metric) {
		if (has_metric_) {
			failed("metric given twice");
		}
		has_metric_ = true;
		ast_.metric = std::move(metric);
	}

	void set_scope(Scope scope) {
		if (has_scope_) {
			failed("scope given twice");
		}
		has_scope_ = true;
		ast_.scope = std::move(scope);
	}

	void set_filter(std::string name, double threshold, Direction direction) {
		if (ast_.filter) {
			failed("characteristic filter given twice");
		}
		ast_.filter = CharacteristicFilter{std::move(name), threshold, direction};
	}

	void check() {
		if (!is_metric(ast_.metric)) {
			failed(fmt::format("unknown metric '{}'", ast_.metric));
		}
		if (ast_.kind == QueryKind::best_on_dataset && ast_.scope.kind != ScopeKind::dataset) {
			failed("best-method questions need 'on dataset <name>'");
		}
		if (ast_.kind == QueryKind::characteristic_stats && (has_metric_ || has_horizon_)) {
			failed("dataset statistics take no metric or horizon");
		}
	}
};

std::string upper(std::string_view s) {
	std::string out(s);
	std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::toupper(c); });
	return out;
}

std::string filter_sql(const CharacteristicFilter &f) {
	return fmt::format("d.{}{}{}", f.name, f.direction == Direction::above ? ">" : "<", f.threshold);
}

std::vector<std::string> dataset_conditions(const QueryAst &ast) {
	std::vector<std::string> c;
	switch (ast.scope.kind) {
	case ScopeKind::all:
		break;
	case ScopeKind::univariate:
		c.push_back("d.n_channels=1");
		break;
	case ScopeKind::multivariate:
		c.push_back("d.n_channels>1");
		break;
	case ScopeKind::domain:
		c.push_back("d.domain=" + sql_quote(ast.scope.name));
		break;
	case ScopeKind::dataset:
		c.push_back("d.name=" + sql_quote(ast.scope.name));
		break;
	}
	if (ast.filter) {
		c.push_back(filter_sql(*ast.filter));
	}
	return c;
}

std::string join(const std::vector<std::string> &parts, std::string_view sep) {
	std::string out;
	for (std::size_t i = 0; i < parts.size(); ++i) {
		if (i) {
			out += sep;
		}
		out += parts[i];
	}
	return out;
}

std::string describe_context(const QueryAst &ast) {
	std::string out;
	if (ast.horizon == HorizonClass::long_term) {
		out += fmt::format(" for long-term forecasting (horizon >= {})", kLongHorizon);
	} else if (ast.horizon == HorizonClass::short_term) {
		out += fmt::format(" for short-term forecasting (horizon <= {})", kShortHorizon);
	}
	switch (ast.scope.kind) {
	case ScopeKind::all:
		out += " on all datasets";
		break;
	case ScopeKind::univariate:
		out += " on univariate datasets";
		break;
	case ScopeKind::multivariate:
		out += " on multivariate datasets";
		break;
	case ScopeKind::domain:
		out += fmt::format(" in domain {}", ast.scope.name);
		break;
	case ScopeKind::dataset:
		out += fmt::format(" on dataset {}", ast.scope.name);
		break;
	}
	if (ast.filter) {
		out += fmt::format(" with {} {} {}", ast.filter->name, ast.filter->direction == Direction::above ? ">" : "<",
		                   ast.filter->threshold);
	}
	return out;
}

std::string describe_query(const QueryAst &ast) {
	const auto m = upper(ast.metric);
	switch (ast.kind) {
	case QueryKind::top_k:
		return fmt::format("the top-{} methods by {}{}", ast.k, m, describe_context(ast));
	case QueryKind::best_on_dataset:
		return fmt::format("the best method by {}{}", m, describe_context(ast));
	case QueryKind::compare_two:
		return fmt::format("{} vs {} by {}{}", ast.methods->first, ast.methods->second, m, describe_context(ast));
	case QueryKind::characteristic_stats:
		return ast.stat == StatKind::average
		           ? fmt::format("the average {} per domain{}", ast.characteristic, describe_context(ast))
		           : fmt::format("the dataset count per domain{}", describe_context(ast));
	case QueryKind::horizon_breakdown:
		return fmt::format("{} of {} by horizon{}", m, ast.methods->first, describe_context(ast));
	}
	return {};
}

std::string label_of(const SqlValue &v) {
	if (const auto *s = std::get_if<std::string>(&v)) {
		return *s;
	}
	if (const auto *i = std::get_if<std::int64_t>(&v)) {
		return std::to_string(*i);
	}
	if (const auto *d = std::get_if<double>(&v)) {
		return format_double(*d);
	}
	return "";
}

double number_of(const SqlValue &v) {
	if (const auto *d = std::get_if<double>(&v)) {
		return *d;
	}
	if (const auto *i = std::get_if<std::int64_t>(&v)) {
		return static_cast<double>(*i);
	}
	return std::numeric_limits<double>::quiet_NaN();
}

bool label_value_rows(const QueryResult &rows) {
	if (rows.columns.size() < 2) {
		return false;
	}
	for (const auto &r : rows.rows) {
		if (!std::holds_alternative<double>(r[1]) && !std::holds_alternative<std::int64_t>(r[1])) {
			return false;
		}
	}
	return true;
}

std::string enumerate(const QueryResult &rows, const char *format) {
	std::vector<std::string> items;
	for (std::size_t i = 0; i < rows.rows.size(); ++i) {
		items.push_back(fmt::format(fmt::runtime(format), i + 1, label_of(rows.rows[i][0]), number_of(rows.rows[i][1])));
	}
	return join(items, ", ");
}

void fill_chart(QaAnswer &a, const std::string &type, const std::string &title, const std::string &y_label) {
	a.chart.chart_type = type;
	a.chart.title = title;
	a.chart.y_label = y_label;
	if (type == "table") {
		return;
	}
	for (const auto &r : a.rows.rows) {
		a.chart.x.push_back(label_of(r[0]));
		a.chart.y.push_back(number_of(r[1]));
	}
}

void render_grammar_answer(QaAnswer &a, const QueryAst &ast) {
	const auto metric = upper(ast.metric);
	const auto ctx = describe_context(ast);
	if (a.rows.rows.empty()) {
		a.text = fmt::format("No benchmark results match {}.", describe_query(ast));
		fill_chart(a, "table", describe_query(ast), "");
		return;
	}
	const auto n = a.rows.rows.size();
	switch (ast.kind) {
	case QueryKind::top_k:
		a.text = fmt::format("The top-{} methods by {}{} are: {}.", n, metric, ctx, enumerate(a.rows, "{}. {} ({:.3f})"));
		fill_chart(a, "bar", fmt::format("Top-{} methods by {}", n, metric), fmt::format("avg {}", metric));
		break;
	case QueryKind::best_on_dataset:
		a.text = fmt::format("The best method by {}{} is {} ({:.3f}).", metric, ctx, label_of(a.rows.rows[0][0]),
		                     number_of(a.rows.rows[0][1]));
		fill_chart(a, "bar", fmt::format("Best method by {}", metric), fmt::format("avg {}", metric));
		break;
	case QueryKind::compare_two:
		a.text = fmt::format("Comparing {} and {} by {}{}: {}.", ast.methods->first, ast.methods->second, metric, ctx,
		                     enumerate(a.rows, "{}. {} ({:.3f})"));
		fill_chart(a, "bar", fmt::format("{} vs {} ({})", ast.methods->first, ast.methods->second, metric),
		           fmt::format("avg {}", metric));
		break;
	case QueryKind::characteristic_stats:
		if (ast.stat == StatKind::average) {
			a.text = fmt::format("Average {} per domain{}: {}.", ast.characteristic, ctx,
			                     enumerate(a.rows, "{}. {} ({:.3f})"));
			fill_chart(a, "bar", fmt::format("Average {} per domain", ast.characteristic),
			           fmt::format("avg {}", ast.characteristic));
		} else {
			a.text = fmt::format("Number of datasets per domain{}: {}.", ctx, enumerate(a.rows, "{}. {} ({:.0f})"));
			fill_chart(a, "pie", "Datasets per domain", "datasets");
		}
		break;
	case QueryKind::horizon_breakdown:
		a.text = fmt::format("{} of {} by horizon{}: {}.", metric, ast.methods->first, ctx,
		                     enumerate(a.rows, "{}. horizon {} ({:.3f})"));
		fill_chart(a, "line", fmt::format("{} of {} by horizon", metric, ast.methods->first), fmt::format("avg {}", metric));
		break;
	}
}

void render_generic_answer(QaAnswer &a) {
	if (a.rows.rows.empty()) {
		a.text = "No benchmark results match the translated query.";
		fill_chart(a, "table", "Query result", "");
		return;
	}
	if (label_value_rows(a.rows)) {
		a.text = fmt::format("The query returned {} rows: {}.", a.rows.rows.size(), enumerate(a.rows, "{}. {} ({:.3f})"));
		fill_chart(a, "bar", "Query result", a.rows.columns[1]);
	} else {
		a.text = fmt::format("The query returned {} rows.", a.rows.rows.size());
		fill_chart(a, "table", "Query result", "");
	}
}

QueryResult run_verified(const ResultStore &store, const SqlVerdict &verdict) {
	try {
		return store.execute_select(VerifiedSql(verdict));
	} catch (const Error &e) {
		if (e.code() == "ExecError") {
			throw QaExecError(e.what(), verdict.sql);
		}
		throw;
	}
}

} // namespace

const std::vector<std::string> &template_questions() {
	static const std::vector<std::string> t = {
	    "What are the top-8 methods (ordered by MAE) for long-term forecasting on all multivariate datasets with trends?",
	    "top-3 methods by smape on domain traffic",
	    "top-5 methods by mase for short-term forecasting on univariate datasets with strong seasonality",
	    "Which is the best method by mae on dataset ETTh1-like?",
	    "Compare naive and ses by mae",
	    "Average seasonality by domain",
	    "How many datasets per domain?",
	    "mae of holt_winters by horizon",
	};
	return t;
}

QueryAst parse_question(std::string_view text) {
	return Parser(normalize(text)).parse();
}

std::string ast_to_sql(const QueryAst &ast) {
	static const std::string score_from =
	    "FROM scores s JOIN runs r ON s.run_id=r.run_id JOIN methods m ON r.method_id=m.method_id "
	    "JOIN datasets d ON r.dataset_id=d.dataset_id";
	if (ast.kind == QueryKind::characteristic_stats) {
		const auto conds = dataset_conditions(ast);
		const auto where = conds.empty() ? std::string() : " WHERE " + join(conds, " AND ");
		const auto value = ast.stat == StatKind::average ? fmt::format("AVG(d.{})", ast.characteristic) : "COUNT(*)";
		return fmt::format("SELECT d.domain, {} AS v FROM datasets d{} GROUP BY d.domain ORDER BY d.domain ASC LIMIT 100",
		                   value, where);
	}
	std::vector<std::string> conds = {"s.metric=" + sql_quote(ast.metric), "r.status='ok'"};
	if (ast.horizon == HorizonClass::long_term) {
		conds.push_back(fmt::format("r.horizon>={}", kLongHorizon));
	} else if (ast.horizon == HorizonClass::short_term) {
		conds.push_back(fmt::format("r.horizon<={}", kShortHorizon));
	}
	for (auto &c : dataset_conditions(ast)) {
		conds.push_back(std::move(c));
	}
	const auto where = join(conds, " AND ");
	switch (ast.kind) {
	case QueryKind::top_k:
		return fmt::format("SELECT m.name, AVG(s.value) AS v {} WHERE {} GROUP BY m.name ORDER BY v ASC LIMIT {}",
		                   score_from, where, ast.k);
	case QueryKind::best_on_dataset:
		return fmt::format("SELECT m.name, AVG(s.value) AS v {} WHERE {} GROUP BY m.name ORDER BY v ASC LIMIT 1",
		                   score_from, where);
	case QueryKind::compare_two:
		return fmt::format(
		    "SELECT m.name, AVG(s.value) AS v {} WHERE {} AND m.method_id IN ({}, {}) GROUP BY m.name ORDER BY v ASC LIMIT 2",
		    score_from, where, sql_quote(ast.methods->first), sql_quote(ast.methods->second));
	case QueryKind::horizon_breakdown:
		return fmt::format("SELECT r.horizon, AVG(s.value) AS v {} WHERE {} AND m.method_id={} GROUP BY r.horizon "
		                   "ORDER BY r.horizon ASC LIMIT 100",
		                   score_from, where, sql_quote(ast.methods->first));
	case QueryKind::characteristic_stats:
		break;
	}
	return {};
}

nlohmann::json to_json(const ChartSpec &chart) {
	nlohmann::json y = nlohmann::json::array();
	for (double v : chart.y) {
		y.push_back(std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr));
	}
	return nlohmann::json{
	    {"chart_type", chart.chart_type}, {"title", chart.title}, {"x", chart.x}, {"y", std::move(y)}, {"y_label", chart.y_label}};
}

nlohmann::json to_json(const QaAnswer &answer) {
	const auto rows = easytime::to_json(answer.rows);
	return nlohmann::json{{"question", answer.question},
	                      {"text", answer.text},
	                      {"sql", answer.sql},
	                      {"columns", rows.at("columns")},
	                      {"rows", rows.at("rows")},
	                      {"chart", to_json(answer.chart)},
	                      {"source", answer.source},
	                      {"help", answer.help},
	                      {"suggestions", answer.suggestions},
	                      {"notices", answer.notices}};
}

nlohmann::json to_json(const QueryAst &ast) {
	static const char *kinds[] = {"top_k", "best_on_dataset", "compare_two", "characteristic_stats",
	                              "horizon_breakdown"};
	static const char *horizons[] = {"any", "short", "long"};
	static const char *scopes[] = {"all", "univariate", "multivariate", "domain", "dataset"};
	nlohmann::json j{{"kind", kinds[static_cast<int>(ast.kind)]},
	                 {"k", ast.k},
	                 {"metric", ast.metric},
	                 {"horizon_class", horizons[static_cast<int>(ast.horizon)]},
	                 {"scope", {{"kind", scopes[static_cast<int>(ast.scope.kind)]}, {"name", ast.scope.name}}}};
	if (ast.filter) {
		j["characteristic_filter"] = {{"name", ast.filter->name},
		                              {"threshold", ast.filter->threshold},
		                              {"direction", ast.filter->direction == Direction::above ? ">" : "<"}};
	}
	if (ast.methods) {
		j["methods"] = {ast.methods->first, ast.methods->second};
	}
	if (ast.kind == QueryKind::characteristic_stats) {
		j["stat"] = ast.stat == StatKind::average ? "average" : "count";
		j["characteristic"] = ast.characteristic;
	}
	return j;
}

void SessionStore::append(const std::string &session_id, Turn turn) {
	std::lock_guard lock(mutex_);
	auto &turns = sessions_[session_id];
	turns.push_back(std::move(turn));
	while (turns.size() > kMaxSessionTurns) {
		turns.pop_front();
	}
}

std::vector<Turn> SessionStore::history(const std::string &session_id) const {
	std::lock_guard lock(mutex_);
	auto it = sessions_.find(session_id);
	if (it == sessions_.end()) {
		return {};
	}
	return {it->second.begin(), it->second.end()};
}

QaAnswer answer(std::string_view question, const std::string &session_id, SessionStore &sessions,
                const ResultStore &store, const TranslatorConfig &translator) {
	QaAnswer result;
	result.question = std::string(question);
	bool answered = false;

	if (translator.enabled()) {
		try {
			const auto sql = llm_translate(question, schema_ddl(), sessions.history(session_id), translator);
			const auto verdict = verify_sql(sql);
			if (!verdict.ok) {
				for (const auto &v : verdict.violations) {
					result.notices.push_back(fmt::format("translator SQL rejected: {}: {}", v.code, v.message));
				}
			} else {
				result.rows = store.execute_select(VerifiedSql(verdict));
				result.sql = verdict.sql;
				result.source = "llm";
				for (const auto &n : verdict.notices) {
					result.notices.push_back(n);
				}
				render_generic_answer(result);
				answered = true;
			}
		} catch (const Error &e) {
			result.notices.push_back(fmt::format("translator fallback: [{}] {}", e.code(), e.what()));
		}
	}

	if (!answered) {
		result.source = "grammar";
		try {
			const auto ast = parse_question(question);
			const auto verdict = verify_sql(ast_to_sql(ast));
			if (!verdict.ok) {
				fail("InternalError", fmt::format("compiled SQL failed verification: {}", verdict.violations.front().message));
			}
			result.sql = verdict.sql;
			result.rows = run_verified(store, verdict);
			render_grammar_answer(result, ast);
		} catch (const ParseFailed &e) {
			result.help = true;
			result.suggestions = e.suggestions();
			result.sql.clear();
			result.rows = {};
			result.chart = ChartSpec{};
			result.text = fmt::format("Sorry, I could not understand the question ({}). Try for example: {}", e.what(),
			                          join(e.suggestions(), " | "));
		}
	}
	sessions.append(session_id, Turn{std::string(question), result});
	return result;
}

} // namespace easytime::qa
