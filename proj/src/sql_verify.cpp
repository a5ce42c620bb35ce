#include "easytime/sql_verify.hpp"

#include "easytime/error.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fmt/format.h>
#include <map>
#include <set>

namespace easytime {

namespace {

enum class Tok { word, quoted, number, string, punct, param };

struct Token {
	Tok kind;
	std::string text; // words upper-cased in `upper`; quoted identifiers unquoted
	std::string upper;
	SqlSpan span;
};

const std::map<std::string, std::set<std::string>> &schema_columns() {
	static const std::map<std::string, std::set<std::string>> tables = {
	    {"datasets",
	     {"dataset_id", "name", "domain", "n_channels", "length", "frequency", "seasonality", "trend", "transition",
	      "shifting", "stationarity", "correlation"}},
	    {"methods", {"method_id", "name", "family"}},
	    {"runs",
	     {"run_id", "dataset_id", "method_id", "strategy", "horizon", "lookback", "stride", "status", "started_at",
	      "config_digest", "n_windows", "runtime_ms"}},
	    {"scores", {"run_id", "metric", "value"}},
	};
	return tables;
}

const std::set<std::string> kMutationWords = {"INSERT", "UPDATE", "DELETE", "DROP",   "ALTER",  "CREATE",
                                              "ATTACH", "DETACH", "PRAGMA", "VACUUM", "REINDEX", "REPLACE"};

const std::set<std::string> kKeywords = {
    "SELECT", "FROM",    "WHERE", "JOIN",    "INNER",   "LEFT",      "RIGHT",   "FULL",   "OUTER", "CROSS",
    "NATURAL", "ON",     "USING", "AND",     "OR",      "NOT",       "IN",      "IS",     "NULL",  "LIKE",
    "GLOB",   "BETWEEN", "AS",    "GROUP",   "BY",      "ORDER",     "ASC",     "DESC",   "LIMIT", "OFFSET",
    "HAVING", "DISTINCT", "ALL",  "UNION",   "INTERSECT", "EXCEPT",  "CASE",    "WHEN",   "THEN",  "ELSE",
    "END",    "EXISTS",  "COLLATE", "NOCASE", "ESCAPE", "TRUE",      "FALSE",   "CAST",   "REAL",  "INTEGER",
    "TEXT",   "NUMERIC", "NULLS", "FIRST",   "LAST"};

const std::set<std::string> kFunctions = {"AVG",   "MIN",      "MAX",    "COUNT",  "SUM",   "TOTAL", "ROUND",
                                          "ABS",   "LOWER",    "UPPER",  "COALESCE", "IFNULL", "LENGTH", "CAST"};

// Clause keywords that end a FROM list at the same nesting depth.
const std::set<std::string> kClauseEnd = {"WHERE", "GROUP",     "ORDER",  "LIMIT", "HAVING",
                                          "UNION", "INTERSECT", "EXCEPT", "ON",    "USING"};

std::string to_upper(std::string_view s) {
	std::string out(s);
	std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::toupper(c); });
	return out;
}

std::string to_lower(std::string_view s) {
	std::string out(s);
	std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
	return out;
}

bool word_start(char c) {
	return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
}

bool word_char(char c) {
	return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '$';
}

struct Lexer {
	std::string_view src;
	std::vector<Token> tokens;
	std::vector<SqlViolation> violations;

	void scan_comment_words(std::size_t begin, std::size_t end) {
		std::size_t i = begin;
		while (i < end) {
			if (word_start(src[i])) {
				std::size_t j = i;
				while (j < end && word_char(src[j])) {
					++j;
				}
				const auto w = to_upper(src.substr(i, j - i));
				if (kMutationWords.count(w)) {
					violations.push_back({"mutation", fmt::format("keyword {} inside a comment", w), {i, j}});
				}
				i = j;
			} else {
				++i;
			}
		}
	}

	void run() {
		std::size_t i = 0;
		const auto n = src.size();
		while (i < n) {
			const char c = src[i];
			if (std::isspace(static_cast<unsigned char>(c))) {
				++i;
			} else if (c == '-' && i + 1 < n && src[i + 1] == '-') {
				std::size_t j = src.find('\n', i);
				if (j == std::string_view::npos) {
					j = n;
				}
				scan_comment_words(i, j);
				i = j;
			} else if (c == '/' && i + 1 < n && src[i + 1] == '*') {
				const std::size_t close = src.find("*/", i + 2);
				const std::size_t j = close == std::string_view::npos ? n : close + 2;
				scan_comment_words(i, j);
				if (close == std::string_view::npos) {
					violations.push_back({"syntax", "unterminated block comment", {i, n}});
				}
				i = j;
			} else if (c == '\'') {
				std::string value;
				std::size_t j = i + 1;
				bool closed = false;
				while (j < n) {
					if (src[j] == '\'') {
						if (j + 1 < n && src[j + 1] == '\'') {
							value += '\'';
							j += 2;
							continue;
						}
						closed = true;
						++j;
						break;
					}
					value += src[j++];
				}
				if (!closed) {
					violations.push_back({"syntax", "unterminated string literal", {i, n}});
				}
				tokens.push_back({Tok::string, value, {}, {i, j}});
				i = j;
			} else if (c == '"' || c == '`' || c == '[') {
				const char close = c == '[' ? ']' : c;
				std::string value;
				std::size_t j = i + 1;
				bool closed = false;
				while (j < n) {
					if (src[j] == close) {
						if (close != ']' && j + 1 < n && src[j + 1] == close) {
							value += close;
							j += 2;
							continue;
						}
						closed = true;
						++j;
						break;
					}
					value += src[j++];
				}
				if (!closed) {
					violations.push_back({"syntax", "unterminated quoted identifier", {i, n}});
				}
				tokens.push_back({Tok::quoted, value, to_upper(value), {i, j}});
				i = j;
			} else if (word_start(c)) {
				std::size_t j = i;
				while (j < n && word_char(src[j])) {
					++j;
				}
				const auto text = std::string(src.substr(i, j - i));
				tokens.push_back({Tok::word, text, to_upper(text), {i, j}});
				i = j;
			} else if (std::isdigit(static_cast<unsigned char>(c)) ||
			           (c == '.' && i + 1 < n && std::isdigit(static_cast<unsigned char>(src[i + 1])))) {
				std::size_t j = i;
				while (j < n && (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '.' ||
				                 ((src[j] == '+' || src[j] == '-') && (src[j - 1] == 'e' || src[j - 1] == 'E')))) {
					++j;
				}
				tokens.push_back({Tok::number, std::string(src.substr(i, j - i)), {}, {i, j}});
				i = j;
			} else if (c == '?' || c == ':' || c == '@' || c == '$') {
				std::size_t j = i + 1;
				while (j < n && word_char(src[j])) {
					++j;
				}
				tokens.push_back({Tok::param, std::string(src.substr(i, j - i)), {}, {i, j}});
				i = j;
			} else {
				static const std::string_view two[] = {"<=", ">=", "<>", "!=", "==", "||"};
				std::size_t len = 1;
				for (auto op : two) {
					if (src.substr(i, 2) == op) {
						len = 2;
					}
				}
				tokens.push_back({Tok::punct, std::string(src.substr(i, len)), {}, {i, i + len}});
				i += len;
			}
		}
	}
};

bool is_punct(const Token &t, std::string_view p) {
	return t.kind == Tok::punct && t.text == p;
}

bool is_word(const Token &t, std::string_view w) {
	return t.kind == Tok::word && t.upper == w;
}

bool is_keyword(const Token &t) {
	return t.kind == Tok::word && kKeywords.count(t.upper) > 0;
}

bool is_name(const Token &t) {
	return t.kind == Tok::quoted || (t.kind == Tok::word && !is_keyword(t));
}

bool ends_expression(const Token &t) {
	return is_name(t) || t.kind == Tok::number || t.kind == Tok::string || is_punct(t, ")");
}

class Checker {
public:
	Checker(std::vector<Token> tokens, std::vector<SqlViolation> &violations)
	    : t_(std::move(tokens)), v_(violations), role_(t_.size(), Role::none) {}

	void run() {
		collect_sources();
		check_references();
	}

	bool has_top_level_limit() const { return top_level_limit_; }

private:
	enum class Role { none, table, alias, derived_alias, column_alias, qualifier, qualified_column, function };

	std::vector<Token> t_;
	std::vector<SqlViolation> &v_;
	std::vector<Role> role_;
	std::map<std::string, std::string> alias_to_table_; // lower-cased; "" = derived table
	std::set<std::string> tables_;
	std::set<std::string> column_aliases_;
	bool top_level_limit_ = false;

	void add(std::string code, std::string message, SqlSpan span) {
		v_.push_back({std::move(code), std::move(message), span});
	}

	std::size_t define_alias(std::size_t i, Role role, const std::string &table) {
		// Optional "AS name" or bare name right after position i - 1.
		std::size_t j = i;
		if (j < t_.size() && is_word(t_[j], "AS")) {
			++j;
		}
		if (j < t_.size() && is_name(t_[j]) && !(j + 1 < t_.size() && is_punct(t_[j + 1], "("))) {
			role_[j] = role;
			alias_to_table_[to_lower(t_[j].text)] = table;
			return j + 1;
		}
		return i;
	}

	std::size_t table_reference(std::size_t i) {
		if (i >= t_.size()) {
			return i;
		}
		if (is_name(t_[i])) {
			const auto name = to_lower(t_[i].text);
			role_[i] = Role::table;
			if (!schema_columns().count(name)) {
				add("unknown_table", fmt::format("table '{}' is not in the schema", t_[i].text), t_[i].span);
			} else {
				tables_.insert(name);
				alias_to_table_[name] = name;
			}
			return define_alias(i + 1, Role::alias, name);
		}
		return i;
	}

	void collect_sources() {
		struct Frame {
			bool from_active = false;
			bool derived_from = false; // this paren group is a FROM-subquery
		};
		std::vector<Frame> stack(1);
		for (std::size_t i = 0; i < t_.size(); ++i) {
			const auto &tok = t_[i];
			if (is_punct(tok, "(")) {
				const bool derived = i > 0 && (is_word(t_[i - 1], "FROM") || is_word(t_[i - 1], "JOIN") ||
				                               (stack.back().from_active && is_punct(t_[i - 1], ",")));
				stack.push_back({false, derived});
				continue;
			}
			if (is_punct(tok, ")")) {
				if (stack.size() == 1) {
					add("syntax", "unbalanced ')'", tok.span);
					continue;
				}
				const bool derived = stack.back().derived_from;
				stack.pop_back();
				if (derived) {
					const auto next = define_alias(i + 1, Role::derived_alias, "");
					i = next - 1;
				}
				continue;
			}
			if (tok.kind != Tok::word) {
				if (is_punct(tok, ",") && stack.back().from_active) {
					i = table_reference(i + 1) - 1;
				}
				continue;
			}
			if (tok.upper == "LIMIT" && stack.size() == 1) {
				top_level_limit_ = true;
			}
			if (tok.upper == "LIMIT") {
				check_limit(i);
			}
			if (tok.upper == "FROM" || tok.upper == "JOIN") {
				stack.back().from_active = true;
				i = table_reference(i + 1) - 1;
				continue;
			}
			if (kClauseEnd.count(tok.upper)) {
				stack.back().from_active = false;
			}
			if (is_word(tok, "AS") && i + 1 < t_.size() && is_name(t_[i + 1]) && role_[i + 1] == Role::none) {
				role_[i + 1] = Role::column_alias;
				column_aliases_.insert(to_lower(t_[i + 1].text));
				++i;
				continue;
			}
		}
		if (stack.size() != 1) {
			add("syntax", "unbalanced '('", t_.back().span);
		}
		// Bare column aliases: a name directly after a complete expression.
		for (std::size_t i = 1; i < t_.size(); ++i) {
			if (role_[i] == Role::none && is_name(t_[i]) && ends_expression(t_[i - 1]) &&
			    role_[i - 1] != Role::alias &&
			    role_[i - 1] != Role::derived_alias && !(i + 1 < t_.size() && is_punct(t_[i + 1], "(")) &&
			    !(i + 1 < t_.size() && is_punct(t_[i + 1], "."))) {
				role_[i] = Role::column_alias;
				column_aliases_.insert(to_lower(t_[i].text));
			}
		}
	}

	void check_limit(std::size_t i) {
		auto literal = [&](std::size_t j, const char *what) -> bool {
			if (j >= t_.size() || t_[j].kind != Tok::number) {
				add("limit_not_literal", fmt::format("{} must be an integer literal", what),
				    j < t_.size() ? t_[j].span : t_[i].span);
				return false;
			}
			long value = 0;
			const auto &s = t_[j].text;
			const auto res = std::from_chars(s.data(), s.data() + s.size(), value);
			if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
				add("limit_not_literal", fmt::format("{} must be an integer literal, got '{}'", what, s), t_[j].span);
				return false;
			}
			if (std::string_view(what) == "LIMIT" && value > kMaxSqlLimit) {
				add("limit_too_large", fmt::format("LIMIT {} exceeds {}", value, kMaxSqlLimit), t_[j].span);
			}
			return true;
		};
		// LIMIT n | LIMIT n OFFSET m | LIMIT m, n
		if (i + 2 < t_.size() && is_punct(t_[i + 2], ",")) {
			literal(i + 1, "OFFSET");
			literal(i + 3, "LIMIT");
		} else {
			literal(i + 1, "LIMIT");
			if (i + 3 < t_.size() && is_word(t_[i + 2], "OFFSET")) {
				literal(i + 3, "OFFSET");
			}
		}
	}

	bool known_column(const std::string &col) const {
		for (const auto &table : tables_) {
			if (schema_columns().at(table).count(col)) {
				return true;
			}
		}
		return column_aliases_.count(col) > 0;
	}

	bool any_schema_column(const std::string &col) const {
		for (const auto &[table, cols] : schema_columns()) {
			if (cols.count(col)) {
				return true;
			}
		}
		return column_aliases_.count(col) > 0;
	}

	void check_references() {
		for (std::size_t i = 0; i < t_.size(); ++i) {
			const auto &tok = t_[i];
			if (tok.kind == Tok::param) {
				add("syntax", fmt::format("bound parameter '{}' is not allowed", tok.text), tok.span);
				continue;
			}
			if (tok.kind == Tok::word && kMutationWords.count(tok.upper)) {
				add("mutation", fmt::format("keyword {} is not allowed", tok.upper), tok.span);
				continue;
			}
			if (!is_name(tok) || role_[i] != Role::none) {
				continue;
			}
			const bool call = i + 1 < t_.size() && is_punct(t_[i + 1], "(");
			if (call) {
				if (!kFunctions.count(tok.upper)) {
					add("unknown_function", fmt::format("function '{}' is not allowed", tok.text), tok.span);
				}
				continue;
			}
			const auto name = to_lower(tok.text);
			if (i + 2 < t_.size() && is_punct(t_[i + 1], ".")) {
				const auto &col_tok = t_[i + 2];
				role_[i + 2] = Role::qualified_column;
				auto it = alias_to_table_.find(name);
				if (it == alias_to_table_.end()) {
					add("unknown_table", fmt::format("'{}' does not name a table or alias in this query", tok.text),
					    tok.span);
				} else if (!is_punct(col_tok, "*")) {
					const auto col = to_lower(col_tok.text);
					const bool ok = it->second.empty() ? any_schema_column(col)
					                                   : schema_columns().at(it->second).count(col) > 0;
					if (!is_name(col_tok) || !ok) {
						add("unknown_column",
						    fmt::format("column '{}.{}' is not in the schema", tok.text, col_tok.text), col_tok.span);
					}
				}
				i += 2;
				continue;
			}
			if (!known_column(name)) {
				add("unknown_column", fmt::format("column '{}' is not in the schema", tok.text), tok.span);
			}
		}
	}
};

} // namespace

SqlVerdict verify_sql(std::string_view sql) {
	SqlVerdict verdict;
	Lexer lexer{sql, {}, {}};
	lexer.run();
	auto &v = verdict.violations;
	v = std::move(lexer.violations);
	auto tokens = std::move(lexer.tokens);

	if (tokens.empty()) {
		v.push_back({"empty", "no SQL statement", {0, sql.size()}});
		verdict.ok = false;
		return verdict;
	}

	// Statement separation: at most one trailing semicolon.
	std::size_t statement_end = tokens.size();
	for (std::size_t i = 0; i < tokens.size(); ++i) {
		if (is_punct(tokens[i], ";")) {
			statement_end = std::min(statement_end, i);
			if (i + 1 < tokens.size()) {
				v.push_back({"multiple_statements", "only one statement is allowed",
				             {tokens[i].span.begin, tokens.back().span.end}});
				break;
			}
		}
	}
	std::vector<Token> body(tokens.begin(), tokens.begin() + static_cast<std::ptrdiff_t>(statement_end));
	// Mutation keywords after a statement separator count too.
	for (std::size_t i = statement_end; i < tokens.size(); ++i) {
		if (tokens[i].kind == Tok::word && kMutationWords.count(tokens[i].upper)) {
			v.push_back({"mutation", fmt::format("keyword {} is not allowed", tokens[i].upper), tokens[i].span});
		}
	}
	if (body.empty()) {
		v.push_back({"empty", "no SQL statement", {0, sql.size()}});
		verdict.ok = false;
		return verdict;
	}
	if (!is_word(body.front(), "SELECT")) {
		v.push_back({"not_select", fmt::format("statement must start with SELECT, got '{}'", body.front().text),
		             body.front().span});
	}

	Checker checker(body, v);
	checker.run();

	std::string text(sql.substr(0, body.back().span.end));
	if (!checker.has_top_level_limit()) {
		text += fmt::format(" LIMIT {}", kMaxSqlLimit);
		verdict.notices.push_back(fmt::format("LIMIT {} injected", kMaxSqlLimit));
	}
	verdict.sql = std::move(text);
	verdict.ok = v.empty();
	return verdict;
}

VerifiedSql::VerifiedSql(const SqlVerdict &verdict) {
	if (!verdict.ok) {
		fail("ContractViolation", "unverified SQL passed to the executor");
	}
	text_ = verdict.sql;
}

VerifiedSql verified_or_throw(std::string_view sql) {
	const auto verdict = verify_sql(sql);
	if (!verdict.ok) {
		const auto &first = verdict.violations.front();
		fail("SqlRejected", fmt::format("{}: {}", first.code, first.message));
	}
	return VerifiedSql(verdict);
}

std::string sql_quote(std::string_view text) {
	std::string out = "'";
	for (char c : text) {
		if (c == '\'') {
			out += '\'';
		}
		out += c;
	}
	out += '\'';
	return out;
}

} // namespace easytime
