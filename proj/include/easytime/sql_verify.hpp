#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace easytime {

struct SqlSpan {
	std::size_t begin = 0;
	std::size_t end = 0;
};

struct SqlViolation {
	/// multiple_statements, not_select, mutation, unknown_table, unknown_column,
	/// unknown_function, limit_too_large, limit_not_literal, syntax, empty.
	std::string code;
	std::string message;
	SqlSpan span;
};

struct SqlVerdict {
	bool ok = false;
	std::vector<SqlViolation> violations;
	/// Non-fatal findings (e.g. an injected LIMIT).
	std::vector<std::string> notices;
	/// The statement to execute: trailing semicolon removed, LIMIT injected when absent.
	std::string sql;
};

inline constexpr long kMaxSqlLimit = 1000;

/// Whitelist verification of a query against the results schema: exactly
/// one SELECT statement, no mutation/DDL keywords outside string literals
/// (comments included), only whitelisted tables, columns and functions,
/// and a literal LIMIT <= 1000 (injected when missing).
SqlVerdict verify_sql(std::string_view sql);

/// SQL that passed verify_sql. Only constructible from an ok verdict, so
/// execution APIs cannot receive unverified text.
class VerifiedSql {
public:
	/// Throws ContractViolation when `verdict.ok` is false.
	explicit VerifiedSql(const SqlVerdict &verdict);
	const std::string &text() const noexcept { return text_; }

private:
	std::string text_;
};

/// Verifies and wraps; throws SqlRejected carrying the first violation.
VerifiedSql verified_or_throw(std::string_view sql);

/// Renders `text` as a single-quoted SQL string literal.
std::string sql_quote(std::string_view text);

} // namespace easytime
