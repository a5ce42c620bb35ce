#include "easytime/core.hpp"
#include "easytime/error.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fmt/format.h>

namespace easytime {

namespace {

std::string_view trim(std::string_view s) {
	while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) {
		s.remove_prefix(1);
	}
	while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
		s.remove_suffix(1);
	}
	return s;
}

std::string_view unquote(std::string_view s) {
	s = trim(s);
	if (s.size() >= 2 && s.front() == '"' && s.back() == '"') {
		s = s.substr(1, s.size() - 2);
	}
	return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
	std::vector<std::string_view> out;
	std::size_t start = 0;
	while (true) {
		const auto pos = line.find(',', start);
		if (pos == std::string_view::npos) {
			out.push_back(unquote(line.substr(start)));
			break;
		}
		out.push_back(unquote(line.substr(start, pos - start)));
		start = pos + 1;
	}
	return out;
}

bool is_missing(std::string_view s) {
	if (s.empty()) {
		return true;
	}
	std::string lower(s);
	std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char ch) { return std::tolower(ch); });
	return lower == "nan" || lower == "na" || lower == "null" || lower == "n/a";
}

template <typename T>
bool parse_number(std::string_view s, T &out) {
	if (!s.empty() && s.front() == '+') {
		s.remove_prefix(1);
	}
	const auto *end = s.data() + s.size();
	auto [ptr, ec] = std::from_chars(s.data(), end, out);
	return ec == std::errc() && ptr == end;
}

bool parse_fixed_int(std::string_view s, std::size_t pos, std::size_t len, int &out) {
	if (pos + len > s.size()) {
		return false;
	}
	for (std::size_t i = pos; i < pos + len; ++i) {
		if (s[i] < '0' || s[i] > '9') {
			return false;
		}
	}
	return parse_number(s.substr(pos, len), out);
}

/// Accepts an integer index, YYYY-MM-DD, or YYYY-MM-DD[T ]HH:MM:SS[Z].
bool parse_timestamp(std::string_view s, std::int64_t &value, TimeFormat &format) {
	if (parse_number(s, value)) {
		format = TimeFormat::index;
		return true;
	}
	int y = 0, mo = 0, d = 0;
	if (s.size() < 10 || s[4] != '-' || s[7] != '-' || !parse_fixed_int(s, 0, 4, y) || !parse_fixed_int(s, 5, 2, mo) ||
	    !parse_fixed_int(s, 8, 2, d)) {
		return false;
	}
	using namespace std::chrono;
	const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
	if (!ymd.ok()) {
		return false;
	}
	const std::int64_t days = sys_days{ymd}.time_since_epoch().count();
	if (s.size() == 10) {
		value = days * 86400;
		format = TimeFormat::date;
		return true;
	}
	std::string_view rest = s.substr(10);
	if (rest.back() == 'Z') {
		rest.remove_suffix(1);
	}
	int hh = 0, mm = 0, ss = 0;
	if (rest.size() != 9 || (rest[0] != 'T' && rest[0] != ' ') || rest[3] != ':' || rest[6] != ':' ||
	    !parse_fixed_int(rest, 1, 2, hh) || !parse_fixed_int(rest, 4, 2, mm) || !parse_fixed_int(rest, 7, 2, ss) ||
	    hh > 23 || mm > 59 || ss > 60) {
		return false;
	}
	value = days * 86400 + hh * 3600 + mm * 60 + ss;
	format = TimeFormat::datetime;
	return true;
}

} // namespace

std::string format_timestamp(std::int64_t value, TimeFormat format) {
	if (format == TimeFormat::index) {
		return std::to_string(value);
	}
	using namespace std::chrono;
	std::int64_t days = value / 86400;
	std::int64_t secs = value % 86400;
	if (secs < 0) {
		secs += 86400;
		days -= 1;
	}
	const year_month_day ymd{sys_days{std::chrono::days{days}}};
	const auto date = fmt::format("{:04d}-{:02d}-{:02d}", static_cast<int>(ymd.year()),
	                              static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
	if (format == TimeFormat::date) {
		return date;
	}
	return fmt::format("{}T{:02d}:{:02d}:{:02d}", date, secs / 3600, (secs / 60) % 60, secs % 60);
}

std::string format_double(double value) {
	std::array<char, 64> buf{};
	auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
	return std::string(buf.data(), ptr);
}

TimeSeries parse_dataset_csv(std::string_view text, const CsvOptions &options) {
	if (text.size() >= 3 && static_cast<unsigned char>(text[0]) == 0xEF && static_cast<unsigned char>(text[1]) == 0xBB &&
	    static_cast<unsigned char>(text[2]) == 0xBF) {
		text.remove_prefix(3);
	}
	std::vector<std::string_view> lines;
	std::size_t start = 0;
	while (start <= text.size()) {
		auto pos = text.find('\n', start);
		if (pos == std::string_view::npos) {
			pos = text.size();
		}
		const auto line = trim(text.substr(start, pos - start));
		if (!line.empty()) {
			lines.push_back(line);
		}
		start = pos + 1;
	}
	if (lines.empty()) {
		fail("MalformedCsv", "missing header row");
	}
	const auto header = split_fields(lines.front());
	if (header.size() < 2) {
		fail("MalformedCsv", "header needs a time column and at least one channel");
	}
	if (header.front() != "t") {
		fail("MalformedCsv", fmt::format("first header column must be 't', got '{}'", header.front()));
	}
	const std::size_t c = header.size() - 1;
	const std::size_t n = lines.size() - 1;
	if (n == 0) {
		fail("EmptySeries", "CSV has a header but no data rows");
	}

	TimeSeries series;
	series.id = options.id;
	for (std::size_t j = 1; j < header.size(); ++j) {
		series.channel_names.emplace_back(header[j]);
	}
	series.timestamps.resize(n);
	series.values = Matrix(n, c);
	std::vector<std::vector<bool>> missing(c, std::vector<bool>(n, false));
	bool any_missing = false;

	for (std::size_t i = 0; i < n; ++i) {
		const auto fields = split_fields(lines[i + 1]);
		if (fields.size() != header.size()) {
			fail("MalformedCsv",
			     fmt::format("row {} has {} fields, header has {}", i + 2, fields.size(), header.size()));
		}
		TimeFormat format = TimeFormat::index;
		if (!parse_timestamp(fields[0], series.timestamps[i], format)) {
			fail("MalformedCsv", fmt::format("row {}: cannot parse timestamp '{}'", i + 2, fields[0]));
		}
		if (i == 0) {
			series.time_format = format;
		} else if (format != series.time_format) {
			fail("MalformedCsv", fmt::format("row {}: mixed timestamp formats", i + 2));
		}
		if (i > 0 && series.timestamps[i] <= series.timestamps[i - 1]) {
			fail("NonMonotonicTimestamps", fmt::format("row {}: timestamp '{}' does not increase", i + 2, fields[0]));
		}
		for (std::size_t j = 0; j < c; ++j) {
			const auto cell = fields[j + 1];
			if (is_missing(cell)) {
				missing[j][i] = true;
				any_missing = true;
				continue;
			}
			double v = 0.0;
			if (!parse_number(cell, v) || !std::isfinite(v)) {
				fail("MalformedCsv", fmt::format("row {}, column '{}': not a finite number: '{}'", i + 2,
				                                 series.channel_names[j], cell));
			}
			series.values(i, j) = v;
		}
	}

	if (any_missing) {
		if (options.impute == ImputePolicy::reject) {
			fail("MissingValues", "CSV contains missing values (imputation disabled)");
		}
		for (std::size_t j = 0; j < c; ++j) {
			const auto &miss = missing[j];
			if (miss.front() || miss.back()) {
				fail("MissingValues",
				     fmt::format("column '{}' has leading or trailing missing values", series.channel_names[j]));
			}
			std::size_t last_known = 0;
			for (std::size_t i = 1; i < n; ++i) {
				if (miss[i]) {
					continue;
				}
				if (i - last_known > 1) {
					const double a = series.values(last_known, j);
					const double b = series.values(i, j);
					const double span = static_cast<double>(i - last_known);
					for (std::size_t k = last_known + 1; k < i; ++k) {
						series.values(k, j) = a + (b - a) * static_cast<double>(k - last_known) / span;
					}
				}
				last_known = i;
			}
		}
	}

	validate_series(series);
	return series;
}

std::string serialize_dataset_csv(const TimeSeries &series) {
	std::string out = "t";
	for (std::size_t j = 0; j < series.channels(); ++j) {
		out += ',';
		out += j < series.channel_names.size() ? series.channel_names[j] : fmt::format("v{}", j);
	}
	out += '\n';
	for (std::size_t i = 0; i < series.length(); ++i) {
		out += format_timestamp(series.timestamps[i], series.time_format);
		for (double v : series.values.row(i)) {
			out += ',';
			out += format_double(v);
		}
		out += '\n';
	}
	return out;
}

} // namespace easytime
