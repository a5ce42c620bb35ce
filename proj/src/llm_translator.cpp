#include "easytime/assets.hpp"
#include "easytime/qa.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fmt/format.h>
#include <httplib.h>
#include <regex>

namespace easytime::qa {

namespace {

void replace_all(std::string &text, std::string_view key, std::string_view value) {
	std::size_t pos = 0;
	while ((pos = text.find(key, pos)) != std::string::npos) {
		text.replace(pos, key.size(), value);
		pos += value.size();
	}
}

std::string strip_fences(std::string_view text) {
	std::string out;
	std::size_t i = 0;
	while (i < text.size()) {
		if (text.substr(i, 3) == "```") {
			// Skip the fence and an optional language tag.
			i += 3;
			while (i < text.size() && std::isalpha(static_cast<unsigned char>(text[i]))) {
				++i;
			}
			out += '\n';
			continue;
		}
		out += text[i++];
	}
	return out;
}

} // namespace

TranslatorConfig TranslatorConfig::from_env() {
	TranslatorConfig config;
	if (const char *url = std::getenv("QA_LLM_URL")) {
		config.url = url;
	}
	if (const char *key = std::getenv("QA_LLM_KEY")) {
		config.key = key;
	}
	return config;
}

std::string render_prompt(std::string_view question, std::string_view schema_text, const std::vector<Turn> &history) {
	std::string turns;
	const std::size_t first = history.size() > 5 ? history.size() - 5 : 0;
	for (std::size_t i = first; i < history.size(); ++i) {
		turns += fmt::format("Q: {}\nSQL: {}\n", history[i].question,
		                     history[i].answer.sql.empty() ? "(none)" : history[i].answer.sql);
	}
	if (turns.empty()) {
		turns = "(none)\n";
	}
	std::string prompt = assets::prompt_template();
	replace_all(prompt, "{schema}", schema_text);
	replace_all(prompt, "{history}", turns);
	replace_all(prompt, "{question}", question);
	return prompt;
}

std::string extract_sql(std::string_view response) {
	const auto text = strip_fences(response);
	static const std::regex start(R"(\b(select|with|insert|update|delete|drop|create|alter|attach|pragma|replace)\b)",
	                              std::regex::icase);
	std::smatch m;
	if (!std::regex_search(text, m, start)) {
		fail("TranslatorBadOutput", "translator response contains no SQL statement");
	}
	const auto begin = static_cast<std::size_t>(m.position(0));
	std::size_t end = text.size();
	bool in_string = false;
	for (std::size_t i = begin; i < text.size(); ++i) {
		if (text[i] == '\'') {
			in_string = !in_string;
		} else if (text[i] == ';' && !in_string) {
			end = i;
			break;
		}
	}
	auto sql = text.substr(begin, end - begin);
	while (!sql.empty() && std::isspace(static_cast<unsigned char>(sql.back()))) {
		sql.pop_back();
	}
	if (sql.empty()) {
		fail("TranslatorBadOutput", "translator returned an empty statement");
	}
	return sql;
}

std::string llm_translate(std::string_view question, std::string_view schema_text, const std::vector<Turn> &history,
                          const TranslatorConfig &config) {
	if (!config.enabled()) {
		fail("TranslatorUnavailable", "no translator endpoint configured");
	}
	static const std::regex url_re(R"(^(https?)://([^/:]+)(?::(\d+))?(/.*)?$)", std::regex::icase);
	std::smatch m;
	if (!std::regex_match(config.url, m, url_re)) {
		fail("TranslatorUnavailable", fmt::format("malformed translator URL '{}'", config.url));
	}
	if (m.str(1) != "http") {
		fail("TranslatorUnavailable", "only plain http translator endpoints are supported");
	}
	const int port = m[3].matched ? std::stoi(m.str(3)) : 80;
	const std::string path = m[4].matched ? m.str(4) : "/";

	httplib::Client client(m.str(2), port);
	const auto seconds = std::chrono::duration_cast<std::chrono::seconds>(config.timeout);
	const auto micros = std::chrono::duration_cast<std::chrono::microseconds>(config.timeout - seconds);
	client.set_connection_timeout(seconds.count(), micros.count());
	client.set_read_timeout(seconds.count(), micros.count());
	client.set_write_timeout(seconds.count(), micros.count());
	httplib::Headers headers;
	if (!config.key.empty()) {
		headers.emplace("Authorization", "Bearer " + config.key);
	}
	const nlohmann::json body{{"prompt", render_prompt(question, schema_text, history)}};
	auto res = client.Post(path, headers, body.dump(), "application/json");
	if (!res) {
		fail("TranslatorUnavailable", fmt::format("translator request failed: {}", httplib::to_string(res.error())));
	}
	if (res->status != 200) {
		fail("TranslatorUnavailable", fmt::format("translator answered HTTP {}", res->status));
	}
	std::string text;
	try {
		text = nlohmann::json::parse(res->body).at("text").get<std::string>();
	} catch (const nlohmann::json::exception &e) {
		fail("TranslatorBadOutput", fmt::format("translator response is not {{\"text\": ...}}: {}", e.what()));
	}
	return extract_sql(text);
}

} // namespace easytime::qa
