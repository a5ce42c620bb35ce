#include "easytime/config.hpp"

#include "easytime/metrics.hpp"

#include <algorithm>
#include <cstdlib>
#include <fmt/format.h>
#include <fnmatch.h>
#include <fstream>
#include <set>
#include <sstream>

namespace easytime {

namespace {

std::string type_name(const nlohmann::json &v) {
	if (v.is_number_integer()) {
		return fmt::format("integer {}", v.dump());
	}
	if (v.is_number()) {
		return fmt::format("number {}", v.dump());
	}
	if (v.is_string()) {
		return fmt::format("string {}", v.dump());
	}
	return v.type_name();
}

std::string shorten(std::string text) {
	if (text.size() > 80) {
		text = text.substr(0, 77) + "...";
	}
	return text;
}

class Validator {
public:
	explicit Validator(std::filesystem::path base) : base_(std::move(base)) {}

	std::vector<ConfigIssue> issues;

	void issue(std::string path, std::string expected, std::string got) {
		issues.push_back({std::move(path), std::move(expected), shorten(std::move(got))});
	}

	void check_keys(const nlohmann::json &obj, const std::string &path, std::initializer_list<std::string_view> known) {
		for (const auto &[key, _] : obj.items()) {
			if (std::find(known.begin(), known.end(), key) == known.end()) {
				issue(join(path, key), "no such key", fmt::format("unknown key '{}'", key));
			}
		}
	}

	static std::string join(const std::string &path, std::string_view key) {
		return path.empty() ? std::string(key) : fmt::format("{}.{}", path, key);
	}

	template <class T>
	std::optional<T> integer(const nlohmann::json &obj, const std::string &path, std::string_view key, long long min) {
		if (!obj.contains(key)) {
			return std::nullopt;
		}
		const auto &v = obj.at(key);
		if (!v.is_number_integer() || v.get<long long>() < min) {
			issue(join(path, key), fmt::format("integer >= {}", min), type_name(v));
			return std::nullopt;
		}
		return static_cast<T>(v.get<long long>());
	}

	std::optional<double> number(const nlohmann::json &obj, const std::string &path, std::string_view key,
	                             bool positive) {
		if (!obj.contains(key)) {
			return std::nullopt;
		}
		const auto &v = obj.at(key);
		if (!v.is_number() || (positive && !(v.get<double>() > 0.0)) || (!positive && v.get<double>() < 0.0)) {
			issue(join(path, key), positive ? "number > 0" : "number >= 0", type_name(v));
			return std::nullopt;
		}
		return v.get<double>();
	}

	std::optional<std::string> string(const nlohmann::json &obj, const std::string &path, std::string_view key) {
		if (!obj.contains(key)) {
			return std::nullopt;
		}
		const auto &v = obj.at(key);
		if (!v.is_string() || v.get<std::string>().empty()) {
			issue(join(path, key), "non-empty string", type_name(v));
			return std::nullopt;
		}
		return v.get<std::string>();
	}

	std::filesystem::path resolve(const std::filesystem::path &p) const {
		return p.is_absolute() || base_.empty() ? p : base_ / p;
	}

	std::vector<std::filesystem::path> expand(const std::string &pattern) const {
		const auto full = resolve(pattern);
		const auto leaf = full.filename().string();
		if (leaf.find_first_of("*?[") == std::string::npos) {
			return {full};
		}
		std::vector<std::filesystem::path> out;
		std::error_code ec;
		const auto dir = full.parent_path().empty() ? std::filesystem::path(".") : full.parent_path();
		for (const auto &entry : std::filesystem::directory_iterator(dir, ec)) {
			if (entry.is_regular_file() && fnmatch(leaf.c_str(), entry.path().filename().c_str(), 0) == 0) {
				out.push_back(entry.path());
			}
		}
		std::sort(out.begin(), out.end());
		return out;
	}

	void domain(const nlohmann::json &obj, const std::string &path, DatasetSource &src) {
		if (auto d = string(obj, path, "domain")) {
			const bool known = *d == "user" || std::find_if(std::begin(kDomainTags), std::end(kDomainTags), [&](const char *t) {
				                                   return *d == t;
			                                   }) != std::end(kDomainTags);
			if (!known) {
				issue(join(path, "domain"), "one of the domain tags or \"user\"", type_name(obj.at("domain")));
			} else {
				src.domain = *d;
			}
		}
	}

	// `path` locates the dataset entry; for object entries the pattern sits at `path`.path.
	void file_source(const std::string &pattern, const std::string &path, std::vector<DatasetSource> &out,
	                 const nlohmann::json *obj) {
		const auto pattern_path = obj ? join(path, "path") : path;
		const auto files = expand(pattern);
		if (files.empty()) {
			issue(pattern_path, "a pattern matching at least one file", fmt::format("no files match '{}'", pattern));
			return;
		}
		for (const auto &f : files) {
			if (!std::filesystem::is_regular_file(f)) {
				issue(pattern_path, "an existing CSV file", fmt::format("missing file '{}'", f.string()));
				continue;
			}
			DatasetSource src;
			src.kind = DatasetSource::Kind::file;
			src.path = f;
			src.name = f.stem().string();
			if (obj) {
				if (auto n = string(*obj, path, "name"); n && files.size() == 1) {
					src.name = *n;
				}
				domain(*obj, path, src);
				if (auto imp = string(*obj, path, "impute")) {
					if (*imp == "linear") {
						src.impute = ImputePolicy::linear;
					} else if (*imp != "reject") {
						issue(join(path, "impute"), "\"reject\" or \"linear\"", type_name(obj->at("impute")));
					}
				}
			}
			out.push_back(std::move(src));
		}
	}

	void datasets(const nlohmann::json &root, RunConfig &config) {
		if (!root.contains("datasets")) {
			issue("datasets", "non-empty list of dataset entries", "missing");
			return;
		}
		const auto &list = root.at("datasets");
		if (!list.is_array() || list.empty()) {
			issue("datasets", "non-empty list of dataset entries", type_name(list));
			return;
		}
		for (std::size_t i = 0; i < list.size(); ++i) {
			const auto path = fmt::format("datasets[{}]", i);
			const auto &item = list[i];
			if (item.is_string()) {
				file_source(item.get<std::string>(), path, config.datasets, nullptr);
			} else if (item.is_object() && item.contains("synthetic")) {
				check_keys(item, path, {"synthetic"});
				synthetic(item.at("synthetic"), join(path, "synthetic"), config);
			} else if (item.is_object() && item.contains("path")) {
				check_keys(item, path, {"path", "name", "domain", "impute"});
				if (auto p = string(item, path, "path")) {
					file_source(*p, path, config.datasets, &item);
				}
			} else {
				issue(path, "path string, {path, ...} or {synthetic: [...]}", type_name(item));
			}
		}
	}

	void synthetic(const nlohmann::json &list, const std::string &path, RunConfig &config) {
		if (!list.is_array() || list.empty()) {
			issue(path, "non-empty list of synthetic specs", type_name(list));
			return;
		}
		for (std::size_t i = 0; i < list.size(); ++i) {
			const auto p = fmt::format("{}[{}]", path, i);
			const auto &item = list[i];
			if (!item.is_object()) {
				issue(p, "object", type_name(item));
				continue;
			}
			DatasetSource src;
			src.kind = DatasetSource::Kind::synthetic;
			src.name = string(item, p, "name").value_or(fmt::format("synthetic-{}", config.datasets.size()));
			domain(item, p, src);
			src.seed = integer<std::uint64_t>(item, p, "seed", 0).value_or(config.seed + config.datasets.size());
			auto spec_json = item;
			spec_json.erase("name");
			spec_json.erase("domain");
			spec_json.erase("seed");
			if (!spec_json.contains("length")) {
				// The generator default of 240 is kept explicit in the canonical echo.
				spec_json["length"] = SyntheticSpec{}.length;
			}
			try {
				src.spec = spec_json.get<SyntheticSpec>();
				validate_synthetic_spec(src.spec);
			} catch (const Error &e) {
				issue(p, "valid synthetic spec", e.what());
				continue;
			} catch (const nlohmann::json::exception &e) {
				issue(p, "valid synthetic spec", e.what());
				continue;
			}
			config.datasets.push_back(std::move(src));
		}
	}

	void methods(const nlohmann::json &root, RunConfig &config) {
		if (!root.contains("methods")) {
			issue("methods", "\"all\" or a non-empty list of methods", "missing");
			return;
		}
		const auto &m = root.at("methods");
		if (m.is_string() && m.get<std::string>() == "all") {
			for (const auto &id : builtin_method_ids()) {
				config.methods.push_back(MethodSpec{id, {}, 0});
			}
			return;
		}
		if (!m.is_array() || m.empty()) {
			issue("methods", "\"all\" or a non-empty list of methods", type_name(m));
			return;
		}
		std::set<std::string> seen;
		for (std::size_t i = 0; i < m.size(); ++i) {
			const auto path = fmt::format("methods[{}]", i);
			try {
				auto spec = m[i].get<MethodSpec>();
				validate_method_spec(spec);
				if (!seen.insert(spec.method_id).second) {
					issue(path, "each method id at most once", fmt::format("duplicate '{}'", spec.method_id));
					continue;
				}
				config.methods.push_back(std::move(spec));
			} catch (const Error &e) {
				issue(path, "valid method spec", e.what());
			} catch (const nlohmann::json::exception &e) {
				issue(path, "valid method spec", e.what());
			}
		}
	}

	void eval(const nlohmann::json &root, RunConfig &config) {
		if (!root.contains("eval")) {
			return;
		}
		const auto &e = root.at("eval");
		if (!e.is_object()) {
			issue("eval", "object", type_name(e));
			return;
		}
		bool field_ok = true;
		for (const auto &[key, value] : e.items()) {
			static const std::set<std::string> known = {"strategy", "horizon", "lookback", "stride",
			                                            "include_partial_final_window", "split", "normalization",
			                                            "metrics", "mase_period", "seed"};
			if (!known.count(key)) {
				issue(join("eval", key), "no such key", fmt::format("unknown key '{}'", key));
				field_ok = false;
				continue;
			}
			// Each key on its own first, so that every bad key is reported.
			try {
				if (key == "metrics") {
					for (const auto &name : value) {
						if (!name.is_string() || !is_metric(name.get<std::string>())) {
							throw Error("InvalidConfig", fmt::format("unknown metric {}", name.dump()));
						}
					}
				}
				nlohmann::json single = nlohmann::json::object();
				single[key] = value;
				(void)single.get<EvalConfig>();
			} catch (const Error &err) {
				issue(join("eval", key), expected_for(key), err.what());
				field_ok = false;
			} catch (const nlohmann::json::exception &err) {
				issue(join("eval", key), expected_for(key), err.what());
				field_ok = false;
			}
		}
		if (!field_ok) {
			return;
		}
		try {
			config.eval = e.get<EvalConfig>();
			if (!e.contains("seed")) {
				config.eval.seed = config.seed;
			}
		} catch (const Error &err) {
			issue("eval", "consistent evaluation settings", err.what());
		}
	}

	static std::string expected_for(const std::string &key) {
		if (key == "strategy") {
			return "\"fixed\" or \"rolling\"";
		}
		if (key == "horizon" || key == "lookback" || key == "mase_period") {
			return "integer >= 1";
		}
		if (key == "stride") {
			return "integer >= 0";
		}
		if (key == "normalization") {
			return "\"zscore\" or \"none\"";
		}
		if (key == "metrics") {
			return "non-empty list of mae, mse, rmse, mape, smape, mase";
		}
		if (key == "split") {
			return "{train, val, test} ratios > 0 summing to 1";
		}
		if (key == "include_partial_final_window") {
			return "boolean";
		}
		return "unsigned integer";
	}

	void output(const nlohmann::json &root, RunConfig &config) {
		if (!root.contains("output")) {
			config.output.results_db = resolve(config.output.results_db);
			config.output.report = resolve(config.output.report);
			return;
		}
		const auto &o = root.at("output");
		if (!o.is_object()) {
			issue("output", "object", type_name(o));
			return;
		}
		check_keys(o, "output", {"results_db", "report"});
		config.output.results_db = resolve(string(o, "output", "results_db").value_or("results.db"));
		config.output.report = resolve(string(o, "output", "report").value_or("report.md"));
	}

	void pretrain(const nlohmann::json &root, RunConfig &config) {
		if (!root.contains("pretrain")) {
			return;
		}
		const auto &p = root.at("pretrain");
		if (!p.is_object()) {
			issue("pretrain", "object", type_name(p));
			return;
		}
		check_keys(p, "pretrain", {"corpus_size", "corpus_seed", "length", "temperature", "l2", "lr", "epochs"});
		auto &c = config.pretrain;
		c.corpus_size = integer<std::size_t>(p, "pretrain", "corpus_size", 1).value_or(c.corpus_size);
		c.corpus_seed = integer<std::uint64_t>(p, "pretrain", "corpus_seed", 0).value_or(c.corpus_seed);
		c.length = integer<std::size_t>(p, "pretrain", "length", 32).value_or(c.length);
		c.hyper.temperature = number(p, "pretrain", "temperature", true).value_or(c.hyper.temperature);
		c.hyper.l2 = number(p, "pretrain", "l2", false).value_or(c.hyper.l2);
		c.hyper.lr = number(p, "pretrain", "lr", true).value_or(c.hyper.lr);
		c.hyper.epochs = integer<int>(p, "pretrain", "epochs", 0).value_or(c.hyper.epochs);
	}

	void automl(const nlohmann::json &root, RunConfig &config) {
		if (!root.contains("automl")) {
			return;
		}
		const auto &a = root.at("automl");
		if (!a.is_object()) {
			issue("automl", "object", type_name(a));
			return;
		}
		check_keys(a, "automl", {"k"});
		config.automl_k = integer<std::size_t>(a, "automl", "k", 1).value_or(config.automl_k);
	}

	void service(const nlohmann::json &root, RunConfig &config) {
		if (!root.contains("service")) {
			return;
		}
		const auto &s = root.at("service");
		if (!s.is_object()) {
			issue("service", "object", type_name(s));
			return;
		}
		check_keys(s, "service", {"listen", "model", "workers", "queue_limit"});
		auto &c = config.service;
		if (auto listen = string(s, "service", "listen")) {
			const auto colon = listen->rfind(':');
			int port = -1;
			if (colon != std::string::npos) {
				try {
					port = std::stoi(listen->substr(colon + 1));
				} catch (const std::exception &) {
					port = -1;
				}
			}
			if (colon == std::string::npos || colon == 0 || port < 0 || port > 65535) {
				issue("service.listen", "host:port", *listen);
			} else {
				c.host = listen->substr(0, colon);
				c.port = port;
			}
		}
		if (auto model = string(s, "service", "model")) {
			c.model = resolve(*model);
		}
		c.workers = integer<std::size_t>(s, "service", "workers", 1).value_or(c.workers);
		c.queue_limit = integer<std::size_t>(s, "service", "queue_limit", 1).value_or(c.queue_limit);
	}

private:
	std::filesystem::path base_;
};

std::string issues_message(const std::vector<ConfigIssue> &issues) {
	std::string out = fmt::format("{} configuration error(s)", issues.size());
	for (const auto &i : issues) {
		out += fmt::format("\n  {}: expected {}, got {}", i.path, i.expected, i.got);
	}
	return out;
}

} // namespace

ConfigInvalid::ConfigInvalid(std::vector<ConfigIssue> issues)
    : Error("ConfigInvalid", issues_message(issues)), issues_(std::move(issues)) {}

nlohmann::json to_json(const ConfigIssue &issue) {
	return nlohmann::json{{"path", issue.path}, {"expected", issue.expected}, {"got", issue.got}};
}

RunConfig validate_config(std::string_view text, const std::filesystem::path &base_dir) {
	nlohmann::json root;
	try {
		root = nlohmann::json::parse(text);
	} catch (const nlohmann::json::exception &e) {
		throw ConfigInvalid({{"", "a JSON document", e.what()}});
	}
	if (!root.is_object()) {
		throw ConfigInvalid({{"", "a JSON object", type_name(root)}});
	}
	Validator v(base_dir);
	RunConfig config;
	v.check_keys(root, "", {"datasets", "methods", "eval", "output", "seed", "workers", "automl", "pretrain", "service"});
	config.seed = v.integer<std::uint64_t>(root, "", "seed", 0).value_or(0);
	config.workers = v.integer<std::size_t>(root, "", "workers", 0).value_or(0);
	config.eval.seed = config.seed;
	v.datasets(root, config);
	v.methods(root, config);
	v.eval(root, config);
	v.output(root, config);
	v.pretrain(root, config);
	v.automl(root, config);
	v.service(root, config);
	if (!v.issues.empty()) {
		throw ConfigInvalid(std::move(v.issues));
	}
	const bool explicit_k = root.contains("automl") && root.at("automl").contains("k");
	if (!explicit_k) {
		config.automl_k = std::min(config.automl_k, config.methods.size());
	} else if (config.automl_k > config.methods.size()) {
		throw ConfigInvalid({{"automl.k", fmt::format("integer <= number of methods ({})", config.methods.size()),
		                      std::to_string(config.automl_k)}});
	}
	return config;
}

RunConfig load_config(const std::filesystem::path &path) {
	std::ifstream in(path);
	if (!in) {
		fail("IoError", fmt::format("cannot read config '{}'", path.string()));
	}
	std::stringstream buf;
	buf << in.rdbuf();
	return validate_config(buf.str(), path.parent_path());
}

nlohmann::json canonical_json(const RunConfig &config) {
	nlohmann::json datasets = nlohmann::json::array();
	for (const auto &d : config.datasets) {
		if (d.kind == DatasetSource::Kind::file) {
			datasets.push_back({{"path", d.path.string()},
			                    {"name", d.name},
			                    {"domain", d.domain},
			                    {"impute", d.impute == ImputePolicy::linear ? "linear" : "reject"}});
		} else {
			nlohmann::json spec = d.spec;
			spec["name"] = d.name;
			spec["domain"] = d.domain;
			spec["seed"] = d.seed;
			datasets.push_back({{"synthetic", nlohmann::json::array({spec})}});
		}
	}
	nlohmann::json methods = nlohmann::json::array();
	for (const auto &m : config.methods) {
		methods.push_back(m);
	}
	const auto &p = config.pretrain;
	nlohmann::json out{
	    {"datasets", std::move(datasets)},
	    {"methods", std::move(methods)},
	    {"eval", config.eval},
	    {"output", {{"results_db", config.output.results_db.string()}, {"report", config.output.report.string()}}},
	    {"seed", config.seed},
	    {"workers", config.workers},
	    {"automl", {{"k", config.automl_k}}},
	    {"pretrain",
	     {{"corpus_size", p.corpus_size},
	      {"corpus_seed", p.corpus_seed},
	      {"length", p.length},
	      {"temperature", p.hyper.temperature},
	      {"l2", p.hyper.l2},
	      {"lr", p.hyper.lr},
	      {"epochs", p.hyper.epochs}}},
	};
	nlohmann::json service{{"listen", fmt::format("{}:{}", config.service.host, config.service.port)},
	                       {"workers", config.service.workers},
	                       {"queue_limit", config.service.queue_limit}};
	if (!config.service.model.empty()) {
		service["model"] = config.service.model.string();
	}
	out["service"] = std::move(service);
	return out;
}

std::vector<Dataset> load_datasets(const RunConfig &config) {
	std::vector<Dataset> out;
	std::set<std::string> ids;
	for (const auto &src : config.datasets) {
		Dataset d;
		d.name = src.name;
		d.domain = src.domain;
		if (src.kind == DatasetSource::Kind::synthetic) {
			d.series = generate_synthetic(src.spec, src.seed, src.name);
		} else {
			std::ifstream in(src.path, std::ios::binary);
			if (!in) {
				fail("IoError", fmt::format("cannot read dataset '{}'", src.path.string()));
			}
			std::stringstream buf;
			buf << in.rdbuf();
			try {
				d.series = parse_dataset_csv(buf.str(), CsvOptions{src.impute, src.name});
			} catch (const Error &e) {
				fail(e.code(), fmt::format("{}: {}", src.path.string(), e.what()));
			}
		}
		if (!ids.insert(d.series.id).second) {
			fail("DuplicateDataset", fmt::format("dataset id '{}' appears twice", d.series.id));
		}
		out.push_back(std::move(d));
	}
	return out;
}

std::size_t workers_from_env(std::size_t fallback) {
	if (const char *env = std::getenv("EASYTIME_WORKERS")) {
		char *end = nullptr;
		const long v = std::strtol(env, &end, 10);
		if (end != env && *end == '\0' && v > 0) {
			return static_cast<std::size_t>(v);
		}
	}
	return fallback;
}

std::vector<TimeSeries> pretrain_corpus(const PretrainConfig &config) {
	std::vector<TimeSeries> out;
	for (auto &r : regime_corpus(config.corpus_size, config.corpus_seed, static_cast<int>(config.length), "meta")) {
		out.push_back(std::move(r.series));
	}
	return out;
}

Report build_report(const RunConfig &config, const PipelineResult &result) {
	const auto &metrics = config.eval.metrics;
	std::vector<std::string> method_order;
	for (const auto &m : config.methods) {
		method_order.push_back(m.method_id);
	}
	std::map<std::string, std::map<std::string, std::pair<double, std::size_t>>> sums;
	for (const auto &r : result.records) {
		for (const auto &[metric, value] : r.metric_values) {
			auto &cell = sums[r.method_id][metric];
			cell.first += value;
			cell.second += 1;
		}
	}

	std::string md;
	md += "# Benchmark report\n\n";
	md += fmt::format("- config digest: {}\n", config_digest(config.eval));
	md += fmt::format("- strategy: {}, horizon: {}, lookback: {}, stride: {}\n", strategy_name(config.eval.strategy),
	                  config.eval.horizon, config.eval.lookback, config.eval.effective_stride());
	md += fmt::format("- datasets: {}, methods: {}\n", config.datasets.size(), config.methods.size());
	md += fmt::format("- runs: {} ok, {} failed\n\n", result.records.size(), result.failures.size());

	md += "## Mean metrics by method\n\n| method |";
	for (const auto &m : metrics) {
		md += fmt::format(" {} |", m);
	}
	md += " runs |\n|---|";
	for (std::size_t i = 0; i < metrics.size(); ++i) {
		md += "---:|";
	}
	md += "---:|\n";
	for (const auto &id : method_order) {
		md += fmt::format("| {} |", id);
		std::size_t runs = 0;
		for (const auto &m : metrics) {
			auto it = sums.find(id);
			if (it != sums.end() && it->second.count(m)) {
				const auto &[sum, count] = it->second.at(m);
				md += fmt::format(" {:.6f} |", sum / static_cast<double>(count));
				runs = std::max(runs, count);
			} else {
				md += " - |";
			}
		}
		md += fmt::format(" {} |\n", runs);
	}

	if (!result.failures.empty()) {
		md += "\n## Failed runs\n\n| dataset | method | code | message |\n|---|---|---|---|\n";
		auto failures = result.failures;
		std::sort(failures.begin(), failures.end(), [](const FailedRun &a, const FailedRun &b) {
			return std::tie(a.dataset_id, a.method_key) < std::tie(b.dataset_id, b.method_key);
		});
		for (const auto &f : failures) {
			auto message = f.message;
			std::replace(message.begin(), message.end(), '|', '/');
			std::replace(message.begin(), message.end(), '\n', ' ');
			md += fmt::format("| {} | {} | {} | {} |\n", f.dataset_id, f.method_key, f.code, message);
		}
	}

	std::string csv = "dataset_id,method_id";
	for (const auto &m : metrics) {
		csv += "," + m;
	}
	csv += ",n_windows\n";
	auto records = result.records;
	std::sort(records.begin(), records.end(), [](const EvalRecord &a, const EvalRecord &b) {
		return std::tie(a.dataset_id, a.method_id) < std::tie(b.dataset_id, b.method_id);
	});
	for (const auto &r : records) {
		csv += r.dataset_id + "," + r.method_id;
		for (const auto &m : metrics) {
			auto it = r.metric_values.find(m);
			csv += "," + (it == r.metric_values.end() ? std::string() : format_double(it->second));
		}
		csv += fmt::format(",{}\n", r.n_windows);
	}
	return Report{std::move(md), std::move(csv)};
}

} // namespace easytime
