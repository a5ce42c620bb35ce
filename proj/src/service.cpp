#include "easytime/service.hpp"

#include "easytime/automl.hpp"
#include "easytime/digest.hpp"

#include <algorithm>
#include <charconv>
#include <fmt/format.h>
#include <fstream>
#include <httplib.h>
#include <set>
#include <shared_mutex>
#include <sstream>
#include <thread>

namespace easytime {

namespace {

using httplib::Request;
using httplib::Response;

const std::map<std::string, int> &status_table() {
	static const std::map<std::string, int> table{
	    {"UnknownJob", 404},         {"UnknownDataset", 404},   {"NotFound", 404},
	    {"ModelUnavailable", 409},   {"RepresentationMismatch", 409},
	    {"PayloadTooLarge", 413},    {"QueueFull", 503},        {"StoreUnavailable", 503},
	    {"InternalError", 500},      {"ExecError", 500},        {"QueryTimeout", 500},
	    {"SinkUnavailable", 500},    {"IoError", 500},          {"ContractViolation", 500},
	};
	return table;
}

void send_json(Response &res, int status, const nlohmann::json &body) {
	res.status = status;
	res.set_content(body.dump(), "application/json");
}

void send_error(Response &res, const std::string &code, const std::string &message,
                const nlohmann::json &details = nullptr) {
	send_json(res, http_status_for(code), api_error(code, message, details));
}

nlohmann::json parse_object(const Request &req) {
	nlohmann::json body;
	try {
		body = nlohmann::json::parse(req.body.empty() ? std::string("{}") : req.body);
	} catch (const nlohmann::json::parse_error &e) {
		fail("InvalidRequest", fmt::format("request body is not valid JSON: {}", e.what()));
	}
	if (!body.is_object()) {
		fail("InvalidRequest", "request body must be a JSON object");
	}
	return body;
}

std::string require_string(const nlohmann::json &body, const char *key) {
	const auto it = body.find(key);
	if (it == body.end() || !it->is_string() || it->get<std::string>().empty()) {
		fail("InvalidRequest", fmt::format("'{}' must be a non-empty string", key));
	}
	return it->get<std::string>();
}

std::size_t optional_count(const nlohmann::json &body, const char *key, std::size_t fallback) {
	const auto it = body.find(key);
	if (it == body.end() || it->is_null()) {
		return fallback;
	}
	if (!it->is_number_integer() || it->get<std::int64_t>() < 1) {
		fail("InvalidRequest", fmt::format("'{}' must be a positive integer", key));
	}
	return it->get<std::size_t>();
}

std::optional<std::int64_t> query_int(const Request &req, const char *key) {
	if (!req.has_param(key)) {
		return std::nullopt;
	}
	const auto text = req.get_param_value(key);
	std::int64_t value = 0;
	const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
	if (ec != std::errc() || ptr != text.data() + text.size()) {
		fail("InvalidRequest", fmt::format("query parameter '{}' must be an integer, got '{}'", key, text));
	}
	return value;
}

bool known_domain(const std::string &domain) {
	if (domain == "user") {
		return true;
	}
	return std::find(std::begin(kDomainTags), std::end(kDomainTags), domain) != std::end(kDomainTags);
}

nlohmann::json windows_json(const std::vector<WindowForecast> &windows) {
	auto out = nlohmann::json::array();
	for (const auto &w : windows) {
		auto rows = nlohmann::json::array();
		for (std::size_t r = 0; r < w.forecast.rows(); ++r) {
			auto row = nlohmann::json::array();
			for (std::size_t c = 0; c < w.forecast.cols(); ++c) {
				row.push_back(w.forecast(r, c));
			}
			rows.push_back(std::move(row));
		}
		out.push_back({{"origin", w.origin}, {"forecast", std::move(rows)}});
	}
	return out;
}

void write_text(const std::filesystem::path &path, const std::string &text) {
	std::filesystem::create_directories(path.parent_path());
	std::ofstream out(path, std::ios::binary);
	if (!out) {
		fail("IoError", fmt::format("cannot write '{}'", path.string()));
	}
	out << text;
}

std::string read_text(const std::filesystem::path &path) {
	std::ifstream in(path, std::ios::binary);
	if (!in) {
		fail("IoError", fmt::format("cannot read '{}'", path.string()));
	}
	std::stringstream buf;
	buf << in.rdbuf();
	return buf.str();
}

} // namespace

int http_status_for(const std::string &code) {
	const auto &table = status_table();
	const auto it = table.find(code);
	return it == table.end() ? 400 : it->second;
}

nlohmann::json api_error(const std::string &code, const std::string &message, const nlohmann::json &details) {
	return nlohmann::json{{"error", {{"code", code}, {"message", message}, {"details", details}}}};
}

ServiceOptions service_options(const RunConfig &config, const std::filesystem::path &config_dir) {
	ServiceOptions options;
	options.host = config.service.host;
	options.port = config.service.port;
	options.results_db = config.output.results_db;
	options.model = config.service.model;
	options.workers = workers_from_env(config.service.workers);
	options.queue_limit = config.service.queue_limit;
	options.datasets = load_datasets(config);
	options.default_eval = config.eval;
	options.translator = qa::TranslatorConfig::from_env();
	options.config_dir = config_dir;
	return options;
}

struct Service::Impl {
	struct Entry {
		Dataset dataset;
		DatasetMeta meta;
	};

	ServiceOptions options;
	ResultStore store;
	qa::SessionStore sessions;
	std::optional<automl::ClassifierModel> model;
	std::string model_problem;
	// Declared after everything a running job touches, so it drains first.
	JobRegistry jobs;

	mutable std::shared_mutex datasets_mutex;
	std::map<std::string, std::shared_ptr<const Entry>> datasets;

	httplib::Server server;
	std::thread listener;
	int bound_port = 0;

	explicit Impl(ServiceOptions opts)
	    : options(std::move(opts)), store(ResultStore::open(options.results_db)),
	      jobs(options.workers, options.queue_limit) {
		if (options.data_dir.empty()) {
			options.data_dir = options.results_db.parent_path() / "uploads";
		}
		for (const auto &m : builtin_method_ids()) {
			store.upsert_method(method_row(MethodSpec{m, {}, 0}));
		}
		for (auto &d : options.datasets) {
			add_dataset(std::move(d));
		}
		options.datasets.clear();
		load_uploads();
		load_model();
		routes();
	}

	std::shared_ptr<const Entry> add_dataset(Dataset dataset) {
		auto entry = std::make_shared<Entry>();
		entry->meta = dataset_meta(dataset);
		entry->dataset = std::move(dataset);
		store.upsert_dataset(entry->meta);
		std::unique_lock lock(datasets_mutex);
		datasets[entry->meta.dataset_id] = entry;
		return entry;
	}

	std::shared_ptr<const Entry> find_dataset(const std::string &id) const {
		std::shared_lock lock(datasets_mutex);
		const auto it = datasets.find(id);
		if (it == datasets.end()) {
			fail("UnknownDataset", fmt::format("no dataset '{}'", id));
		}
		return it->second;
	}

	void load_uploads() {
		std::error_code ec;
		if (!std::filesystem::is_directory(options.data_dir, ec)) {
			return;
		}
		std::vector<std::filesystem::path> files;
		for (const auto &e : std::filesystem::directory_iterator(options.data_dir)) {
			if (e.is_regular_file() && e.path().extension() == ".csv" && e.path().stem().string().starts_with("user-")) {
				files.push_back(e.path());
			}
		}
		std::sort(files.begin(), files.end());
		for (const auto &f : files) {
			const auto id = f.stem().string();
			try {
				Dataset d;
				d.series = parse_dataset_csv(read_text(f), CsvOptions{ImputePolicy::reject, id});
				if (const auto meta = store.dataset(id)) {
					d.name = meta->name;
					d.domain = meta->domain;
				}
				add_dataset(std::move(d));
			} catch (const Error &) {
				// A damaged upload is skipped rather than blocking startup.
			}
		}
	}

	void load_model() {
		if (options.model.empty()) {
			model_problem = "no recommendation model configured";
			return;
		}
		try {
			model = automl::load_classifier(options.model);
		} catch (const Error &e) {
			model_problem = fmt::format("model '{}' unusable: [{}] {}", options.model.string(), e.code(), e.what());
		}
	}

	const automl::ClassifierModel &require_model() const {
		if (!model) {
			fail("ModelUnavailable", model_problem);
		}
		return *model;
	}

	EvalConfig eval_config(const nlohmann::json &body) const {
		nlohmann::json merged = options.default_eval;
		if (const auto it = body.find("config"); it != body.end() && !it->is_null()) {
			if (!it->is_object()) {
				fail("InvalidRequest", "'config' must be an object");
			}
			merged.update(*it);
		}
		try {
			return merged.get<EvalConfig>();
		} catch (const nlohmann::json::exception &e) {
			fail("InvalidConfig", e.what());
		}
	}

	template <class Fn>
	httplib::Server::Handler guarded(Fn fn) {
		return [fn](const Request &req, Response &res) {
			try {
				fn(req, res);
			} catch (const ConfigInvalid &e) {
				auto issues = nlohmann::json::array();
				for (const auto &i : e.issues()) {
					issues.push_back(to_json(i));
				}
				send_error(res, e.code(), e.what(), {{"issues", issues}});
			} catch (const qa::QaExecError &e) {
				send_error(res, e.code(), e.what(), {{"sql", e.sql()}});
			} catch (const Error &e) {
				send_error(res, e.code(), e.what());
			} catch (const nlohmann::json::exception &e) {
				send_error(res, "InvalidRequest", e.what());
			} catch (const std::exception &e) {
				send_error(res, "InternalError", e.what());
			}
		};
	}

	void routes() {
		server.set_payload_max_length(kMaxUploadBytes + 1024 * 1024);
		server.set_error_handler([](const Request &, Response &res) {
			if (!res.body.empty()) {
				return httplib::Server::HandlerResponse::Unhandled;
			}
			switch (res.status) {
			case 404:
				res.set_content(api_error("NotFound", "no such route").dump(), "application/json");
				break;
			case 413:
				res.set_content(api_error("PayloadTooLarge", "request exceeds the upload limit").dump(),
				                "application/json");
				break;
			default:
				res.set_content(api_error(res.status >= 500 ? "InternalError" : "InvalidRequest",
				                          fmt::format("HTTP {}", res.status))
				                    .dump(),
				                "application/json");
			}
			return httplib::Server::HandlerResponse::Handled;
		});

		server.Get("/api/health", guarded([](const Request &, Response &res) {
			           send_json(res, 200, {{"status", "ok"}});
		           }));
		server.Post("/api/datasets", guarded([this](const Request &req, Response &res) { upload(req, res); }));
		server.Get("/api/datasets", guarded([this](const Request &, Response &res) {
			           auto list = nlohmann::json::array();
			           std::shared_lock lock(datasets_mutex);
			           for (const auto &[id, entry] : datasets) {
				           list.push_back(to_json(entry->meta));
			           }
			           send_json(res, 200, {{"datasets", list}});
		           }));
		server.Get("/api/datasets/:id", guarded([this](const Request &req, Response &res) {
			           const auto entry = find_dataset(req.path_params.at("id"));
			           send_json(res, 200, {{"dataset_id", entry->meta.dataset_id}, {"meta", to_json(entry->meta)}});
		           }));
		server.Get("/api/datasets/:id/series",
		           guarded([this](const Request &req, Response &res) { series(req, res); }));
		server.Post("/api/recommend", guarded([this](const Request &req, Response &res) { recommend(req, res); }));
		server.Post("/api/evaluate", guarded([this](const Request &req, Response &res) { evaluate(req, res); }));
		server.Post("/api/automl", guarded([this](const Request &req, Response &res) { automl_job(req, res); }));
		server.Get("/api/jobs/:id", guarded([this](const Request &req, Response &res) {
			           send_json(res, 200, to_json(jobs.status(req.path_params.at("id"))));
		           }));
		server.Get("/api/methods", guarded([](const Request &, Response &res) {
			           auto list = nlohmann::json::array();
			           for (const auto &info : builtin_methods()) {
				           list.push_back({{"method_id", info.id},
				                           {"name", info.display_name},
				                           {"family", family_name(info.family)},
				                           {"defaults", info.defaults},
				                           {"description", info.description}});
			           }
			           send_json(res, 200, {{"methods", list}});
		           }));
		server.Post("/api/qa", guarded([this](const Request &req, Response &res) {
			            const auto body = parse_object(req);
			            const auto question = require_string(body, "question");
			            const auto session = body.value("session_id", std::string("default"));
			            const auto reply = qa::answer(question, session, sessions, store, options.translator);
			            send_json(res, 200, qa::to_json(reply));
		            }));
		server.Get("/api/results", guarded([this](const Request &req, Response &res) { results(req, res); }));
		server.Post("/api/config/validate", guarded([this](const Request &req, Response &res) {
			            const auto config = validate_config(req.body, options.config_dir);
			            send_json(res, 200, {{"valid", true}, {"config", canonical_json(config)}});
		            }));
	}

	void upload(const Request &req, Response &res) {
		std::string content;
		std::string name;
		std::string domain = "user";
		std::string impute = "reject";
		auto field = [&](const char *key, std::string &target) {
			if (req.has_file(key)) {
				target = req.get_file_value(key).content;
			} else if (req.has_param(key)) {
				target = req.get_param_value(key);
			}
		};
		if (req.is_multipart_form_data()) {
			if (!req.has_file("file")) {
				fail("InvalidRequest", "multipart upload needs a 'file' part");
			}
			const auto file = req.get_file_value("file");
			content = file.content;
			if (!file.filename.empty()) {
				name = std::filesystem::path(file.filename).stem().string();
			}
		} else {
			content = req.body;
		}
		field("name", name);
		field("domain", domain);
		field("impute", impute);
		if (content.size() > kMaxUploadBytes) {
			fail("PayloadTooLarge", fmt::format("upload of {} bytes exceeds the {} byte limit", content.size(),
			                                    kMaxUploadBytes));
		}
		if (content.empty()) {
			fail("MalformedCsv", "empty upload");
		}
		if (!known_domain(domain)) {
			fail("InvalidRequest", fmt::format("unknown domain '{}'", domain));
		}
		if (impute != "reject" && impute != "linear") {
			fail("InvalidRequest", "'impute' must be \"reject\" or \"linear\"");
		}

		const auto id = "user-" + hex_digest(content);
		Dataset d;
		d.series = parse_dataset_csv(content, CsvOptions{impute == "linear" ? ImputePolicy::linear : ImputePolicy::reject, id});
		d.name = name.empty() ? id : name;
		d.domain = domain;
		write_text(options.data_dir / (id + ".csv"), serialize_dataset_csv(d.series));
		const auto entry = add_dataset(std::move(d));
		send_json(res, 200, {{"dataset_id", id}, {"meta", to_json(entry->meta)}});
	}

	void series(const Request &req, Response &res) {
		const auto entry = find_dataset(req.path_params.at("id"));
		const auto &s = entry->dataset.series;
		const auto n = static_cast<std::int64_t>(s.length());
		const auto from = std::clamp<std::int64_t>(query_int(req, "from").value_or(0), 0, n);
		const auto to = std::clamp<std::int64_t>(query_int(req, "to").value_or(n), 0, n);
		if (from > to) {
			fail("InvalidRequest", fmt::format("'from' ({}) exceeds 'to' ({})", from, to));
		}
		auto timestamps = nlohmann::json::array();
		auto values = nlohmann::json::array();
		for (auto i = from; i < to; ++i) {
			const auto r = static_cast<std::size_t>(i);
			if (s.time_format == TimeFormat::index) {
				timestamps.push_back(s.timestamps[r]);
			} else {
				timestamps.push_back(format_timestamp(s.timestamps[r], s.time_format));
			}
			auto row = nlohmann::json::array();
			for (std::size_t c = 0; c < s.channels(); ++c) {
				row.push_back(s.values(r, c));
			}
			values.push_back(std::move(row));
		}
		const auto ranges = split(s.length(), options.default_eval.split);
		send_json(res, 200,
		          {{"dataset_id", s.id},
		           {"from", from},
		           {"to", to},
		           {"length", n},
		           {"channels", s.channel_names},
		           {"timestamps", std::move(timestamps)},
		           {"values", std::move(values)},
		           {"split", {{"val_start", ranges.val.begin}, {"test_start", ranges.test.begin}}}});
	}

	void recommend(const Request &req, Response &res) {
		const auto body = parse_object(req);
		const auto entry = find_dataset(require_string(body, "dataset_id"));
		const auto &classifier = require_model();
		const auto k = optional_count(body, "k", 3);
		const auto rec = automl::recommend(classifier, entry->dataset.series, k);
		auto ranked = nlohmann::json::array();
		for (std::size_t i = 0; i < rec.k; ++i) {
			ranked.push_back({{"rank", i + 1},
			                  {"method_id", rec.ranked[i].method_id},
			                  {"name", method_row(MethodSpec{rec.ranked[i].method_id, {}, 0}).name},
			                  {"probability", rec.ranked[i].probability}});
		}
		send_json(res, 200,
		          {{"dataset_id", entry->meta.dataset_id},
		           {"k", rec.k},
		           {"ranked", std::move(ranked)},
		           {"characteristics", to_json(rec.characteristics)}});
	}

	void evaluate(const Request &req, Response &res) {
		const auto body = parse_object(req);
		const auto entry = find_dataset(require_string(body, "dataset_id"));
		const auto it = body.find("methods");
		if (it == body.end() || !it->is_array() || it->empty()) {
			fail("InvalidRequest", "'methods' must be a non-empty array");
		}
		std::vector<MethodSpec> methods;
		std::set<std::string> keys;
		for (const auto &m : *it) {
			auto spec = m.get<MethodSpec>();
			validate_method_spec(spec);
			if (!keys.insert(spec.key()).second) {
				fail("InvalidRequest", fmt::format("method '{}' listed twice", spec.key()));
			}
			methods.push_back(std::move(spec));
		}
		const auto config = eval_config(body);
		const auto &series = entry->dataset.series;
		const auto n_windows = plan_windows(series.length(), split(series.length(), config.split).test.begin, config)
		                           .origins.size();

		const auto id = jobs.submit(JobKind::evaluate, [this, entry, methods, config, n_windows](JobContext &ctx) {
			const auto &series = entry->dataset.series;
			store.upsert_dataset(entry->meta);
			for (const auto &m : methods) {
				store.upsert_method(method_row(m));
			}
			const double total = static_cast<double>(methods.size() * n_windows);
			auto records = nlohmann::json::array();
			auto failures = nlohmann::json::array();
			std::optional<Error> first_failure;
			for (std::size_t i = 0; i < methods.size(); ++i) {
				const auto &spec = methods[i];
				const auto started = utc_now_iso8601();
				const auto progress = [&](std::size_t done, std::size_t) {
					ctx.report((static_cast<double>(i * n_windows + done)) / total);
				};
				try {
					auto detail = evaluate_detailed(series, spec, config, Segment::test, progress);
					store.insert_run_with_scores(make_run_row(series.id, spec, config, started, &detail.record),
					                             detail.record.metric_values);
					nlohmann::json record = detail.record;
					record["windows"] = windows_json(detail.windows);
					records.push_back(std::move(record));
				} catch (const Error &e) {
					if (e.code() == "StoreUnavailable" || e.code() == "ConstraintViolation") {
						throw;
					}
					store.insert_run_with_scores(make_run_row(series.id, spec, config, started, nullptr), {});
					failures.push_back({{"method_id", spec.method_id}, {"code", e.code()}, {"message", e.what()}});
					if (!first_failure) {
						first_failure = e;
					}
				}
				ctx.report(static_cast<double>(i + 1) / static_cast<double>(methods.size()));
			}
			if (records.empty() && first_failure) {
				fail(first_failure->code(), fmt::format("every method failed; first: {}", first_failure->what()));
			}
			return nlohmann::json{{"dataset_id", series.id}, {"records", records}, {"failures", failures}};
		});
		send_json(res, 202, {{"job_id", id}});
	}

	void automl_job(const Request &req, Response &res) {
		const auto body = parse_object(req);
		const auto entry = find_dataset(require_string(body, "dataset_id"));
		const auto &classifier = require_model();
		const auto k = optional_count(body, "k", 3);
		if (k > classifier.n_methods()) {
			fail("InvalidParam", fmt::format("k = {} exceeds the {} methods the model ranks", k, classifier.n_methods()));
		}
		const auto config = eval_config(body);
		const auto &s = entry->dataset.series;
		plan_windows(s.length(), split(s.length(), config.split).test.begin, config);

		const auto id = jobs.submit(JobKind::automl, [this, entry, &classifier, k, config](JobContext &ctx) {
			const auto &series = entry->dataset.series;
			const auto started = utc_now_iso8601();
			auto ensemble = automl::build_ensemble(series, classifier, k, config, [&](std::size_t done, std::size_t total) {
				ctx.report(0.5 * static_cast<double>(done) / static_cast<double>(total));
			});
			auto detail = evaluate_predictor(series, automl::ensemble_predictor(ensemble), config, Segment::test,
			                                 [&](std::size_t done, std::size_t total) {
				                                 ctx.report(0.5 + 0.5 * static_cast<double>(done) /
				                                                      static_cast<double>(total));
			                                 });
			const MethodSpec spec{"ensemble", {{"k", static_cast<double>(k)}}, 0};
			detail.record.method_id = spec.method_id;
			store.upsert_dataset(entry->meta);
			store.upsert_method(MethodRow{spec.method_id, "AutoML ensemble", family_name(MethodFamily::ensemble)});
			store.insert_run_with_scores(make_run_row(series.id, spec, config, started, &detail.record),
			                             detail.record.metric_values);
			auto result = automl::ensemble_to_json(ensemble);
			result["dataset_id"] = series.id;
			result["record"] = detail.record;
			result["windows"] = windows_json(detail.windows);
			return result;
		});
		send_json(res, 202, {{"job_id", id}});
	}

	void results(const Request &req, Response &res) {
		std::string sql =
		    "SELECT r.run_id, r.dataset_id, r.method_id, m.name, r.strategy, r.horizon, r.lookback, r.stride, "
		    "r.started_at, s.metric, s.value FROM runs r JOIN scores s ON s.run_id = r.run_id "
		    "JOIN methods m ON m.method_id = r.method_id WHERE r.status = 'ok'";
		for (const auto &[param, column] : {std::pair{"dataset_id", "r.dataset_id"},
		                                    std::pair{"method_id", "r.method_id"}, std::pair{"metric", "s.metric"}}) {
			if (req.has_param(param)) {
				sql += fmt::format(" AND {} = {}", column, sql_quote(req.get_param_value(param)));
			}
		}
		sql += " ORDER BY r.dataset_id ASC, r.method_id ASC, s.metric ASC LIMIT 1000";
		const auto verified = verified_or_throw(sql);
		auto body = to_json(store.execute_select(verified));
		body["sql"] = verified.text();
		send_json(res, 200, body);
	}
};

Service::Service(ServiceOptions options) : impl_(std::make_unique<Impl>(std::move(options))) {}

Service::~Service() {
	stop();
}

int Service::start() {
	auto &s = impl_->server;
	const auto &host = impl_->options.host;
	if (impl_->options.port == 0) {
		impl_->bound_port = s.bind_to_any_port(host);
	} else if (s.bind_to_port(host, impl_->options.port)) {
		impl_->bound_port = impl_->options.port;
	} else {
		impl_->bound_port = -1;
	}
	if (impl_->bound_port <= 0) {
		fail("BindFailed", fmt::format("cannot listen on {}:{}", host, impl_->options.port));
	}
	impl_->listener = std::thread([&s] { s.listen_after_bind(); });
	s.wait_until_ready();
	return impl_->bound_port;
}

void Service::run() {
	auto &s = impl_->server;
	const auto &host = impl_->options.host;
	if (impl_->options.port == 0) {
		impl_->bound_port = s.bind_to_any_port(host);
	} else if (s.bind_to_port(host, impl_->options.port)) {
		impl_->bound_port = impl_->options.port;
	} else {
		impl_->bound_port = -1;
	}
	if (impl_->bound_port <= 0) {
		fail("BindFailed", fmt::format("cannot listen on {}:{}", host, impl_->options.port));
	}
	s.listen_after_bind();
}

void Service::stop() {
	if (!impl_) {
		return;
	}
	impl_->server.stop();
	if (impl_->listener.joinable()) {
		impl_->listener.join();
	}
}

int Service::port() const noexcept {
	return impl_->bound_port;
}

JobRegistry &Service::jobs() {
	return impl_->jobs;
}

ResultStore &Service::store() {
	return impl_->store;
}

} // namespace easytime
