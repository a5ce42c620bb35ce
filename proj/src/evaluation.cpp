#include "easytime/evaluation.hpp"

#include "easytime/digest.hpp"
#include "easytime/error.hpp"
#include "easytime/features.hpp"
#include "easytime/metrics.hpp"
#include "easytime/resultstore.hpp"

#include <atomic>
#include <condition_variable>
#include <fmt/format.h>
#include <mutex>
#include <thread>

namespace easytime {

const char *strategy_name(Strategy s) {
	return s == Strategy::fixed ? "fixed" : "rolling";
}

void validate_eval_config(const EvalConfig &config) {
	if (config.horizon < 1) {
		fail("InvalidConfig", "horizon must be >= 1");
	}
	if (config.lookback < 1) {
		fail("InvalidConfig", "lookback must be >= 1");
	}
	if (config.metrics.empty()) {
		fail("InvalidConfig", "metrics must be non-empty");
	}
	for (const auto &m : config.metrics) {
		if (!is_metric(m)) {
			fail("InvalidConfig", fmt::format("unknown metric '{}'", m));
		}
	}
	if (config.mase_period < 1) {
		fail("InvalidConfig", "mase_period must be >= 1");
	}
	try {
		validate_split_spec(config.split);
	} catch (const Error &e) {
		fail("InvalidConfig", e.what());
	}
}

void to_json(nlohmann::json &j, const EvalConfig &config) {
	j = nlohmann::json{
	    {"strategy", strategy_name(config.strategy)},
	    {"horizon", config.horizon},
	    {"lookback", config.lookback},
	    {"stride", config.effective_stride()},
	    {"include_partial_final_window", config.include_partial_final_window},
	    {"split",
	     {{"train", config.split.train_ratio}, {"val", config.split.val_ratio}, {"test", config.split.test_ratio}}},
	    {"normalization", config.normalization == NormalizationKind::zscore ? "zscore" : "none"},
	    {"metrics", config.metrics},
	    {"mase_period", config.mase_period},
	    {"seed", config.seed},
	};
}

void from_json(const nlohmann::json &j, EvalConfig &config) {
	try {
		if (!j.is_object()) {
			fail("InvalidConfig", "eval config must be an object");
		}
		if (j.contains("strategy")) {
			const auto s = j.at("strategy").get<std::string>();
			if (s == "fixed") {
				config.strategy = Strategy::fixed;
			} else if (s == "rolling") {
				config.strategy = Strategy::rolling;
			} else {
				fail("InvalidConfig", fmt::format("unknown strategy '{}'", s));
			}
		}
		auto positive = [&](const char *key, std::size_t &out, bool allow_zero) {
			if (!j.contains(key)) {
				return;
			}
			const auto &v = j.at(key);
			if (!v.is_number_integer() || v.get<long long>() < (allow_zero ? 0 : 1)) {
				fail("InvalidConfig", fmt::format("{} must be an integer >= {}", key, allow_zero ? 0 : 1));
			}
			out = v.get<std::size_t>();
		};
		positive("horizon", config.horizon, false);
		positive("lookback", config.lookback, false);
		positive("stride", config.stride, true);
		positive("mase_period", config.mase_period, false);
		config.include_partial_final_window =
		    j.value("include_partial_final_window", config.include_partial_final_window);
		if (j.contains("split")) {
			const auto &s = j.at("split");
			config.split.train_ratio = s.value("train", config.split.train_ratio);
			config.split.val_ratio = s.value("val", config.split.val_ratio);
			config.split.test_ratio = s.value("test", config.split.test_ratio);
		}
		if (j.contains("normalization")) {
			const auto n = j.at("normalization").get<std::string>();
			if (n == "zscore") {
				config.normalization = NormalizationKind::zscore;
			} else if (n == "none") {
				config.normalization = NormalizationKind::none;
			} else {
				fail("InvalidConfig", fmt::format("unknown normalization '{}'", n));
			}
		}
		if (j.contains("metrics")) {
			config.metrics = j.at("metrics").get<std::vector<std::string>>();
		}
		config.seed = j.value("seed", config.seed);
	} catch (const nlohmann::json::exception &e) {
		fail("InvalidConfig", fmt::format("malformed eval config: {}", e.what()));
	}
	validate_eval_config(config);
}

std::string config_digest(const EvalConfig &config) {
	return hex_digest(nlohmann::json(config).dump());
}

WindowPlan plan_windows(std::size_t n, std::size_t test_start, const EvalConfig &config) {
	WindowPlan plan;
	plan.horizon = config.horizon;
	plan.n = n;
	const auto h = config.horizon;
	const auto start = test_start;
	if (start >= n || h > n - start) {
		fail("NoWindows",
		     fmt::format("no evaluation window of horizon {} fits in [{}, {})", h, test_start, n));
	}
	if (config.strategy == Strategy::fixed) {
		plan.origins.push_back(start);
	} else {
		const auto stride = config.effective_stride();
		std::size_t o = start;
		for (; o + h <= n; o += stride) {
			plan.origins.push_back(o);
		}
		if (config.include_partial_final_window && o < n) {
			plan.origins.push_back(o);
		}
	}
	return plan;
}

void to_json(nlohmann::json &j, const EvalRecord &r) {
	j = nlohmann::json{{"dataset_id", r.dataset_id},
	                   {"method_id", r.method_id},
	                   {"strategy", strategy_name(r.strategy)},
	                   {"horizon", r.horizon},
	                   {"lookback", r.lookback},
	                   {"stride", r.stride},
	                   {"metric_values", r.metric_values},
	                   {"n_windows", r.n_windows},
	                   {"runtime_ms", r.runtime_ms},
	                   {"config_digest", r.config_digest}};
}

void from_json(const nlohmann::json &j, EvalRecord &r) {
	r.dataset_id = j.at("dataset_id").get<std::string>();
	r.method_id = j.at("method_id").get<std::string>();
	r.strategy = j.at("strategy").get<std::string>() == "rolling" ? Strategy::rolling : Strategy::fixed;
	r.horizon = j.at("horizon").get<std::size_t>();
	r.lookback = j.at("lookback").get<std::size_t>();
	r.stride = j.at("stride").get<std::size_t>();
	r.metric_values = j.at("metric_values").get<std::map<std::string, double>>();
	r.n_windows = j.at("n_windows").get<std::size_t>();
	r.runtime_ms = j.at("runtime_ms").get<std::int64_t>();
	r.config_digest = j.at("config_digest").get<std::string>();
}

Predictor method_predictor(const MethodSpec &spec) {
	return [spec](const Matrix &history, std::size_t horizon) { return predict(fit(spec, history), horizon).values; };
}

NormalizerState fit_segment_normalizer(const TimeSeries &series, const EvalConfig &config) {
	const auto ranges = split(series.length(), config.split);
	if (config.normalization == NormalizationKind::none) {
		return normalize_fit(series.values.slice_rows(0, ranges.train.end), NormalizationKind::none);
	}
	try {
		return normalize_fit(series.values.slice_rows(0, ranges.train.end), NormalizationKind::zscore);
	} catch (const Error &e) {
		if (e.code() != "ZeroVariance") {
			throw;
		}
		return normalize_fit(series.values.slice_rows(0, ranges.train.end), NormalizationKind::none);
	}
}

namespace {

std::size_t history_begin(std::size_t origin, std::size_t lookback) {
	return origin > lookback ? origin - lookback : 0;
}

} // namespace

EvalDetail evaluate_predictor(const TimeSeries &series, const Predictor &predictor, const EvalConfig &config,
                              Segment segment, const ProgressFn &progress) {
	validate_eval_config(config);
	const auto started = std::chrono::steady_clock::now();
	const auto n = series.length();
	if (n < 3) {
		fail("SeriesTooShort", fmt::format("series '{}' has {} points; at least 3 needed to split", series.id, n));
	}
	const auto ranges = split(n, config.split);
	const auto normalizer = fit_segment_normalizer(series, config);
	const Matrix normalized = normalize_apply(normalizer, series.values);

	const auto plan = segment == Segment::test ? plan_windows(n, ranges.test.begin, config)
	                                           : plan_windows(ranges.test.begin, ranges.val.begin, config);

	EvalDetail detail;
	auto &record = detail.record;
	record.dataset_id = series.id;
	record.strategy = config.strategy;
	record.horizon = config.horizon;
	record.lookback = config.lookback;
	record.stride = config.effective_stride();
	record.n_windows = plan.origins.size();
	record.config_digest = config_digest(config);
	for (const auto &m : config.metrics) {
		record.metric_values[m] = 0.0;
	}

	for (std::size_t k = 0; k < plan.origins.size(); ++k) {
		const auto origin = plan.origins[k];
		const auto end = plan.window_end(k);
		try {
			const Matrix history = normalized.slice_rows(history_begin(origin, config.lookback), origin);
			Matrix forecast = predictor(history, config.horizon);
			if (forecast.rows() != config.horizon || forecast.cols() != series.channels()) {
				fail("ShapeMismatch", fmt::format("forecast is {}x{}, expected {}x{}", forecast.rows(), forecast.cols(),
				                                  config.horizon, series.channels()));
			}
			forecast = normalize_invert(normalizer, forecast.slice_rows(0, end - origin));
			Matrix actual = series.values.slice_rows(origin, end);
			const Matrix context = series.values.slice_rows(0, origin);
			for (const auto &m : config.metrics) {
				record.metric_values[m] += compute_metric(m, actual, forecast, context, config.mase_period);
			}
			detail.windows.push_back(WindowForecast{origin, std::move(forecast), std::move(actual)});
		} catch (const Error &e) {
			throw Error(e.code(), fmt::format("window {} (origin {}): {}", k, origin, e.what()));
		}
		if (progress) {
			progress(k + 1, plan.origins.size());
		}
	}
	for (auto &[name, value] : record.metric_values) {
		value /= static_cast<double>(plan.origins.size());
	}
	record.runtime_ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started)
	                        .count();
	return detail;
}

EvalDetail evaluate_detailed(const TimeSeries &series, const MethodSpec &spec, const EvalConfig &config,
                             Segment segment, const ProgressFn &progress) {
	validate_method_spec(spec);
	auto detail = evaluate_predictor(series, method_predictor(spec), config, segment, progress);
	detail.record.method_id = spec.method_id;
	return detail;
}

EvalRecord evaluate(const TimeSeries &series, const MethodSpec &spec, const EvalConfig &config) {
	return evaluate_detailed(series, spec, config).record;
}

FittedModel fit_window(const TimeSeries &series, const MethodSpec &spec, const EvalConfig &config,
                       std::size_t origin) {
	const auto normalizer = fit_segment_normalizer(series, config);
	const Matrix normalized = normalize_apply(normalizer, series.values.slice_rows(0, origin));
	return fit(spec, normalized.slice_rows(history_begin(origin, config.lookback), origin));
}

DatasetMeta dataset_meta(const Dataset &dataset) {
	DatasetMeta meta;
	meta.dataset_id = dataset.series.id;
	meta.name = dataset.name.empty() ? dataset.series.id : dataset.name;
	meta.domain = dataset.domain.empty() ? "user" : dataset.domain;
	meta.n_channels = static_cast<int>(dataset.series.channels());
	meta.length = static_cast<int>(dataset.series.length());
	meta.frequency = dataset.series.frequency;
	if (dataset.series.length() >= features::kMinCharacteristicLength) {
		meta.characteristics = features::characteristics(dataset.series);
	}
	return meta;
}

std::string run_id_for(const std::string &dataset_id, const MethodSpec &spec, const std::string &digest) {
	return hex_digest(dataset_id + "\x1f" + spec.key() + "\x1f" + std::to_string(spec.seed) + "\x1f" + digest);
}

MethodRow method_row(const MethodSpec &spec) {
	std::string name(spec.method_id);
	for (const auto &info : builtin_methods()) {
		if (info.id == spec.method_id) {
			name = info.display_name;
		}
	}
	return MethodRow{spec.method_id, name, family_name(method_family(spec.method_id))};
}

RunRow make_run_row(const std::string &dataset_id, const MethodSpec &spec, const EvalConfig &config,
                    const std::string &started_at, const EvalRecord *record) {
	RunRow run;
	run.config_digest = config_digest(config);
	run.run_id = run_id_for(dataset_id, spec, run.config_digest);
	run.dataset_id = dataset_id;
	run.method_id = spec.method_id;
	run.strategy = strategy_name(config.strategy);
	run.horizon = static_cast<std::int64_t>(config.horizon);
	run.lookback = static_cast<std::int64_t>(config.lookback);
	run.stride = static_cast<std::int64_t>(config.effective_stride());
	run.started_at = started_at;
	run.status = record ? RunStatus::ok : RunStatus::failed;
	if (record) {
		run.n_windows = static_cast<std::int64_t>(record->n_windows);
		run.runtime_ms = record->runtime_ms;
	}
	return run;
}

std::size_t default_workers() {
	return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t count, std::size_t workers, const std::function<void(std::size_t)> &task) {
	workers = std::max<std::size_t>(1, std::min(workers == 0 ? default_workers() : workers, count));
	if (workers <= 1) {
		for (std::size_t i = 0; i < count; ++i) {
			task(i);
		}
		return;
	}
	std::atomic<std::size_t> next{0};
	std::vector<std::jthread> pool;
	for (std::size_t w = 0; w < workers; ++w) {
		pool.emplace_back([&] {
			for (std::size_t i = next++; i < count; i = next++) {
				task(i);
			}
		});
	}
}

PipelineResult run_pipeline(const std::vector<Dataset> &corpus, const std::vector<MethodSpec> &methods,
                            const EvalConfig &config, ResultStore &sink, const PipelineOptions &options) {
	validate_eval_config(config);
	const auto digest = config_digest(config);
	try {
		for (const auto &d : corpus) {
			sink.upsert_dataset(dataset_meta(d));
		}
		for (const auto &m : methods) {
			sink.upsert_method(method_row(m));
		}
	} catch (const Error &e) {
		fail("SinkUnavailable", e.what());
	}

	struct Cell {
		std::optional<EvalRecord> record;
		std::optional<FailedRun> failure;
		std::string started_at;
		bool done = false;
	};
	const auto total = corpus.size() * methods.size();
	std::vector<Cell> cells(total);
	std::mutex mutex;
	std::condition_variable ready;

	auto compute = [&](std::size_t i) {
		const auto &dataset = corpus[i / methods.size()];
		const auto &spec = methods[i % methods.size()];
		Cell cell;
		cell.started_at = utc_now_iso8601();
		try {
			cell.record = evaluate(dataset.series, spec, config);
		} catch (const Error &e) {
			cell.failure = FailedRun{dataset.series.id, spec.method_id, spec.key(), e.code(), e.what()};
		} catch (const std::exception &e) {
			cell.failure = FailedRun{dataset.series.id, spec.method_id, spec.key(), "InternalError", e.what()};
		}
		cell.done = true;
		{
			std::lock_guard lock(mutex);
			cells[i] = std::move(cell);
		}
		ready.notify_all();
	};

	PipelineResult result;
	auto write = [&](std::size_t i) {
		const auto &cell = cells[i];
		const auto &spec = methods[i % methods.size()];
		const auto &dataset = corpus[i / methods.size()];
		auto run = make_run_row(dataset.series.id, spec, config, cell.started_at,
		                        cell.record ? &*cell.record : nullptr);
		try {
			if (cell.record) {
				sink.insert_run_with_scores(run, cell.record->metric_values);
				result.records.push_back(*cell.record);
			} else {
				sink.insert_run_with_scores(run, {});
				result.failures.push_back(*cell.failure);
			}
		} catch (const Error &e) {
			fail("SinkUnavailable", e.what());
		}
		if (options.progress) {
			options.progress(i + 1, total, fmt::format("{} / {}", dataset.series.id, spec.key()));
		}
	};

	std::size_t workers = options.workers == 0 ? default_workers() : options.workers;
	if (workers <= 1) {
		for (std::size_t i = 0; i < total; ++i) {
			compute(i);
			write(i);
		}
		return result;
	}
	// Workers evaluate; this thread is the single writer, in cell order.
	std::jthread producer([&] { parallel_for(total, workers, compute); });
	for (std::size_t i = 0; i < total; ++i) {
		{
			std::unique_lock lock(mutex);
			ready.wait(lock, [&] { return cells[i].done; });
		}
		write(i);
	}
	return result;
}

PipelineResult run_pipeline(const std::vector<TimeSeries> &corpus, const std::vector<MethodSpec> &methods,
                            const EvalConfig &config, ResultStore &sink, const PipelineOptions &options) {
	std::vector<Dataset> datasets;
	datasets.reserve(corpus.size());
	for (const auto &s : corpus) {
		datasets.push_back(Dataset{s, s.id, "user"});
	}
	return run_pipeline(datasets, methods, config, sink, options);
}

} // namespace easytime
