#include "easytime/evaluation.hpp"
#include "easytime/metrics.hpp"
#include "easytime/resultstore.hpp"
#include "easytime/synthetic.hpp"
#include "expect.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

#include <cmath>
#include <gtest/gtest.h>
#include <random>

using namespace easytime;
using fixtures::error_code;

namespace {

Matrix to_matrix(const oracle::Grid &g) {
	Matrix m(g.size(), g.empty() ? 0 : g[0].size());
	for (std::size_t r = 0; r < g.size(); ++r) {
		for (std::size_t c = 0; c < g[r].size(); ++c) {
			m(r, c) = g[r][c];
		}
	}
	return m;
}

oracle::Grid random_grid(std::mt19937_64 &rng, std::size_t rows, std::size_t cols) {
	std::normal_distribution<double> d(0.0, 5.0);
	std::bernoulli_distribution zero(0.05);
	oracle::Grid g(rows, std::vector<double>(cols));
	for (auto &row : g) {
		for (auto &v : row) {
			v = zero(rng) ? 0.0 : d(rng);
		}
	}
	return g;
}

void expect_close(double actual, double expected) {
	EXPECT_NEAR(actual, expected, 1e-9 * std::max(1.0, std::fabs(expected)));
}

EvalConfig rolling(std::size_t horizon, std::size_t stride, bool partial = false) {
	EvalConfig c;
	c.strategy = Strategy::rolling;
	c.horizon = horizon;
	c.stride = stride;
	c.include_partial_final_window = partial;
	return c;
}

TimeSeries seasonal_series(std::size_t n, int period, std::uint64_t seed, double noise = 0.3) {
	SyntheticSpec spec;
	spec.length = static_cast<int>(n);
	spec.period = period;
	spec.season_amp = 2.0;
	spec.trend_slope = 0.02;
	spec.noise_sd = noise;
	spec.level = 10.0;
	return generate_synthetic(spec, seed, "s" + std::to_string(seed));
}

} // namespace

TEST(Metrics, DocumentedExamples) {
	EXPECT_EQ(compute_metric("mae", Matrix::column({1, 2}), Matrix::column({1, 2})), 0.0);
	EXPECT_DOUBLE_EQ(compute_metric("smape", Matrix::column({1}), Matrix::column({3})), 100.0);
	EXPECT_DOUBLE_EQ(compute_metric("mase", Matrix::column({5, 6}), Matrix::column({5, 7}), Matrix::column({1, 2, 3, 4}), 1),
	                 0.5);
}

TEST(Metrics, MatchOracleOnRandomPairs) {
	std::mt19937_64 rng(2024);
	std::uniform_int_distribution<std::size_t> rows(1, 12);
	std::uniform_int_distribution<std::size_t> cols(1, 3);
	std::uniform_int_distribution<std::size_t> period(1, 4);
	for (int trial = 0; trial < 1000; ++trial) {
		const auto h = rows(rng);
		const auto c = cols(rng);
		const auto m = period(rng);
		const auto y = random_grid(rng, h, c);
		const auto yhat = random_grid(rng, h, c);
		const auto ctx = random_grid(rng, m + 1 + rows(rng), c);
		const auto my = to_matrix(y);
		const auto myhat = to_matrix(yhat);
		expect_close(compute_metric("mae", my, myhat), oracle::mae(y, yhat));
		expect_close(compute_metric("mse", my, myhat), oracle::mse(y, yhat));
		expect_close(compute_metric("rmse", my, myhat), oracle::rmse(y, yhat));
		expect_close(compute_metric("smape", my, myhat), oracle::smape(y, yhat));
		if (const auto ref = oracle::mape(y, yhat)) {
			expect_close(compute_metric("mape", my, myhat), *ref);
		}
		if (const auto ref = oracle::mase(y, yhat, ctx, m)) {
			expect_close(compute_metric("mase", my, myhat, to_matrix(ctx), m), *ref);
		}
		EXPECT_LE(compute_metric("mae", my, myhat), compute_metric("rmse", my, myhat) + 1e-12);
	}
}

TEST(Metrics, EdgeCases) {
	// 0/0 sMAPE cell counts as zero error but still counts toward the mean.
	EXPECT_DOUBLE_EQ(compute_metric("smape", Matrix::column({0, 1}), Matrix::column({0, 3})), 50.0);
	// MAPE skips near-zero actuals.
	EXPECT_DOUBLE_EQ(compute_metric("mape", Matrix::column({0, 2}), Matrix::column({5, 3})), 50.0);
	EXPECT_EQ(error_code([] { compute_metric("mape", Matrix::column({0, 1e-9}), Matrix::column({1, 1})); }),
	          "AllTermsExcluded");
	EXPECT_EQ(error_code([] { compute_metric("mase", Matrix::column({1}), Matrix::column({2}), Matrix::column({3, 3, 3}), 1); }),
	          "ZeroScale");
	EXPECT_EQ(error_code([] { compute_metric("mase", Matrix::column({1}), Matrix::column({2}), Matrix::column({1, 2}), 2); }),
	          "InsufficientContext");
	EXPECT_EQ(error_code([] { compute_metric("wape", Matrix::column({1}), Matrix::column({1})); }), "UnknownMetric");
	EXPECT_EQ(error_code([] { compute_metric("mae", Matrix::column({1}), Matrix::column({1, 2})); }), "ShapeMismatch");
}

TEST(WindowPlan, DocumentedExamples) {
	EXPECT_EQ(plan_windows(100, 80, rolling(5, 5)).origins, (std::vector<std::size_t>{80, 85, 90, 95}));
	EvalConfig fixed;
	fixed.horizon = 20;
	EXPECT_EQ(plan_windows(100, 80, fixed).origins, (std::vector<std::size_t>{80}));
	EXPECT_EQ(plan_windows(100, 80, rolling(7, 7)).origins, (std::vector<std::size_t>{80, 87}));
	const auto with_partial = plan_windows(100, 80, rolling(7, 7, true));
	EXPECT_EQ(with_partial.origins, (std::vector<std::size_t>{80, 87, 94}));
	EXPECT_EQ(with_partial.window_end(2), 100u);
	EXPECT_EQ(error_code([] { plan_windows(100, 90, rolling(11, 1)); }), "NoWindows");
}

TEST(WindowPlan, MatchesEnumerationOnSmallGrid) {
	for (std::size_t n = 1; n <= 60; ++n) {
		for (std::size_t ts = 0; ts < n; ts += 3) {
			for (std::size_t h = 1; h <= 20; h += 2) {
				for (std::size_t stride = 1; stride <= 20; stride += 3) {
					for (bool partial : {false, true}) {
						for (bool roll : {false, true}) {
							auto config = rolling(h, stride, partial);
							if (!roll) {
								config.strategy = Strategy::fixed;
							}
							const auto expected = oracle::window_origins(n, ts, h, stride, roll, partial);
							const bool any_full = ts + h <= n;
							if (!any_full) {
								EXPECT_EQ(error_code([&] { plan_windows(n, ts, config); }), "NoWindows");
								continue;
							}
							EXPECT_EQ(plan_windows(n, ts, config).origins, expected)
							    << "n=" << n << " ts=" << ts << " h=" << h << " stride=" << stride;
						}
					}
				}
			}
		}
	}
}

TEST(WindowPlan, RollingCountFormula) {
	std::mt19937_64 rng(3);
	std::uniform_int_distribution<std::size_t> len(10, 500);
	for (int trial = 0; trial < 2000; ++trial) {
		const auto n = len(rng);
		const auto ts = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
		const auto h = std::uniform_int_distribution<std::size_t>(1, 30)(rng);
		const auto stride = std::uniform_int_distribution<std::size_t>(1, 30)(rng);
		if (ts + h > n) {
			continue;
		}
		EXPECT_EQ(plan_windows(n, ts, rolling(h, stride)).origins.size(), (n - ts - h) / stride + 1);
	}
}

TEST(WindowPlan, PartialFlagAddsAtMostTheFinalWindow) {
	for (std::size_t n = 32; n < 120; ++n) {
		for (std::size_t h = 1; h <= 12; ++h) {
			const auto off = plan_windows(n, 20, rolling(h, h)).origins;
			const auto on = plan_windows(n, 20, rolling(h, h, true)).origins;
			const bool leftover = off.back() + h < n;
			ASSERT_EQ(on.size(), off.size() + (leftover ? 1u : 0u));
			EXPECT_TRUE(std::equal(off.begin(), off.end(), on.begin()));
			if (leftover) {
				EXPECT_EQ(on.back(), off.back() + h);
			}
		}
	}
}

TEST(Evaluate, SeasonalNaiveHasZeroErrorOnPeriodicSeries) {
	std::vector<double> x;
	for (int t = 0; t < 240; ++t) {
		x.push_back(static_cast<double>((t % 12) * (t % 12)) + 1.0);
	}
	const auto series = make_series("periodic", Matrix::column(x));
	const MethodSpec spec{"seasonal_naive", {{"period", 12}}, 0};
	for (auto config : {rolling(6, 6), rolling(24, 5, true), EvalConfig{}}) {
		config.metrics = {"mae", "rmse"};
		const auto record = evaluate(series, spec, config);
		EXPECT_NEAR(record.metric_values.at("mae"), 0.0, 1e-9);
		EXPECT_NEAR(record.metric_values.at("rmse"), 0.0, 1e-9);
	}
}

TEST(Evaluate, ConstantSeriesEdgeComposition) {
	auto config = rolling(4, 4);
	config.metrics = {"mae", "mse", "rmse", "mape", "smape"};
	const auto flat = evaluate(make_series("flat", Matrix(50, 1, 3.0)), {"naive", {}, 0}, config);
	for (const auto &[name, value] : flat.metric_values) {
		EXPECT_EQ(value, 0.0) << name;
	}
	config.metrics = {"mape"};
	EXPECT_EQ(error_code([&] { evaluate(make_series("zero", Matrix(50, 1, 0.0)), {"naive", {}, 0}, config); }),
	          "AllTermsExcluded");
}

TEST(Evaluate, RollingRecordCountsWindows) {
	const auto series = seasonal_series(100, 10, 1);
	const auto record = evaluate(series, {"naive", {}, 0}, rolling(5, 5));
	EXPECT_EQ(record.n_windows, 4u);
	EXPECT_EQ(record.horizon, 5u);
	EXPECT_EQ(record.stride, 5u);
	EXPECT_EQ(record.dataset_id, series.id);
	std::set<std::string> keys;
	for (const auto &[k, v] : record.metric_values) {
		keys.insert(k);
	}
	EXPECT_EQ(keys, (std::set<std::string>{"mae", "mape", "mase", "mse", "rmse", "smape"}));
}

TEST(Evaluate, WindowsHaveEqualWeight) {
	const auto series = seasonal_series(100, 10, 2);
	auto config = rolling(5, 5);
	config.metrics = {"mae"};
	const auto detail = evaluate_detailed(series, {"drift", {}, 0}, config);
	ASSERT_EQ(detail.windows.size(), 4u);
	double sum = 0.0;
	for (const auto &w : detail.windows) {
		sum += compute_metric("mae", w.actual, w.forecast);
	}
	EXPECT_NEAR(detail.record.metric_values.at("mae"), sum / 4.0, 1e-12);
}

TEST(Evaluate, LookbackCapsFitHistory) {
	const auto series = seasonal_series(200, 12, 3);
	auto config = rolling(10, 10);
	config.lookback = 30;
	const auto model = fit_window(series, {"mean", {}, 0}, config, 160);
	EXPECT_EQ(model.train_length, 30u);
	config.lookback = 1000;
	EXPECT_EQ(fit_window(series, {"mean", {}, 0}, config, 160).train_length, 160u);
}

TEST(Evaluate, FitNeverSeesTestValues) {
	const auto series = seasonal_series(200, 12, 4);
	auto perturbed = series;
	for (std::size_t t = 160; t < 200; ++t) {
		perturbed.values(t, 0) += 1000.0 * static_cast<double>(t);
	}
	const auto config = rolling(8, 8);
	const auto plan = plan_windows(200, 160, config);
	for (const auto &id : builtin_method_ids()) {
		const MethodSpec spec{id, {}, 0};
		EXPECT_EQ(model_to_json(fit_window(series, spec, config, 160)), model_to_json(fit_window(perturbed, spec, config, 160)))
		    << id;
	}
	const auto a = fit_segment_normalizer(series, config);
	const auto b = fit_segment_normalizer(perturbed, config);
	EXPECT_EQ(a.mean, b.mean);
	EXPECT_EQ(a.std, b.std);
}

TEST(Evaluate, EvalRecordJsonRoundTrip) {
	const auto record = evaluate(seasonal_series(120, 12, 5), {"theta", {}, 0}, rolling(6, 3));
	EvalRecord back = nlohmann::json(record).get<EvalRecord>();
	EXPECT_EQ(nlohmann::json(back), nlohmann::json(record));
}

TEST(Pipeline, CrossProductAndDeterminism) {
	fixtures::TempDir dir;
	auto store = ResultStore::open(dir / "a.db");
	const std::vector<TimeSeries> corpus{seasonal_series(150, 12, 6), seasonal_series(150, 7, 7)};
	const std::vector<MethodSpec> methods{{"naive", {}, 0}, {"ses", {}, 0}, {"holt_winters", {}, 0}};
	const auto config = rolling(12, 12);
	const auto first = run_pipeline(corpus, methods, config, store);
	EXPECT_EQ(first.ok_count(), 6u);
	EXPECT_TRUE(first.failures.empty());
	EXPECT_EQ(store.count_runs(RunStatus::ok), 6u);

	auto other = ResultStore::open(dir / "b.db");
	PipelineOptions serial;
	serial.workers = 1;
	const auto second = run_pipeline(corpus, methods, config, other, serial);
	ASSERT_EQ(second.records.size(), first.records.size());
	for (std::size_t i = 0; i < first.records.size(); ++i) {
		EXPECT_EQ(first.records[i].metric_values, second.records[i].metric_values);
		EXPECT_EQ(first.records[i].config_digest, second.records[i].config_digest);
	}
}

TEST(Pipeline, FailuresAreIsolated) {
	fixtures::TempDir dir;
	auto store = ResultStore::open(dir / "r.db");
	const std::vector<TimeSeries> corpus{seasonal_series(40, 5, 8), seasonal_series(200, 5, 9)};
	const std::vector<MethodSpec> methods{{"naive", {}, 0}, {"mean", {}, 0}, {"seasonal_naive", {{"period", 50}}, 0}};
	auto config = rolling(4, 4);
	config.metrics = {"mae"};
	const auto result = run_pipeline(corpus, methods, config, store);
	EXPECT_EQ(result.ok_count(), 5u);
	ASSERT_EQ(result.failures.size(), 1u);
	EXPECT_EQ(result.failures[0].code, "InsufficientHistory");
	EXPECT_EQ(result.failures[0].dataset_id, corpus[0].id);
	EXPECT_EQ(store.count_runs(RunStatus::ok), 5u);
	EXPECT_EQ(store.count_runs(RunStatus::failed), 1u);
}

TEST(Pipeline, StoredRecordsAreLossless) {
	fixtures::TempDir dir;
	auto store = ResultStore::open(dir / "r.db");
	const std::vector<TimeSeries> corpus{seasonal_series(150, 12, 10)};
	const std::vector<MethodSpec> methods{{"ar_ls", {}, 0}, {"linear_trend", {}, 0}};
	const auto config = rolling(12, 6);
	const auto result = run_pipeline(corpus, methods, config, store);
	ASSERT_EQ(result.records.size(), 2u);
	for (std::size_t i = 0; i < methods.size(); ++i) {
		const auto id = run_id_for(corpus[0].id, methods[i], config_digest(config));
		const auto stored = store.eval_record(id);
		ASSERT_TRUE(stored.has_value());
		EXPECT_EQ(nlohmann::json(*stored), nlohmann::json(result.records[i]));
	}
}

TEST(EvalConfig, Validation) {
	EvalConfig c;
	c.horizon = 0;
	EXPECT_EQ(error_code([&] { validate_eval_config(c); }), "InvalidConfig");
	c = {};
	c.metrics = {};
	EXPECT_EQ(error_code([&] { validate_eval_config(c); }), "InvalidConfig");
	c.metrics = {"mae", "bogus"};
	EXPECT_EQ(error_code([&] { validate_eval_config(c); }), "InvalidConfig");
	EXPECT_EQ(rolling(5, 0).effective_stride(), 5u);
	EXPECT_NE(config_digest(rolling(5, 5)), config_digest(rolling(5, 4)));
	EXPECT_EQ(config_digest(rolling(5, 5)), config_digest(rolling(5, 5)));
}
