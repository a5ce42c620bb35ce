#pragma once

#include "easytime/core.hpp"
#include "easytime/forecasters.hpp"

#include <json.hpp>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace easytime {

class ResultStore;

enum class Strategy { fixed, rolling };
const char *strategy_name(Strategy s);

struct EvalConfig {
	Strategy strategy = Strategy::fixed;
	std::size_t horizon = 24;
	/// Maximum history fed to fit; longer histories are truncated to the most recent points.
	std::size_t lookback = 512;
	/// 0 means "same as horizon".
	std::size_t stride = 0;
	bool include_partial_final_window = false;
	SplitSpec split;
	NormalizationKind normalization = NormalizationKind::zscore;
	std::vector<std::string> metrics = {"mae", "mse", "rmse", "mape", "smape", "mase"};
	/// Seasonal lag of the mase scale.
	std::size_t mase_period = 1;
	std::uint64_t seed = 0;

	std::size_t effective_stride() const noexcept { return stride == 0 ? horizon : stride; }
};

/// Throws InvalidConfig on the first violated invariant.
void validate_eval_config(const EvalConfig &config);

void to_json(nlohmann::json &j, const EvalConfig &config);
/// Fills defaults for absent keys; throws InvalidConfig on bad values.
void from_json(const nlohmann::json &j, EvalConfig &config);

/// Digest of the canonical JSON of `config`.
std::string config_digest(const EvalConfig &config);

/// Forecast origins; window k scores indices [origins[k], min(origins[k] + horizon, n)).
struct WindowPlan {
	std::vector<std::size_t> origins;
	std::size_t horizon = 0;
	std::size_t n = 0;

	std::size_t window_end(std::size_t k) const { return std::min(origins[k] + horizon, n); }
};

/// fixed: the single origin test_start. rolling: test_start, +stride, ...
/// while o + horizon <= n, plus a trailing partial window when configured.
/// Throws NoWindows.
WindowPlan plan_windows(std::size_t n, std::size_t test_start, const EvalConfig &config);

struct EvalRecord {
	std::string dataset_id;
	std::string method_id;
	Strategy strategy = Strategy::fixed;
	std::size_t horizon = 0;
	std::size_t lookback = 0;
	std::size_t stride = 0;
	std::map<std::string, double> metric_values;
	std::size_t n_windows = 0;
	std::int64_t runtime_ms = 0;
	std::string config_digest;
};

void to_json(nlohmann::json &j, const EvalRecord &record);
void from_json(const nlohmann::json &j, EvalRecord &record);

enum class Segment { validation, test };

/// Produces a forecast of `horizon` rows from a normalized history.
using Predictor = std::function<Matrix(const Matrix &history, std::size_t horizon)>;

Predictor method_predictor(const MethodSpec &spec);

struct WindowForecast {
	std::size_t origin = 0;
	Matrix forecast; // original scale, truncated to the scored length
	Matrix actual;
};

struct EvalDetail {
	EvalRecord record;
	std::vector<WindowForecast> windows;
};

using ProgressFn = std::function<void(std::size_t done, std::size_t total)>;

/// Window-by-window evaluation of an arbitrary predictor on one segment.
/// Normalization statistics come from the training segment only; metrics
/// are computed on the original scale and averaged over windows with equal
/// weight. Errors carry the failing window index in their message.
EvalDetail evaluate_predictor(const TimeSeries &series, const Predictor &predictor, const EvalConfig &config,
                              Segment segment = Segment::test, const ProgressFn &progress = {});

EvalRecord evaluate(const TimeSeries &series, const MethodSpec &spec, const EvalConfig &config);
EvalDetail evaluate_detailed(const TimeSeries &series, const MethodSpec &spec, const EvalConfig &config,
                             Segment segment = Segment::test, const ProgressFn &progress = {});

/// The normalizer evaluate() uses for `series` (train-only statistics,
/// falling back to kind none on zero variance).
NormalizerState fit_segment_normalizer(const TimeSeries &series, const EvalConfig &config);

/// The model evaluate() fits for the window starting at `origin`.
FittedModel fit_window(const TimeSeries &series, const MethodSpec &spec, const EvalConfig &config,
                       std::size_t origin);

/// A corpus entry with the metadata the results store keeps.
struct Dataset {
	TimeSeries series;
	std::string name;
	std::string domain = "user";
};

DatasetMeta dataset_meta(const Dataset &dataset);

struct FailedRun {
	std::string dataset_id;
	std::string method_id;
	std::string method_key;
	std::string code;
	std::string message;
};

struct PipelineResult {
	std::vector<EvalRecord> records;
	std::vector<FailedRun> failures;

	std::size_t ok_count() const noexcept { return records.size(); }
};

struct PipelineOptions {
	std::size_t workers = 0; // 0 = hardware concurrency
	std::function<void(std::size_t done, std::size_t total, const std::string &label)> progress;
};

/// Evaluates every (dataset, method) pair. A failing pair becomes a failed
/// run, never aborting the sweep. Each run and its scores are written in one
/// transaction by the calling thread. Throws SinkUnavailable only.
PipelineResult run_pipeline(const std::vector<Dataset> &corpus, const std::vector<MethodSpec> &methods,
                            const EvalConfig &config, ResultStore &sink, const PipelineOptions &options = {});
PipelineResult run_pipeline(const std::vector<TimeSeries> &corpus, const std::vector<MethodSpec> &methods,
                            const EvalConfig &config, ResultStore &sink, const PipelineOptions &options = {});

/// Deterministic run identifier of a (dataset, method, config) cell.
std::string run_id_for(const std::string &dataset_id, const MethodSpec &spec, const std::string &config_digest);

/// Runs `task(i)` for i in [0, count) on up to `workers` threads.
void parallel_for(std::size_t count, std::size_t workers, const std::function<void(std::size_t)> &task);
std::size_t default_workers();

} // namespace easytime
