#pragma once

#include "easytime/matrix.hpp"

#include <json.hpp>
#include <chrono>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace easytime {

/// A forecasting method and its parameters. `method_id` is one of the
/// built-in ids (see builtin_method_ids()) or "external:<executable path>".
struct MethodSpec {
	std::string method_id;
	std::map<std::string, double> params;
	std::uint64_t seed = 0;

	/// Stable text key: method id plus sorted params, e.g. "ses(alpha=0.5)".
	std::string key() const;
	friend bool operator==(const MethodSpec &, const MethodSpec &) = default;
};

enum class MethodFamily { statistical, ml, ensemble, external };
const char *family_name(MethodFamily family);

struct MethodInfo {
	std::string_view id;
	std::string_view display_name;
	MethodFamily family;
	/// Parameter name -> default value.
	std::map<std::string, double> defaults;
	std::string_view description;
};

/// The ten built-in methods in registry order.
const std::vector<MethodInfo> &builtin_methods();
std::vector<std::string> builtin_method_ids();
bool is_builtin(std::string_view method_id);
bool is_external(std::string_view method_id);
MethodFamily method_family(std::string_view method_id);

/// Throws InvalidParam for unknown methods, unknown params, or out-of-range values.
void validate_method_spec(const MethodSpec &spec);

// Per-channel learned state of each built-in method.
namespace state {
struct Naive {
	double last = 0.0;
};
struct Mean {
	double mean = 0.0;
};
struct Drift {
	double last = 0.0;
	double slope = 0.0;
};
struct SeasonalNaive {
	std::vector<double> last_cycle; // the final `period` observations
};
struct Ses {
	double level = 0.0;
};
struct Holt {
	double level = 0.0;
	double trend = 0.0;
};
struct HoltWinters {
	double level = 0.0;
	double trend = 0.0;
	/// season[i] applies to the step i+1 ahead (mod period); empty when no
	/// usable period, in which case the model is plain Holt.
	std::vector<double> season;
};
struct Theta {
	double intercept = 0.0; // linear trend on t = 0..n-1
	double slope = 0.0;
	double level = 0.0; // ses level
	std::size_t n = 0;
};
struct Ar {
	double intercept = 0.0;
	std::vector<double> coef; // coef[k] multiplies x_{t-1-k}
	std::vector<double> tail; // most recent p observations, oldest first
	bool ridge = false;
};
struct LinearTrend {
	double intercept = 0.0;
	double slope = 0.0;
	std::size_t n = 0;
};
} // namespace state

using ChannelState = std::variant<state::Naive, state::Mean, state::Drift, state::SeasonalNaive, state::Ses, state::Holt,
                                  state::HoltWinters, state::Theta, state::Ar, state::LinearTrend>;

/// Result of fit(). Built-ins hold one state per channel; external methods
/// keep the (lookback-capped) history and re-run the plugin at predict time.
struct FittedModel {
	MethodSpec spec;
	std::size_t train_length = 0;
	std::size_t channels = 0;
	std::vector<ChannelState> states;
	Matrix external_history;
	/// Effective parameters after defaults/auto-detection (e.g. period, p).
	std::map<std::string, double> resolved;
	/// Set when a normal-equations fit fell back to ridge regularization.
	bool ridge_fallback = false;
};

struct Forecast {
	Matrix values; // horizon x channels
	std::size_t origin_index = 0;
	std::size_t horizon = 0;
};

/// Fits each channel independently (external methods: stores history).
/// Errors: InsufficientHistory, InvalidParam.
FittedModel fit(const MethodSpec &spec, const Matrix &history);

/// Deterministic multi-step forecast. Errors: InvalidHorizon, plugin errors.
Forecast predict(const FittedModel &model, std::size_t horizon);

/// Minimum history length `fit` accepts for `spec` on `n_available` points.
std::size_t min_history(const MethodSpec &spec);

nlohmann::json model_to_json(const FittedModel &model);
FittedModel model_from_json(const nlohmann::json &j);

void to_json(nlohmann::json &j, const MethodSpec &spec);
void from_json(const nlohmann::json &j, MethodSpec &spec);

/// Default plugin wall-clock timeout.
inline constexpr std::chrono::milliseconds kDefaultPluginTimeout{60'000};

} // namespace easytime
