#include "easytime/forecasters.hpp"

#include "easytime/core.hpp"
#include "easytime/error.hpp"
#include "easytime/features.hpp"
#include "easytime/plugin.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fmt/format.h>

namespace easytime {

namespace {

constexpr double kRidgeLambda = 1e-6;
constexpr double kThetaAlpha = 0.3;

const std::vector<MethodInfo> kMethods = {
    {"naive", "Naive", MethodFamily::statistical, {}, "last observation carried forward"},
    {"mean", "Mean", MethodFamily::statistical, {}, "historical mean"},
    {"drift", "Drift", MethodFamily::statistical, {}, "last value plus average historical slope"},
    {"seasonal_naive", "Seasonal Naive", MethodFamily::statistical, {{"period", 0}},
     "value one season ago (period 0 = detect)"},
    {"ses", "SES", MethodFamily::statistical, {{"alpha", 0.3}}, "simple exponential smoothing"},
    {"holt", "Holt", MethodFamily::statistical, {{"alpha", 0.3}, {"beta", 0.1}}, "additive level + trend smoothing"},
    {"holt_winters",
     "Holt-Winters",
     MethodFamily::statistical,
     {{"alpha", 0.3}, {"beta", 0.1}, {"gamma", 0.1}, {"period", 0}},
     "additive level + trend + season smoothing (period 0 = detect)"},
    {"theta", "Theta", MethodFamily::statistical, {{"alpha", kThetaAlpha}},
     "average of linear trend and SES extrapolations"},
    {"ar_ls", "AR (least squares)", MethodFamily::ml, {{"p", 0}},
     "autoregression fit by least squares (p 0 = min(8, n/5))"},
    {"linear_trend", "Linear Trend", MethodFamily::ml, {}, "ordinary least squares on time"},
};

const MethodInfo *find_method(std::string_view id) {
	for (const auto &m : kMethods) {
		if (m.id == id) {
			return &m;
		}
	}
	return nullptr;
}

double param(const MethodSpec &spec, const std::string &name) {
	if (auto it = spec.params.find(name); it != spec.params.end()) {
		return it->second;
	}
	const auto *info = find_method(spec.method_id);
	return info->defaults.at(name);
}

bool is_integral(double v) {
	return std::isfinite(v) && std::floor(v) == v;
}

// ---------------------------------------------------------------------------
// Per-channel fitting

double last(std::span<const double> x) {
	return x.back();
}

double mean_of(std::span<const double> x) {
	double s = 0.0;
	for (double v : x) {
		s += v;
	}
	return s / static_cast<double>(x.size());
}

struct LineFit {
	double intercept = 0.0;
	double slope = 0.0;
};

LineFit fit_line(std::span<const double> x) {
	const auto n = x.size();
	const double t_mean = (static_cast<double>(n) - 1.0) / 2.0;
	const double x_mean = mean_of(x);
	double sxy = 0.0;
	double sxx = 0.0;
	for (std::size_t t = 0; t < n; ++t) {
		const double dt = static_cast<double>(t) - t_mean;
		sxy += dt * (x[t] - x_mean);
		sxx += dt * dt;
	}
	LineFit out;
	out.slope = sxx > 0.0 ? sxy / sxx : 0.0;
	out.intercept = x_mean - out.slope * t_mean;
	return out;
}

double ses_level(std::span<const double> x, double alpha) {
	double level = x.front();
	for (std::size_t t = 1; t < x.size(); ++t) {
		level = alpha * x[t] + (1.0 - alpha) * level;
	}
	return level;
}

state::Holt fit_holt(std::span<const double> x, double alpha, double beta) {
	state::Holt s;
	s.level = x[0];
	s.trend = x.size() > 1 ? x[1] - x[0] : 0.0;
	for (std::size_t t = 1; t < x.size(); ++t) {
		const double prev = s.level;
		s.level = alpha * x[t] + (1.0 - alpha) * (s.level + s.trend);
		s.trend = beta * (s.level - prev) + (1.0 - beta) * s.trend;
	}
	return s;
}

state::HoltWinters fit_holt_winters(std::span<const double> x, double alpha, double beta, double gamma, int period) {
	state::HoltWinters s;
	if (period < 2) {
		const auto h = fit_holt(x, alpha, beta);
		s.level = h.level;
		s.trend = h.trend;
		return s;
	}
	const auto m = static_cast<std::size_t>(period);
	const auto n = x.size();
	const double first = mean_of(x.subspan(0, m));
	const double second = mean_of(x.subspan(m, m));
	std::vector<double> season(m);
	for (std::size_t i = 0; i < m; ++i) {
		season[i] = x[i] - first;
	}
	double trend = (second - first) / static_cast<double>(m);
	// Level at t = m-1: the first-cycle mean sits at the cycle midpoint.
	double level = first + trend * (static_cast<double>(m) - 1.0) / 2.0;
	for (std::size_t t = m; t < n; ++t) {
		const double s_old = season[t % m];
		const double prev = level;
		level = alpha * (x[t] - s_old) + (1.0 - alpha) * (level + trend);
		trend = beta * (level - prev) + (1.0 - beta) * trend;
		season[t % m] = gamma * (x[t] - level) + (1.0 - gamma) * s_old;
	}
	s.level = level;
	s.trend = trend;
	s.season.resize(m);
	for (std::size_t i = 0; i < m; ++i) {
		s.season[i] = season[(n + i) % m];
	}
	return s;
}

state::Ar fit_ar(std::span<const double> x, std::size_t p) {
	const auto n = x.size();
	const auto rows = n - p;
	// Centering the lagged regressors and the target is equivalent to solving
	// the normal equations with an explicit intercept column.
	Eigen::MatrixXd design(rows, p);
	Eigen::VectorXd target(rows);
	for (std::size_t r = 0; r < rows; ++r) {
		const std::size_t t = r + p;
		target(static_cast<Eigen::Index>(r)) = x[t];
		for (std::size_t k = 0; k < p; ++k) {
			design(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = x[t - 1 - k];
		}
	}
	const Eigen::RowVectorXd col_mean = design.colwise().mean();
	const double target_mean = target.mean();
	const Eigen::MatrixXd centered = design.rowwise() - col_mean;
	const Eigen::VectorXd centered_target = target.array() - target_mean;
	Eigen::MatrixXd gram = centered.transpose() * centered;
	const Eigen::VectorXd rhs = centered.transpose() * centered_target;

	state::Ar s;
	Eigen::FullPivLU<Eigen::MatrixXd> lu(gram);
	lu.setThreshold(1e-10);
	Eigen::VectorXd phi;
	if (lu.rank() < static_cast<Eigen::Index>(p)) {
		gram.diagonal().array() += kRidgeLambda;
		phi = gram.ldlt().solve(rhs);
		s.ridge = true;
	} else {
		phi = lu.solve(rhs);
	}
	s.coef.assign(phi.data(), phi.data() + phi.size());
	s.intercept = target_mean - col_mean.dot(phi);
	s.tail.assign(x.end() - static_cast<std::ptrdiff_t>(p), x.end());
	return s;
}

// ---------------------------------------------------------------------------
// Per-channel prediction

struct ChannelPredictor {
	std::size_t horizon;

	std::vector<double> operator()(const state::Naive &s) const { return std::vector<double>(horizon, s.last); }
	std::vector<double> operator()(const state::Mean &s) const { return std::vector<double>(horizon, s.mean); }
	std::vector<double> operator()(const state::Drift &s) const {
		std::vector<double> out(horizon);
		for (std::size_t h = 1; h <= horizon; ++h) {
			out[h - 1] = s.last + static_cast<double>(h) * s.slope;
		}
		return out;
	}
	std::vector<double> operator()(const state::SeasonalNaive &s) const {
		// x_{n+h-m*ceil(h/m)}: position (h-1) mod m within the final cycle.
		const auto m = s.last_cycle.size();
		std::vector<double> out(horizon);
		for (std::size_t h = 1; h <= horizon; ++h) {
			out[h - 1] = s.last_cycle[(h - 1) % m];
		}
		return out;
	}
	std::vector<double> operator()(const state::Ses &s) const { return std::vector<double>(horizon, s.level); }
	std::vector<double> operator()(const state::Holt &s) const {
		std::vector<double> out(horizon);
		for (std::size_t h = 1; h <= horizon; ++h) {
			out[h - 1] = s.level + static_cast<double>(h) * s.trend;
		}
		return out;
	}
	std::vector<double> operator()(const state::HoltWinters &s) const {
		std::vector<double> out(horizon);
		for (std::size_t h = 1; h <= horizon; ++h) {
			double v = s.level + static_cast<double>(h) * s.trend;
			if (!s.season.empty()) {
				v += s.season[(h - 1) % s.season.size()];
			}
			out[h - 1] = v;
		}
		return out;
	}
	std::vector<double> operator()(const state::Theta &s) const {
		std::vector<double> out(horizon);
		for (std::size_t h = 1; h <= horizon; ++h) {
			const double t = static_cast<double>(s.n - 1 + h);
			out[h - 1] = 0.5 * (s.intercept + s.slope * t) + 0.5 * s.level;
		}
		return out;
	}
	std::vector<double> operator()(const state::Ar &s) const {
		const auto p = s.coef.size();
		std::vector<double> window = s.tail; // oldest first
		std::vector<double> out(horizon);
		for (std::size_t h = 0; h < horizon; ++h) {
			double v = s.intercept;
			for (std::size_t k = 0; k < p; ++k) {
				v += s.coef[k] * window[window.size() - 1 - k];
			}
			out[h] = v;
			window.push_back(v);
		}
		return out;
	}
	std::vector<double> operator()(const state::LinearTrend &s) const {
		std::vector<double> out(horizon);
		for (std::size_t h = 1; h <= horizon; ++h) {
			out[h - 1] = s.intercept + s.slope * static_cast<double>(s.n - 1 + h);
		}
		return out;
	}
};

int resolve_period(const MethodSpec &spec, const Matrix &history) {
	const double requested = param(spec, "period");
	if (requested > 0) {
		return static_cast<int>(requested);
	}
	if (history.rows() < 8) {
		return 0;
	}
	const auto mean_series = channel_mean(history);
	return features::detect_period(mean_series);
}

std::size_t resolve_ar_order(const MethodSpec &spec, std::size_t n) {
	const double requested = param(spec, "p");
	if (requested > 0) {
		return static_cast<std::size_t>(requested);
	}
	return std::max<std::size_t>(1, std::min<std::size_t>(8, n / 5));
}

[[noreturn]] void insufficient(const MethodSpec &spec, std::size_t n, std::size_t need) {
	fail("InsufficientHistory",
	     fmt::format("method '{}' needs at least {} observations, got {}", spec.method_id, need, n));
}

} // namespace

std::string MethodSpec::key() const {
	if (params.empty()) {
		return method_id;
	}
	std::string out = method_id + "(";
	bool first = true;
	for (const auto &[k, v] : params) {
		if (!first) {
			out += ",";
		}
		first = false;
		out += k + "=" + format_double(v);
	}
	return out + ")";
}

const char *family_name(MethodFamily family) {
	switch (family) {
	case MethodFamily::statistical:
		return "statistical";
	case MethodFamily::ml:
		return "ml";
	case MethodFamily::ensemble:
		return "ensemble";
	case MethodFamily::external:
		return "external";
	}
	return "statistical";
}

const std::vector<MethodInfo> &builtin_methods() {
	return kMethods;
}

std::vector<std::string> builtin_method_ids() {
	std::vector<std::string> out;
	for (const auto &m : kMethods) {
		out.emplace_back(m.id);
	}
	return out;
}

bool is_builtin(std::string_view method_id) {
	return find_method(method_id) != nullptr;
}

bool is_external(std::string_view method_id) {
	return method_id.starts_with("external:") && method_id.size() > 9;
}

MethodFamily method_family(std::string_view method_id) {
	if (const auto *m = find_method(method_id)) {
		return m->family;
	}
	if (is_external(method_id)) {
		return MethodFamily::external;
	}
	return MethodFamily::ensemble;
}

void validate_method_spec(const MethodSpec &spec) {
	if (is_external(spec.method_id)) {
		for (const auto &[k, v] : spec.params) {
			if (!std::isfinite(v)) {
				fail("InvalidParam", fmt::format("param '{}' must be finite", k));
			}
		}
		return;
	}
	const auto *info = find_method(spec.method_id);
	if (info == nullptr) {
		fail("InvalidParam", fmt::format("unknown method '{}'", spec.method_id));
	}
	for (const auto &[name, value] : spec.params) {
		if (!info->defaults.contains(name)) {
			fail("InvalidParam", fmt::format("method '{}' has no parameter '{}'", spec.method_id, name));
		}
		bool ok = std::isfinite(value);
		if (name == "alpha") {
			ok = ok && value > 0.0 && value <= 1.0;
		} else if (name == "beta" || name == "gamma") {
			ok = ok && value >= 0.0 && value <= 1.0;
		} else if (name == "period") {
			ok = ok && is_integral(value) && value >= 0.0 && value <= 10000.0;
		} else if (name == "p") {
			ok = ok && is_integral(value) && value >= 0.0 && value <= 64.0;
		}
		if (!ok) {
			fail("InvalidParam",
			     fmt::format("parameter '{}'={} out of range for '{}'", name, format_double(value), spec.method_id));
		}
	}
}

std::size_t min_history(const MethodSpec &spec) {
	const auto &id = spec.method_id;
	if (id == "drift" || id == "holt" || id == "linear_trend" || id == "theta") {
		return 2;
	}
	if (id == "seasonal_naive") {
		return std::max<std::size_t>(1, static_cast<std::size_t>(param(spec, "period")));
	}
	if (id == "holt_winters") {
		const auto m = static_cast<std::size_t>(param(spec, "period"));
		return m >= 2 ? 2 * m : 2;
	}
	if (id == "ar_ls") {
		const auto p = static_cast<std::size_t>(param(spec, "p"));
		return p > 0 ? 2 * p + 1 : 3;
	}
	return 1;
}

FittedModel fit(const MethodSpec &spec, const Matrix &history) {
	validate_method_spec(spec);
	const auto n = history.rows();
	const auto c = history.cols();
	if (c == 0) {
		fail("InsufficientHistory", "history has no channels");
	}
	FittedModel model;
	model.spec = spec;
	model.train_length = n;
	model.channels = c;
	if (n < min_history(spec)) {
		insufficient(spec, n, min_history(spec));
	}
	if (is_external(spec.method_id)) {
		model.external_history = history;
		return model;
	}

	const auto &id = spec.method_id;
	int period = 0;
	std::size_t ar_order = 0;
	if (id == "seasonal_naive" || id == "holt_winters") {
		period = resolve_period(spec, history);
		if (id == "seasonal_naive") {
			period = std::max(period, 1);
		} else if (period >= 2 && n < 2 * static_cast<std::size_t>(period)) {
			if (param(spec, "period") > 0) {
				insufficient(spec, n, 2 * static_cast<std::size_t>(period));
			}
			period = 0; // detected period too long for this history: plain Holt
		}
		model.resolved["period"] = period;
	}
	if (id == "ar_ls") {
		ar_order = resolve_ar_order(spec, n);
		if (n < 2 * ar_order + 1) {
			insufficient(spec, n, 2 * ar_order + 1);
		}
		model.resolved["p"] = static_cast<double>(ar_order);
	}
	for (const auto &[k, v] : find_method(id)->defaults) {
		if (!model.resolved.contains(k)) {
			model.resolved[k] = param(spec, k);
		}
	}

	for (std::size_t j = 0; j < c; ++j) {
		const std::vector<double> col = history.col(j);
		const std::span<const double> x(col);
		if (id == "naive") {
			model.states.emplace_back(state::Naive{last(x)});
		} else if (id == "mean") {
			model.states.emplace_back(state::Mean{mean_of(x)});
		} else if (id == "drift") {
			model.states.emplace_back(state::Drift{last(x), (x.back() - x.front()) / static_cast<double>(n - 1)});
		} else if (id == "seasonal_naive") {
			const auto m = static_cast<std::size_t>(period);
			model.states.emplace_back(state::SeasonalNaive{std::vector<double>(x.end() - static_cast<std::ptrdiff_t>(m), x.end())});
		} else if (id == "ses") {
			model.states.emplace_back(state::Ses{ses_level(x, param(spec, "alpha"))});
		} else if (id == "holt") {
			model.states.emplace_back(fit_holt(x, param(spec, "alpha"), param(spec, "beta")));
		} else if (id == "holt_winters") {
			model.states.emplace_back(
			    fit_holt_winters(x, param(spec, "alpha"), param(spec, "beta"), param(spec, "gamma"), period));
		} else if (id == "theta") {
			const auto line = fit_line(x);
			model.states.emplace_back(state::Theta{line.intercept, line.slope, ses_level(x, param(spec, "alpha")), n});
		} else if (id == "ar_ls") {
			auto s = fit_ar(x, ar_order);
			model.ridge_fallback = model.ridge_fallback || s.ridge;
			model.states.emplace_back(std::move(s));
		} else if (id == "linear_trend") {
			const auto line = fit_line(x);
			model.states.emplace_back(state::LinearTrend{line.intercept, line.slope, n});
		}
	}
	return model;
}

Forecast predict(const FittedModel &model, std::size_t horizon) {
	if (horizon == 0) {
		fail("InvalidHorizon", "horizon must be >= 1");
	}
	Forecast out;
	out.origin_index = model.train_length;
	out.horizon = horizon;
	if (is_external(model.spec.method_id)) {
		PluginRequest request{model.external_history, horizon, model.spec.params, model.spec.seed};
		auto timeout = kDefaultPluginTimeout;
		if (auto it = model.spec.params.find("timeout_ms"); it != model.spec.params.end()) {
			timeout = std::chrono::milliseconds(static_cast<long long>(it->second));
		}
		out.values = run_external_method(model.spec.method_id.substr(9), request, timeout);
		return out;
	}
	out.values = Matrix(horizon, model.channels);
	for (std::size_t j = 0; j < model.channels; ++j) {
		const auto path = std::visit(ChannelPredictor{horizon}, model.states[j]);
		out.values.set_col(j, path);
	}
	for (double v : out.values.data()) {
		if (!std::isfinite(v)) {
			fail("NonFiniteForecast", fmt::format("method '{}' produced a non-finite forecast", model.spec.method_id));
		}
	}
	return out;
}

// ---------------------------------------------------------------------------
// Serialization

void to_json(nlohmann::json &j, const MethodSpec &spec) {
	j = nlohmann::json{{"method_id", spec.method_id}, {"params", spec.params}, {"seed", spec.seed}};
}

void from_json(const nlohmann::json &j, MethodSpec &spec) {
	if (j.is_string()) {
		spec = MethodSpec{j.get<std::string>(), {}, 0};
		return;
	}
	spec.method_id = j.at("method_id").get<std::string>();
	spec.params = j.value("params", std::map<std::string, double>{});
	spec.seed = j.value("seed", std::uint64_t{0});
}

namespace {

struct StateWriter {
	nlohmann::json operator()(const state::Naive &s) const { return {{"last", s.last}}; }
	nlohmann::json operator()(const state::Mean &s) const { return {{"mean", s.mean}}; }
	nlohmann::json operator()(const state::Drift &s) const { return {{"last", s.last}, {"slope", s.slope}}; }
	nlohmann::json operator()(const state::SeasonalNaive &s) const { return {{"last_cycle", s.last_cycle}}; }
	nlohmann::json operator()(const state::Ses &s) const { return {{"level", s.level}}; }
	nlohmann::json operator()(const state::Holt &s) const { return {{"level", s.level}, {"trend", s.trend}}; }
	nlohmann::json operator()(const state::HoltWinters &s) const {
		return {{"level", s.level}, {"trend", s.trend}, {"season", s.season}};
	}
	nlohmann::json operator()(const state::Theta &s) const {
		return {{"intercept", s.intercept}, {"slope", s.slope}, {"level", s.level}, {"n", s.n}};
	}
	nlohmann::json operator()(const state::Ar &s) const {
		return {{"intercept", s.intercept}, {"coef", s.coef}, {"tail", s.tail}, {"ridge", s.ridge}};
	}
	nlohmann::json operator()(const state::LinearTrend &s) const {
		return {{"intercept", s.intercept}, {"slope", s.slope}, {"n", s.n}};
	}
};

ChannelState read_state(const std::string &id, const nlohmann::json &j) {
	if (id == "naive") {
		return state::Naive{j.at("last").get<double>()};
	}
	if (id == "mean") {
		return state::Mean{j.at("mean").get<double>()};
	}
	if (id == "drift") {
		return state::Drift{j.at("last").get<double>(), j.at("slope").get<double>()};
	}
	if (id == "seasonal_naive") {
		return state::SeasonalNaive{j.at("last_cycle").get<std::vector<double>>()};
	}
	if (id == "ses") {
		return state::Ses{j.at("level").get<double>()};
	}
	if (id == "holt") {
		return state::Holt{j.at("level").get<double>(), j.at("trend").get<double>()};
	}
	if (id == "holt_winters") {
		return state::HoltWinters{j.at("level").get<double>(), j.at("trend").get<double>(),
		                          j.at("season").get<std::vector<double>>()};
	}
	if (id == "theta") {
		return state::Theta{j.at("intercept").get<double>(), j.at("slope").get<double>(), j.at("level").get<double>(),
		                    j.at("n").get<std::size_t>()};
	}
	if (id == "ar_ls") {
		return state::Ar{j.at("intercept").get<double>(), j.at("coef").get<std::vector<double>>(),
		                 j.at("tail").get<std::vector<double>>(), j.at("ridge").get<bool>()};
	}
	if (id == "linear_trend") {
		return state::LinearTrend{j.at("intercept").get<double>(), j.at("slope").get<double>(),
		                          j.at("n").get<std::size_t>()};
	}
	fail("InvalidModel", fmt::format("unknown method '{}' in model JSON", id));
}

} // namespace

nlohmann::json model_to_json(const FittedModel &model) {
	nlohmann::json j;
	j["method_id"] = model.spec.method_id;
	j["params"] = model.spec.params;
	j["seed"] = model.spec.seed;
	j["train_length"] = model.train_length;
	j["channels"] = model.channels;
	j["resolved"] = model.resolved;
	j["ridge_fallback"] = model.ridge_fallback;
	auto &states = j["state"] = nlohmann::json::array();
	for (const auto &s : model.states) {
		states.push_back(std::visit(StateWriter{}, s));
	}
	if (is_external(model.spec.method_id)) {
		auto &hist = j["history"] = nlohmann::json::array();
		for (std::size_t r = 0; r < model.external_history.rows(); ++r) {
			const auto row = model.external_history.row(r);
			hist.push_back(std::vector<double>(row.begin(), row.end()));
		}
	}
	return j;
}

FittedModel model_from_json(const nlohmann::json &j) {
	try {
		FittedModel model;
		model.spec.method_id = j.at("method_id").get<std::string>();
		model.spec.params = j.at("params").get<std::map<std::string, double>>();
		model.spec.seed = j.at("seed").get<std::uint64_t>();
		model.train_length = j.at("train_length").get<std::size_t>();
		model.channels = j.at("channels").get<std::size_t>();
		model.resolved = j.value("resolved", std::map<std::string, double>{});
		model.ridge_fallback = j.value("ridge_fallback", false);
		if (is_external(model.spec.method_id)) {
			const auto &hist = j.at("history");
			model.external_history = Matrix(hist.size(), model.channels);
			for (std::size_t r = 0; r < hist.size(); ++r) {
				const auto row = hist[r].get<std::vector<double>>();
				if (row.size() != model.channels) {
					fail("InvalidModel", "history row width does not match channels");
				}
				std::copy(row.begin(), row.end(), model.external_history.row(r).begin());
			}
			return model;
		}
		for (const auto &s : j.at("state")) {
			model.states.push_back(read_state(model.spec.method_id, s));
		}
		if (model.states.size() != model.channels) {
			fail("InvalidModel", "state count does not match channels");
		}
		return model;
	} catch (const nlohmann::json::exception &e) {
		fail("InvalidModel", fmt::format("malformed model JSON: {}", e.what()));
	}
}

} // namespace easytime
