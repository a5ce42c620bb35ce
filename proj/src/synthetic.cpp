#include "easytime/synthetic.hpp"

#include "easytime/error.hpp"

#include <cmath>
#include <fmt/format.h>
#include <numbers>

namespace easytime {

double NormalSampler::uniform() {
	// 53 random bits -> [0, 1)
	return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double NormalSampler::operator()() {
	if (spare_) {
		const double v = *spare_;
		spare_.reset();
		return v;
	}
	double u1 = 0.0;
	do {
		u1 = uniform();
	} while (u1 <= 0.0);
	const double u2 = uniform();
	const double radius = std::sqrt(-2.0 * std::log(u1));
	const double angle = 2.0 * std::numbers::pi * u2;
	spare_ = radius * std::sin(angle);
	return radius * std::cos(angle);
}

void validate_synthetic_spec(const SyntheticSpec &spec) {
	if (spec.length <= 0) {
		fail("InvalidSpec", fmt::format("length must be positive, got {}", spec.length));
	}
	if (spec.period < 0) {
		fail("InvalidSpec", "period must be >= 0");
	}
	if (spec.period > 0 && spec.length < 2 * spec.period) {
		fail("InvalidSpec", fmt::format("length {} < 2*period {}", spec.length, spec.period));
	}
	if (spec.season_amp < 0.0 || spec.noise_sd < 0.0) {
		fail("InvalidSpec", "amplitudes must be non-negative");
	}
	if (spec.channels < 1) {
		fail("InvalidSpec", "channels must be >= 1");
	}
	if (spec.cross_corr < 0.0 || spec.cross_corr > 1.0) {
		fail("InvalidSpec", "cross_corr must lie in [0,1]");
	}
	if (spec.level_shift_at && (*spec.level_shift_at < 0 || *spec.level_shift_at >= spec.length)) {
		fail("InvalidSpec", "level_shift_at outside the series");
	}
	if (std::abs(spec.noise_ar) > 1.0) {
		fail("InvalidSpec", "noise_ar must lie in [-1,1]");
	}
}

TimeSeries generate_synthetic(const SyntheticSpec &spec, std::uint64_t seed, std::string id) {
	validate_synthetic_spec(spec);
	const auto n = static_cast<std::size_t>(spec.length);
	const auto c = static_cast<std::size_t>(spec.channels);
	NormalSampler normal(seed);
	const double shared_w = std::sqrt(spec.cross_corr);
	const double own_w = std::sqrt(1.0 - spec.cross_corr);

	Matrix values(n, c);
	std::vector<double> ar_state(c, 0.0);
	for (std::size_t t = 0; t < n; ++t) {
		const double td = static_cast<double>(t);
		double base = spec.level + spec.trend_slope * td;
		if (spec.period > 0) {
			base += spec.season_amp * std::sin(2.0 * std::numbers::pi * td / spec.period);
		}
		if (spec.level_shift_at && static_cast<int>(t) >= *spec.level_shift_at) {
			base += spec.shift_size;
		}
		// Draw order is fixed (shared first, then channels) for determinism.
		const double shared = spec.noise_sd > 0.0 ? normal() : 0.0;
		for (std::size_t j = 0; j < c; ++j) {
			double innovation = 0.0;
			if (spec.noise_sd > 0.0) {
				innovation = spec.noise_sd * (shared_w * shared + own_w * normal());
			}
			ar_state[j] = spec.noise_ar * ar_state[j] + innovation;
			values(t, j) = base + ar_state[j];
		}
	}
	return make_series(std::move(id), std::move(values));
}

void to_json(nlohmann::json &j, const SyntheticSpec &spec) {
	j = nlohmann::json{{"length", spec.length},         {"period", spec.period},     {"trend_slope", spec.trend_slope},
	                   {"season_amp", spec.season_amp}, {"noise_sd", spec.noise_sd}, {"shift_size", spec.shift_size},
	                   {"channels", spec.channels},     {"cross_corr", spec.cross_corr}, {"level", spec.level},
	                   {"noise_ar", spec.noise_ar}};
	if (spec.level_shift_at) {
		j["level_shift_at"] = *spec.level_shift_at;
	}
}

void from_json(const nlohmann::json &j, SyntheticSpec &spec) {
	if (!j.is_object()) {
		fail("InvalidSpec", "synthetic spec must be a JSON object");
	}
	auto number = [&](const char *key, double &out) {
		if (auto it = j.find(key); it != j.end()) {
			if (!it->is_number()) {
				fail("InvalidSpec", fmt::format("'{}' must be a number", key));
			}
			out = it->get<double>();
		}
	};
	auto integer = [&](const char *key, int &out) {
		if (auto it = j.find(key); it != j.end()) {
			if (!it->is_number_integer()) {
				fail("InvalidSpec", fmt::format("'{}' must be an integer", key));
			}
			out = it->get<int>();
		}
	};
	static const std::vector<std::string> known = {"length",     "period",   "trend_slope", "season_amp",
	                                               "noise_sd",   "level_shift_at", "shift_size", "channels",
	                                               "cross_corr", "level",    "noise_ar"};
	for (const auto &[key, _] : j.items()) {
		if (std::find(known.begin(), known.end(), key) == known.end()) {
			fail("InvalidSpec", fmt::format("unknown synthetic spec key '{}'", key));
		}
	}
	integer("length", spec.length);
	integer("period", spec.period);
	number("trend_slope", spec.trend_slope);
	number("season_amp", spec.season_amp);
	number("noise_sd", spec.noise_sd);
	number("shift_size", spec.shift_size);
	integer("channels", spec.channels);
	number("cross_corr", spec.cross_corr);
	number("level", spec.level);
	number("noise_ar", spec.noise_ar);
	if (auto it = j.find("level_shift_at"); it != j.end() && !it->is_null()) {
		int at = 0;
		integer("level_shift_at", at);
		spec.level_shift_at = at;
	}
}

const char *regime_name(Regime regime) {
	switch (regime) {
	case Regime::seasonal:
		return "seasonal";
	case Regime::trend:
		return "trend";
	case Regime::stationary_noise:
		return "stationary_noise";
	case Regime::random_walk:
		return "random_walk";
	case Regime::seasonal_trend:
		return "seasonal_trend";
	}
	return "unknown";
}

std::vector<RegimeSeries> regime_corpus(std::size_t count, std::uint64_t seed, int length, const std::string &prefix) {
	NormalSampler draw(seed);
	auto between = [&](double lo, double hi) { return lo + (hi - lo) * draw.uniform(); };
	static constexpr int kPeriods[] = {7, 12, 24};
	constexpr auto n_regimes = std::size(kAllRegimes);

	std::vector<RegimeSeries> out;
	out.reserve(count);
	for (std::size_t i = 0; i < count; ++i) {
		const Regime regime = kAllRegimes[i % n_regimes];
		SyntheticSpec spec;
		spec.length = length;
		spec.level = between(20.0, 60.0);
		const double sign = draw.uniform() < 0.5 ? -1.0 : 1.0;
		const int period = kPeriods[static_cast<std::size_t>(draw.uniform() * 3.0) % 3];
		switch (regime) {
		case Regime::seasonal:
			spec.period = period;
			spec.season_amp = between(3.0, 8.0);
			spec.noise_sd = between(0.2, 0.8);
			break;
		case Regime::trend:
			spec.trend_slope = sign * between(0.05, 0.2);
			spec.noise_sd = between(0.3, 1.0);
			break;
		case Regime::stationary_noise:
			spec.noise_sd = between(1.0, 3.0);
			break;
		case Regime::random_walk:
			spec.noise_sd = between(0.5, 1.5);
			spec.noise_ar = 1.0;
			break;
		case Regime::seasonal_trend:
			spec.period = period;
			spec.season_amp = between(3.0, 8.0);
			spec.trend_slope = sign * between(0.05, 0.2);
			spec.noise_sd = between(0.2, 0.8);
			break;
		}
		const auto series_seed = draw.engine()();
		auto series = generate_synthetic(spec, series_seed, fmt::format("{}-{:03d}-{}", prefix, i, regime_name(regime)));
		out.push_back(RegimeSeries{regime, spec, series_seed, std::move(series)});
	}
	return out;
}

} // namespace easytime
