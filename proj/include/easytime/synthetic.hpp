#pragma once

#include "easytime/core.hpp"

#include <json.hpp>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace easytime {

/// Parameters of the synthetic generator. Per channel:
///   x_t = level + trend_slope*t + season_amp*sin(2*pi*t/period) + e_t + shift_size*[t >= level_shift_at]
/// where e_t = noise_ar*e_{t-1} + u_t and u_t mixes a shared and a channel-own
/// N(0, noise_sd^2) draw with weights sqrt(cross_corr) and sqrt(1-cross_corr).
struct SyntheticSpec {
	int length = 240;
	int period = 0;
	double trend_slope = 0.0;
	double season_amp = 0.0;
	double noise_sd = 0.0;
	std::optional<int> level_shift_at;
	double shift_size = 0.0;
	int channels = 1;
	double cross_corr = 0.0;
	double level = 0.0;
	double noise_ar = 0.0;
};

void validate_synthetic_spec(const SyntheticSpec &spec);

/// Pure function of (spec, seed). Noise uses std::mt19937_64 seeded with
/// `seed` and the Box-Muller transform, so output is bit-identical across
/// platforms and standard libraries.
TimeSeries generate_synthetic(const SyntheticSpec &spec, std::uint64_t seed, std::string id = "synthetic");

/// Standard normal draws via Box-Muller over std::mt19937_64.
class NormalSampler {
public:
	explicit NormalSampler(std::uint64_t seed) : engine_(seed) {}
	double operator()();
	std::mt19937_64 &engine() { return engine_; }
	double uniform();

private:
	std::mt19937_64 engine_;
	std::optional<double> spare_;
};

void to_json(nlohmann::json &j, const SyntheticSpec &spec);
/// Throws InvalidSpec on unknown keys or wrong types.
void from_json(const nlohmann::json &j, SyntheticSpec &spec);

// ---------------------------------------------------------------------------
// Regime corpora used for meta-learning and its evaluation.

enum class Regime { seasonal, trend, stationary_noise, random_walk, seasonal_trend };

inline constexpr Regime kAllRegimes[] = {Regime::seasonal, Regime::trend, Regime::stationary_noise,
                                         Regime::random_walk, Regime::seasonal_trend};

const char *regime_name(Regime regime);

struct RegimeSeries {
	Regime regime;
	SyntheticSpec spec;
	std::uint64_t seed = 0;
	TimeSeries series;
};

/// `count` series cycling through the regimes, with parameters drawn from
/// per-regime ranges using `seed`. Series ids are "<prefix>-<index>-<regime>".
std::vector<RegimeSeries> regime_corpus(std::size_t count, std::uint64_t seed, int length = 240,
                                        const std::string &prefix = "regime");

} // namespace easytime
