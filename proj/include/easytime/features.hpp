#pragma once

#include "easytime/core.hpp"

#include <array>
#include <span>
#include <string_view>
#include <vector>

namespace easytime::features {

/// Every threshold and squash constant used by the characteristic scores and
/// by the Q&A qualitative filters.
struct Thresholds {
	double acf_accept = 0.1;        // minimum r(p) for a detected period
	std::size_t max_period_lag = 512;
	double cusum_factor = 1.5;      // exceedance when |S_k| > factor * sqrt(n)
	double std_eps = 1e-12;
	double strong = 0.6;            // "with trends", "strong seasonality"
	double weak = 0.4;              // "weak ...", "without ..."
	double variance_eps = 1e-12;
};
inline constexpr Thresholds kThresholds{};

inline constexpr std::string_view kRepresentationVersion = "stat16-v1";
inline constexpr std::size_t kRepresentationSize = 16;
using RepresentationVector = std::array<double, kRepresentationSize>;

/// Sample autocorrelation at `lag` (biased estimator, normalized by the lag-0
/// sum of squares). Zero-variance input yields 0.
double autocorrelation(std::span<const double> x, std::size_t lag);

/// Strongest local maximum of the ACF over lags [2, min(n/2, 512)], if its
/// value exceeds 0.1; 0 otherwise. Requires n >= 8 (SeriesTooShort).
int detect_period(std::span<const double> x);

struct Decomposition {
	std::vector<double> trend;
	std::vector<double> seasonal;
	std::vector<double> remainder;
	/// Points where the moving average is defined: [valid_begin, valid_end).
	std::size_t valid_begin = 0;
	std::size_t valid_end = 0;
};

/// Classical additive decomposition. period >= 2 uses a centered (2 x m for
/// even m) moving average; period 0/1 uses an odd window min(11, n/4) and S = 0.
Decomposition decompose(std::span<const double> x, int period);

/// Six characteristic scores of the channel-mean series (n >= 16).
CharacteristicVector characteristics(const TimeSeries &series);

/// The fixed 16-entry representation fed to the recommender (n >= 16).
RepresentationVector representation(const TimeSeries &series);
RepresentationVector representation(const Matrix &values);

inline constexpr std::size_t kMinCharacteristicLength = 16;

} // namespace easytime::features
