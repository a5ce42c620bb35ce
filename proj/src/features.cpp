#include "easytime/features.hpp"

#include "easytime/error.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <limits>

namespace easytime::features {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double mean_of(std::span<const double> x) {
	double s = 0.0;
	for (double v : x) {
		s += v;
	}
	return x.empty() ? 0.0 : s / static_cast<double>(x.size());
}

double variance_of(std::span<const double> x) {
	if (x.empty()) {
		return 0.0;
	}
	const double m = mean_of(x);
	double ss = 0.0;
	for (double v : x) {
		ss += (v - m) * (v - m);
	}
	return ss / static_cast<double>(x.size());
}

double clamp01(double v) {
	return std::clamp(v, 0.0, 1.0);
}

void require_length(std::size_t n, std::size_t min, const char *what) {
	if (n < min) {
		fail("SeriesTooShort", fmt::format("{} needs at least {} points, got {}", what, min, n));
	}
}

std::size_t odd_floor(std::size_t k) {
	if (k <= 1) {
		return 1;
	}
	return k % 2 == 1 ? k : k - 1;
}

/// 1 - Var(remainder)/Var(component + remainder), clipped to [0,1]; 0 when
/// the denominator is negligible relative to the series variance.
double strength(std::span<const double> remainder, std::span<const double> combined, double series_var) {
	const double den = variance_of(combined);
	if (den <= 0.0 || den <= kThresholds.variance_eps * series_var) {
		return 0.0;
	}
	return clamp01(1.0 - variance_of(remainder) / den);
}

double pearson(const std::vector<double> &a, const std::vector<double> &b) {
	const double ma = mean_of(a);
	const double mb = mean_of(b);
	double sab = 0.0, saa = 0.0, sbb = 0.0;
	for (std::size_t i = 0; i < a.size(); ++i) {
		sab += (a[i] - ma) * (b[i] - mb);
		saa += (a[i] - ma) * (a[i] - ma);
		sbb += (b[i] - mb) * (b[i] - mb);
	}
	if (saa <= 0.0 || sbb <= 0.0) {
		return 0.0;
	}
	return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

CharacteristicVector characteristics_of(const Matrix &values) {
	const auto n = values.rows();
	require_length(n, kMinCharacteristicLength, "characteristics");
	const auto x = channel_mean(values);
	const double var_x = variance_of(x);

	CharacteristicVector out;
	out.detected_period = detect_period(x);
	const auto dec = decompose(x, out.detected_period);

	std::vector<double> rem, trend_rem, season_rem;
	for (std::size_t t = dec.valid_begin; t < dec.valid_end; ++t) {
		rem.push_back(dec.remainder[t]);
		trend_rem.push_back(dec.trend[t] + dec.remainder[t]);
		season_rem.push_back(dec.seasonal[t] + dec.remainder[t]);
	}
	out.trend = strength(rem, trend_rem, var_x);
	out.seasonality = out.detected_period >= 2 ? strength(rem, season_rem, var_x) : 0.0;
	out.stationarity = clamp01(1.0 - std::max(0.0, autocorrelation(x, 1)));

	const double sd = std::sqrt(var_x);
	const auto half = n / 2;
	const double first = mean_of(std::span<const double>(x).subspan(0, half));
	const double second = mean_of(std::span<const double>(x).subspan(half));
	const double s = std::abs(second - first) / (sd + kThresholds.std_eps);
	out.shifting = clamp01(s / (1.0 + s));

	// Excursions of the standardized CUSUM beyond +-factor*sqrt(n); each entry
	// into an exceedance region of a new sign counts once.
	std::size_t crossings = 0;
	if (sd > kThresholds.std_eps) {
		const double threshold = kThresholds.cusum_factor * std::sqrt(static_cast<double>(n));
		const double m = mean_of(x);
		double cusum = 0.0;
		int previous = 0;
		for (double v : x) {
			cusum += (v - m) / sd;
			const int state = cusum > threshold ? 1 : (cusum < -threshold ? -1 : 0);
			if (state != 0 && state != previous) {
				++crossings;
			}
			previous = state;
		}
	}
	const double k = static_cast<double>(crossings);
	out.transition = clamp01(k / (1.0 + k));

	const auto c = values.cols();
	if (c > 1) {
		std::vector<std::vector<double>> cols;
		for (std::size_t j = 0; j < c; ++j) {
			cols.push_back(values.col(j));
		}
		double sum = 0.0;
		std::size_t pairs = 0;
		for (std::size_t a = 0; a < c; ++a) {
			for (std::size_t b = a + 1; b < c; ++b) {
				sum += std::abs(pearson(cols[a], cols[b]));
				++pairs;
			}
		}
		out.correlation = clamp01(sum / static_cast<double>(pairs));
	}
	return out;
}

} // namespace

double autocorrelation(std::span<const double> x, std::size_t lag) {
	const auto n = x.size();
	if (lag >= n) {
		return 0.0;
	}
	const double m = mean_of(x);
	double den = 0.0;
	for (double v : x) {
		den += (v - m) * (v - m);
	}
	// Zero variance up to rounding (e.g. a constant series whose mean is inexact).
	if (den <= 1e-24 * static_cast<double>(n) * (1.0 + m * m)) {
		return 0.0;
	}
	double num = 0.0;
	for (std::size_t t = 0; t + lag < n; ++t) {
		num += (x[t] - m) * (x[t + lag] - m);
	}
	return num / den;
}

int detect_period(std::span<const double> x) {
	const auto n = x.size();
	require_length(n, 8, "detect_period");
	const std::size_t max_lag = std::min(n / 2, kThresholds.max_period_lag);
	std::vector<double> r(max_lag + 2, 0.0);
	for (std::size_t lag = 1; lag <= max_lag + 1 && lag < n; ++lag) {
		r[lag] = autocorrelation(x, lag);
	}
	int best = 0;
	double best_r = -std::numeric_limits<double>::infinity();
	for (std::size_t lag = 2; lag <= max_lag; ++lag) {
		const bool local_max = r[lag] > r[lag - 1] && r[lag] >= r[lag + 1];
		if (local_max && r[lag] > best_r) {
			best_r = r[lag];
			best = static_cast<int>(lag);
		}
	}
	return best_r > kThresholds.acf_accept ? best : 0;
}

Decomposition decompose(std::span<const double> x, int period) {
	const auto n = x.size();
	require_length(n, 3, "decompose");
	if (period >= 2 && n < 2 * static_cast<std::size_t>(period)) {
		fail("SeriesTooShort", fmt::format("decompose with period {} needs {} points, got {}", period, 2 * period, n));
	}
	Decomposition out;
	out.trend.assign(n, kNaN);
	out.seasonal.assign(n, 0.0);
	out.remainder.assign(n, kNaN);

	const bool seasonal = period >= 2;
	const std::size_t m = seasonal ? static_cast<std::size_t>(period) : odd_floor(std::min<std::size_t>(11, n / 4));
	const std::size_t h = m / 2;
	out.valid_begin = h;
	out.valid_end = n - h;
	for (std::size_t t = h; t < n - h; ++t) {
		double sum = 0.0;
		if (m % 2 == 1) {
			for (std::size_t i = t - h; i <= t + h; ++i) {
				sum += x[i];
			}
		} else {
			// 2 x m moving average: half weight on both ends.
			sum = 0.5 * x[t - h] + 0.5 * x[t + h];
			for (std::size_t i = t - h + 1; i < t + h; ++i) {
				sum += x[i];
			}
		}
		out.trend[t] = sum / static_cast<double>(m);
	}

	if (seasonal) {
		std::vector<double> phase_sum(m, 0.0);
		std::vector<std::size_t> phase_count(m, 0);
		for (std::size_t t = out.valid_begin; t < out.valid_end; ++t) {
			phase_sum[t % m] += x[t] - out.trend[t];
			++phase_count[t % m];
		}
		std::vector<double> phase(m, 0.0);
		double centre = 0.0;
		for (std::size_t i = 0; i < m; ++i) {
			phase[i] = phase_count[i] > 0 ? phase_sum[i] / static_cast<double>(phase_count[i]) : 0.0;
			centre += phase[i];
		}
		centre /= static_cast<double>(m);
		for (std::size_t t = 0; t < n; ++t) {
			out.seasonal[t] = phase[t % m] - centre;
		}
	}
	for (std::size_t t = out.valid_begin; t < out.valid_end; ++t) {
		out.remainder[t] = x[t] - out.trend[t] - out.seasonal[t];
	}
	return out;
}

CharacteristicVector characteristics(const TimeSeries &series) {
	return characteristics_of(series.values);
}

RepresentationVector representation(const TimeSeries &series) {
	return representation(series.values);
}

RepresentationVector representation(const Matrix &values) {
	const auto n = values.rows();
	require_length(n, kMinCharacteristicLength, "representation");
	const auto ch = characteristics_of(values);
	const auto x = channel_mean(values);

	RepresentationVector v{};
	v[0] = ch.trend;
	v[1] = ch.seasonality;
	v[2] = ch.stationarity;
	v[3] = ch.shifting;
	v[4] = ch.transition;
	v[5] = ch.correlation;
	for (std::size_t lag = 1; lag <= 5; ++lag) {
		v[5 + lag] = (autocorrelation(x, lag) + 1.0) / 2.0;
	}
	std::vector<double> diff(n - 1);
	for (std::size_t t = 1; t < n; ++t) {
		diff[t - 1] = x[t] - x[t - 1];
	}
	v[11] = (autocorrelation(diff, 1) + 1.0) / 2.0;
	const double sd = std::sqrt(variance_of(x));
	const double cv = sd / (std::abs(mean_of(x)) + kThresholds.std_eps);
	v[12] = sd > 0.0 ? cv / (1.0 + cv) : 0.0;
	v[13] = clamp01(std::log10(static_cast<double>(n)) / 6.0);
	v[14] = static_cast<double>(ch.detected_period) / static_cast<double>(n);
	v[15] = 1.0;
	for (auto &e : v) {
		e = clamp01(e);
	}
	return v;
}

} // namespace easytime::features
