#include "easytime/core.hpp"

#include "easytime/error.hpp"

#include <cmath>
#include <fmt/format.h>

namespace easytime {

void validate_series(const TimeSeries &series) {
	const auto n = series.length();
	const auto c = series.channels();
	if (n == 0 || c == 0) {
		fail("EmptySeries", fmt::format("series '{}' has no data", series.id));
	}
	if (series.timestamps.size() != n) {
		fail("InvalidSeries", fmt::format("series '{}': {} timestamps for {} rows", series.id,
		                                  series.timestamps.size(), n));
	}
	if (!series.channel_names.empty() && series.channel_names.size() != c) {
		fail("InvalidSeries", fmt::format("series '{}': {} channel names for {} channels", series.id,
		                                  series.channel_names.size(), c));
	}
	for (std::size_t i = 1; i < n; ++i) {
		if (series.timestamps[i] <= series.timestamps[i - 1]) {
			fail("NonMonotonicTimestamps",
			     fmt::format("series '{}': timestamp at row {} does not increase", series.id, i));
		}
	}
	for (double v : series.values.data()) {
		if (!std::isfinite(v)) {
			fail("InvalidSeries", fmt::format("series '{}' contains non-finite values", series.id));
		}
	}
}

TimeSeries make_series(std::string id, Matrix values) {
	TimeSeries s;
	s.id = std::move(id);
	s.timestamps.resize(values.rows());
	for (std::size_t i = 0; i < values.rows(); ++i) {
		s.timestamps[i] = static_cast<std::int64_t>(i);
	}
	for (std::size_t j = 0; j < values.cols(); ++j) {
		s.channel_names.push_back(fmt::format("v{}", j));
	}
	s.values = std::move(values);
	validate_series(s);
	return s;
}

std::vector<double> channel_mean(const Matrix &values) {
	std::vector<double> out(values.rows(), 0.0);
	if (values.cols() == 0) {
		return out;
	}
	for (std::size_t r = 0; r < values.rows(); ++r) {
		double sum = 0.0;
		for (double v : values.row(r)) {
			sum += v;
		}
		out[r] = sum / static_cast<double>(values.cols());
	}
	return out;
}

void validate_split_spec(const SplitSpec &spec) {
	for (double r : {spec.train_ratio, spec.val_ratio, spec.test_ratio}) {
		if (!(r > 0.0 && r < 1.0)) {
			fail("InvalidSplit", fmt::format("split ratio {} outside (0,1)", r));
		}
	}
	const double total = spec.train_ratio + spec.val_ratio + spec.test_ratio;
	if (std::abs(total - 1.0) > 1e-9) {
		fail("InvalidSplit", fmt::format("split ratios sum to {}, expected 1", total));
	}
}

namespace {

// floor(n * ratio) with a tolerance so that cumulative ratios like 0.7 + 0.1
// (0.7999999999999999 in binary) land on the intended boundary.
std::size_t boundary(std::size_t n, double ratio) {
	return static_cast<std::size_t>(std::floor(static_cast<double>(n) * ratio + 1e-9));
}

} // namespace

SplitRanges split(std::size_t n, const SplitSpec &spec) {
	validate_split_spec(spec);
	const std::size_t a = std::min(n, boundary(n, spec.train_ratio));
	const std::size_t b = std::min(n, boundary(n, spec.train_ratio + spec.val_ratio));
	SplitRanges out{{0, a}, {a, b}, {b, n}};
	if (out.train.size() == 0 || out.val.size() == 0 || out.test.size() == 0) {
		fail("DegenerateSplit", fmt::format("split of n={} yields segments of sizes {}/{}/{}", n, out.train.size(),
		                                    out.val.size(), out.test.size()));
	}
	return out;
}

NormalizerState normalize_fit(const Matrix &train, NormalizationKind kind) {
	NormalizerState state;
	state.kind = kind;
	const auto c = train.cols();
	state.mean.assign(c, 0.0);
	state.std.assign(c, 1.0);
	if (kind == NormalizationKind::none) {
		return state;
	}
	if (train.rows() == 0) {
		fail("ZeroVariance", "cannot fit a normalizer on an empty segment");
	}
	const double n = static_cast<double>(train.rows());
	for (std::size_t j = 0; j < c; ++j) {
		double sum = 0.0;
		for (std::size_t i = 0; i < train.rows(); ++i) {
			sum += train(i, j);
		}
		const double mean = sum / n;
		double ss = 0.0;
		for (std::size_t i = 0; i < train.rows(); ++i) {
			const double d = train(i, j) - mean;
			ss += d * d;
		}
		const double sd = std::sqrt(ss / n);
		if (sd < 1e-12) {
			fail("ZeroVariance", fmt::format("channel {} has zero variance on the training segment", j));
		}
		state.mean[j] = mean;
		state.std[j] = sd;
	}
	return state;
}

Matrix normalize_apply(const NormalizerState &state, const Matrix &x) {
	if (state.kind == NormalizationKind::none) {
		return x;
	}
	Matrix out = x;
	for (std::size_t i = 0; i < x.rows(); ++i) {
		for (std::size_t j = 0; j < x.cols(); ++j) {
			out(i, j) = (x(i, j) - state.mean[j]) / state.std[j];
		}
	}
	return out;
}

Matrix normalize_invert(const NormalizerState &state, const Matrix &x) {
	if (state.kind == NormalizationKind::none) {
		return x;
	}
	Matrix out = x;
	for (std::size_t i = 0; i < x.rows(); ++i) {
		for (std::size_t j = 0; j < x.cols(); ++j) {
			out(i, j) = x(i, j) * state.std[j] + state.mean[j];
		}
	}
	return out;
}

} // namespace easytime
