#include "easytime/metrics.hpp"

#include "easytime/error.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>

namespace easytime {

namespace {

constexpr double kMapeFloor = 1e-8;
constexpr double kScaleFloor = 1e-12;

double mean_abs_error(const Matrix &y, const Matrix &yhat) {
	double sum = 0.0;
	const auto &a = y.data();
	const auto &b = yhat.data();
	for (std::size_t i = 0; i < a.size(); ++i) {
		sum += std::abs(a[i] - b[i]);
	}
	return sum / static_cast<double>(a.size());
}

double mean_sq_error(const Matrix &y, const Matrix &yhat) {
	double sum = 0.0;
	const auto &a = y.data();
	const auto &b = yhat.data();
	for (std::size_t i = 0; i < a.size(); ++i) {
		const double d = a[i] - b[i];
		sum += d * d;
	}
	return sum / static_cast<double>(a.size());
}

double seasonal_naive_scale(const Matrix &context, std::size_t m) {
	if (m == 0) {
		fail("InvalidParam", "mase seasonal period must be >= 1");
	}
	if (context.rows() <= m) {
		fail("InsufficientContext",
		     fmt::format("mase needs more than {} in-sample points, got {}", m, context.rows()));
	}
	double sum = 0.0;
	std::size_t count = 0;
	for (std::size_t t = m; t < context.rows(); ++t) {
		for (std::size_t c = 0; c < context.cols(); ++c) {
			sum += std::abs(context(t, c) - context(t - m, c));
			++count;
		}
	}
	return sum / static_cast<double>(count);
}

} // namespace

bool is_metric(std::string_view name) {
	return std::find(kMetricNames.begin(), kMetricNames.end(), name) != kMetricNames.end();
}

double compute_metric(std::string_view name, const Matrix &y, const Matrix &yhat, const Matrix &train_context,
                      std::size_t seasonal_period) {
	if (!is_metric(name)) {
		fail("UnknownMetric", fmt::format("unknown metric '{}'", name));
	}
	if (y.rows() != yhat.rows() || y.cols() != yhat.cols() || y.empty()) {
		fail("ShapeMismatch", fmt::format("metric '{}' needs equal non-empty shapes, got {}x{} vs {}x{}", name, y.rows(),
		                                  y.cols(), yhat.rows(), yhat.cols()));
	}
	if (name == "mae") {
		return mean_abs_error(y, yhat);
	}
	if (name == "mse") {
		return mean_sq_error(y, yhat);
	}
	if (name == "rmse") {
		return std::sqrt(mean_sq_error(y, yhat));
	}
	const auto &a = y.data();
	const auto &b = yhat.data();
	if (name == "mape") {
		double sum = 0.0;
		std::size_t count = 0;
		for (std::size_t i = 0; i < a.size(); ++i) {
			if (std::abs(a[i]) >= kMapeFloor) {
				sum += std::abs(a[i] - b[i]) / std::abs(a[i]);
				++count;
			}
		}
		if (count == 0) {
			fail("AllTermsExcluded", "mape is undefined: every actual value is ~0");
		}
		return 100.0 * sum / static_cast<double>(count);
	}
	if (name == "smape") {
		double sum = 0.0;
		for (std::size_t i = 0; i < a.size(); ++i) {
			const double denom = std::abs(a[i]) + std::abs(b[i]);
			if (denom > 0.0) {
				sum += 2.0 * std::abs(a[i] - b[i]) / denom;
			}
		}
		return 100.0 * sum / static_cast<double>(a.size());
	}
	// mase
	const double scale = seasonal_naive_scale(train_context, seasonal_period);
	if (scale < kScaleFloor) {
		fail("ZeroScale", "mase is undefined: in-sample seasonal-naive MAE is ~0");
	}
	return mean_abs_error(y, yhat) / scale;
}

} // namespace easytime
