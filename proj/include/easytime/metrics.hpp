#pragma once

#include "easytime/matrix.hpp"

#include <array>
#include <string_view>

namespace easytime {

inline constexpr std::array<std::string_view, 6> kMetricNames = {"mae", "mse", "rmse", "mape", "smape", "mase"};

bool is_metric(std::string_view name);

/// Lower-is-better error metric over all h*c cells of `y` vs `yhat`.
///
///  - mape averages 100*|y-yhat|/|y| over cells with |y| >= 1e-8 and throws
///    AllTermsExcluded when none qualify.
///  - smape averages 100*2|y-yhat|/(|y|+|yhat|), a 0/0 cell counting as 0.
///  - mase divides mae by the in-sample seasonal-naive MAE of
///    `train_context` at `seasonal_period`; throws ZeroScale below 1e-12 and
///    InsufficientContext unless the context is longer than the period.
///
/// Throws UnknownMetric, ShapeMismatch.
double compute_metric(std::string_view name, const Matrix &y, const Matrix &yhat, const Matrix &train_context = {},
                      std::size_t seasonal_period = 1);

} // namespace easytime
