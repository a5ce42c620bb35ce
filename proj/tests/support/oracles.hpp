#pragma once

// Straightforward re-implementations used as test oracles. They follow the
// textbook definitions cell by cell and share no code with the library.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace oracle {

using Grid = std::vector<std::vector<double>>; // rows x channels

inline double mean_over(const Grid &y, const Grid &yhat, double (*term)(double, double)) {
	double sum = 0.0;
	std::size_t count = 0;
	for (std::size_t r = 0; r < y.size(); ++r) {
		for (std::size_t c = 0; c < y[r].size(); ++c) {
			sum += term(y[r][c], yhat[r][c]);
			++count;
		}
	}
	return sum / static_cast<double>(count);
}

inline double mae(const Grid &y, const Grid &yhat) {
	return mean_over(y, yhat, [](double a, double b) { return std::fabs(a - b); });
}

inline double mse(const Grid &y, const Grid &yhat) {
	return mean_over(y, yhat, [](double a, double b) { return (a - b) * (a - b); });
}

inline double rmse(const Grid &y, const Grid &yhat) {
	return std::sqrt(mse(y, yhat));
}

/// nullopt when every |y| < 1e-8.
inline std::optional<double> mape(const Grid &y, const Grid &yhat) {
	double sum = 0.0;
	std::size_t used = 0;
	for (std::size_t r = 0; r < y.size(); ++r) {
		for (std::size_t c = 0; c < y[r].size(); ++c) {
			if (std::fabs(y[r][c]) >= 1e-8) {
				sum += std::fabs(y[r][c] - yhat[r][c]) / std::fabs(y[r][c]);
				++used;
			}
		}
	}
	if (used == 0) {
		return std::nullopt;
	}
	return 100.0 * sum / static_cast<double>(used);
}

inline double smape(const Grid &y, const Grid &yhat) {
	return 100.0 * mean_over(y, yhat, [](double a, double b) {
		       const double den = std::fabs(a) + std::fabs(b);
		       return den == 0.0 ? 0.0 : 2.0 * std::fabs(a - b) / den;
	       });
}

/// nullopt when the seasonal-naive scale is below 1e-12.
inline std::optional<double> mase(const Grid &y, const Grid &yhat, const Grid &context, std::size_t m) {
	double scale = 0.0;
	std::size_t count = 0;
	for (std::size_t t = m; t < context.size(); ++t) {
		for (std::size_t c = 0; c < context[t].size(); ++c) {
			scale += std::fabs(context[t][c] - context[t - m][c]);
			++count;
		}
	}
	scale /= static_cast<double>(count);
	if (scale < 1e-12) {
		return std::nullopt;
	}
	return mae(y, yhat) / scale;
}

/// Every forecast origin in [test_start, n), found by testing each index.
inline std::vector<std::size_t> window_origins(std::size_t n, std::size_t test_start, std::size_t horizon,
                                               std::size_t stride, bool rolling, bool partial) {
	std::vector<std::size_t> out;
	std::optional<std::size_t> leftover;
	for (std::size_t o = test_start; o < n; ++o) {
		const bool on_grid = rolling ? (o - test_start) % stride == 0 : o == test_start;
		if (!on_grid) {
			continue;
		}
		if (o + horizon <= n) {
			out.push_back(o);
		} else if (!leftover) {
			leftover = o;
		}
	}
	if (partial && leftover) {
		out.push_back(*leftover);
	}
	return out;
}

/// Simplex projection by brute force: minimizes ||w - v||^2 over a grid of
/// step `step` on the k <= 3 simplex, then polishes along the best face.
inline std::vector<double> grid_projection(const std::vector<double> &v, double step = 1e-3) {
	const std::size_t k = v.size();
	auto dist = [&](const std::vector<double> &w) {
		double d = 0.0;
		for (std::size_t i = 0; i < k; ++i) {
			d += (w[i] - v[i]) * (w[i] - v[i]);
		}
		return d;
	};
	std::vector<double> best(k, 0.0);
	double best_d = std::numeric_limits<double>::infinity();
	const auto steps = static_cast<int>(std::lround(1.0 / step));
	if (k == 1) {
		return {1.0};
	}
	if (k == 2) {
		for (int i = 0; i <= steps; ++i) {
			std::vector<double> w{i * step, 1.0 - i * step};
			if (const double d = dist(w); d < best_d) {
				best_d = d;
				best = w;
			}
		}
		return best;
	}
	if (k != 3) {
		throw std::invalid_argument("grid_projection supports k <= 3");
	}
	for (int i = 0; i <= steps; ++i) {
		for (int j = 0; i + j <= steps; ++j) {
			std::vector<double> w{i * step, j * step, 1.0 - (i + j) * step};
			if (const double d = dist(w); d < best_d) {
				best_d = d;
				best = w;
			}
		}
	}
	return best;
}

/// f(w) = ||A^T w - y||^2 / L
inline double mixture_loss(const std::vector<std::vector<double>> &a, const std::vector<double> &y,
                           const std::vector<double> &w) {
	double sum = 0.0;
	for (std::size_t t = 0; t < y.size(); ++t) {
		double pred = 0.0;
		for (std::size_t i = 0; i < a.size(); ++i) {
			pred += w[i] * a[i][t];
		}
		sum += (pred - y[t]) * (pred - y[t]);
	}
	return sum / static_cast<double>(y.size());
}

/// Central finite-difference gradient of `f` at `x`.
template <class F>
std::vector<double> numeric_gradient(F f, std::vector<double> x, double eps = 1e-5) {
	std::vector<double> g(x.size());
	for (std::size_t i = 0; i < x.size(); ++i) {
		const double keep = x[i];
		x[i] = keep + eps;
		const double up = f(x);
		x[i] = keep - eps;
		const double down = f(x);
		x[i] = keep;
		g[i] = (up - down) / (2.0 * eps);
	}
	return g;
}

} // namespace oracle
