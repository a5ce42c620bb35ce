#pragma once

#include <cassert>
#include <cstddef>
#include <span>
#include <vector>

namespace easytime {

/// Dense row-major matrix of doubles. Rows are time points, columns are channels.
class Matrix {
public:
	Matrix() = default;
	Matrix(std::size_t rows, std::size_t cols, double fill = 0.0) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
	Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
	    : rows_(rows), cols_(cols), data_(std::move(data)) {
		assert(data_.size() == rows_ * cols_);
	}

	/// Single-channel column matrix.
	static Matrix column(std::vector<double> values) {
		const auto n = values.size();
		return Matrix(n, 1, std::move(values));
	}

	std::size_t rows() const noexcept { return rows_; }
	std::size_t cols() const noexcept { return cols_; }
	bool empty() const noexcept { return data_.empty(); }

	double &operator()(std::size_t r, std::size_t c) {
		assert(r < rows_ && c < cols_);
		return data_[r * cols_ + c];
	}
	double operator()(std::size_t r, std::size_t c) const {
		assert(r < rows_ && c < cols_);
		return data_[r * cols_ + c];
	}

	std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
	std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

	std::vector<double> col(std::size_t c) const {
		std::vector<double> out(rows_);
		for (std::size_t r = 0; r < rows_; ++r) {
			out[r] = (*this)(r, c);
		}
		return out;
	}

	void set_col(std::size_t c, std::span<const double> values) {
		assert(values.size() == rows_);
		for (std::size_t r = 0; r < rows_; ++r) {
			(*this)(r, c) = values[r];
		}
	}

	/// Copy of rows [begin, end).
	Matrix slice_rows(std::size_t begin, std::size_t end) const {
		assert(begin <= end && end <= rows_);
		return Matrix(end - begin, cols_,
		              std::vector<double>(data_.begin() + static_cast<std::ptrdiff_t>(begin * cols_),
		                                  data_.begin() + static_cast<std::ptrdiff_t>(end * cols_)));
	}

	const std::vector<double> &data() const noexcept { return data_; }
	std::vector<double> &data() noexcept { return data_; }

	friend bool operator==(const Matrix &, const Matrix &) = default;

private:
	std::size_t rows_ = 0;
	std::size_t cols_ = 0;
	std::vector<double> data_;
};

} // namespace easytime
