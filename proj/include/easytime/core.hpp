#pragma once

#include "easytime/matrix.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace easytime {

/// How the timestamp column was written, so serialization reproduces it.
enum class TimeFormat { index, date, datetime };

/// Timestamped multichannel series. Timestamps are integer indices or seconds
/// since the Unix epoch (UTC) depending on `time_format`.
struct TimeSeries {
	std::string id;
	std::vector<std::int64_t> timestamps;
	TimeFormat time_format = TimeFormat::index;
	Matrix values;
	std::optional<std::string> frequency;
	std::vector<std::string> channel_names;

	std::size_t length() const noexcept { return values.rows(); }
	std::size_t channels() const noexcept { return values.cols(); }
};

/// Throws InvalidSeries unless n >= 1, c >= 1, timestamps strictly increase
/// and every value is finite.
void validate_series(const TimeSeries &series);

/// Builds a series with integer timestamps 0..n-1 and channel names "v0", "v1", ...
TimeSeries make_series(std::string id, Matrix values);

/// Mean over channels at each time point.
std::vector<double> channel_mean(const Matrix &values);

// ---------------------------------------------------------------------------
// Splitting

struct SplitSpec {
	double train_ratio = 0.7;
	double val_ratio = 0.1;
	double test_ratio = 0.2;
};

/// Half-open index range [begin, end).
struct IndexRange {
	std::size_t begin = 0;
	std::size_t end = 0;

	std::size_t size() const noexcept { return end - begin; }
	friend bool operator==(const IndexRange &, const IndexRange &) = default;
};

struct SplitRanges {
	IndexRange train;
	IndexRange val;
	IndexRange test;
};

void validate_split_spec(const SplitSpec &spec);

/// Chronological train/val/test partition with boundaries at floor(n*train)
/// and floor(n*(train+val)). Throws DegenerateSplit when a segment is empty.
SplitRanges split(std::size_t n, const SplitSpec &spec);

// ---------------------------------------------------------------------------
// Normalization

enum class NormalizationKind { zscore, none };

struct NormalizerState {
	NormalizationKind kind = NormalizationKind::none;
	std::vector<double> mean;
	std::vector<double> std;
};

/// Population mean/std per channel. Throws ZeroVariance if any std < 1e-12.
NormalizerState normalize_fit(const Matrix &train, NormalizationKind kind = NormalizationKind::zscore);
Matrix normalize_apply(const NormalizerState &state, const Matrix &x);
Matrix normalize_invert(const NormalizerState &state, const Matrix &x);

// ---------------------------------------------------------------------------
// Dataset metadata

/// Six [0,1] descriptors of a series plus the detected seasonal period.
struct CharacteristicVector {
	double seasonality = 0.0;
	double trend = 0.0;
	double transition = 0.0;
	double shifting = 0.0;
	double stationarity = 0.0;
	double correlation = 0.0;
	int detected_period = 0;
};

inline constexpr const char *kDomainTags[] = {"traffic", "electricity", "energy", "environment", "nature",
                                              "economic", "stock", "banking", "health", "web"};

struct DatasetMeta {
	std::string dataset_id;
	std::string name;
	std::string domain = "user";
	int n_channels = 0;
	int length = 0;
	std::optional<std::string> frequency;
	CharacteristicVector characteristics;
};

// ---------------------------------------------------------------------------
// CSV ingestion

enum class ImputePolicy { reject, linear };

struct CsvOptions {
	ImputePolicy impute = ImputePolicy::reject;
	std::string id = "dataset";
};

/// Parses the dataset CSV format: header row, first column "t" holding an
/// integer index or an ISO-8601 date/datetime, remaining columns channels.
/// Empty cells and "nan"/"na"/"null" are missing values.
TimeSeries parse_dataset_csv(std::string_view text, const CsvOptions &options = {});

/// Canonical serialization; parse_dataset_csv(serialize_dataset_csv(s)) == s.
std::string serialize_dataset_csv(const TimeSeries &series);

/// Shortest round-trip decimal representation of a double.
std::string format_double(double value);

/// Renders a timestamp the way the dataset CSV writes it.
std::string format_timestamp(std::int64_t value, TimeFormat format);

} // namespace easytime
