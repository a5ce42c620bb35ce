#include "easytime/core.hpp"
#include "easytime/error.hpp"
#include "easytime/synthetic.hpp"
#include "expect.hpp"

#include <cmath>
#include <gtest/gtest.h>
#include <limits>
#include <random>

using namespace easytime;

using fixtures::error_code;

TEST(Csv, ParsesMinimalFile) {
	const auto s = parse_dataset_csv("t,v\n1,1.0\n2,2.0");
	EXPECT_EQ(s.length(), 2u);
	EXPECT_EQ(s.channels(), 1u);
	EXPECT_DOUBLE_EQ(s.values(0, 0), 1.0);
	EXPECT_DOUBLE_EQ(s.values(1, 0), 2.0);
	EXPECT_EQ(s.channel_names, std::vector<std::string>{"v"});
}

TEST(Csv, RejectsDecreasingTimestamps) {
	EXPECT_EQ(error_code([] { parse_dataset_csv("t,v\n2,1.0\n1,2.0"); }), "NonMonotonicTimestamps");
}

TEST(Csv, LinearImputationFillsInteriorGap) {
	const auto s = parse_dataset_csv("t,v\n1,1.0\n2,\n3,3.0", CsvOptions{ImputePolicy::linear, "x"});
	ASSERT_EQ(s.length(), 3u);
	EXPECT_DOUBLE_EQ(s.values(1, 0), 2.0);
}

TEST(Csv, MissingValuesRejectedByDefault) {
	EXPECT_EQ(error_code([] { parse_dataset_csv("t,v\n1,1.0\n2,\n3,3.0"); }), "MissingValues");
}

TEST(Csv, LeadingGapIsRejectedEvenWithImputation) {
	EXPECT_EQ(error_code([] { parse_dataset_csv("t,v\n1,\n2,2\n3,3.0", CsvOptions{ImputePolicy::linear, "x"}); }),
	          "MissingValues");
}

TEST(Csv, MalformedInputs) {
	EXPECT_EQ(error_code([] { parse_dataset_csv("t,v\n1,1.0,5\n"); }), "MalformedCsv");
	EXPECT_EQ(error_code([] { parse_dataset_csv("x,v\n1,1.0\n"); }), "MalformedCsv");
	EXPECT_EQ(error_code([] { parse_dataset_csv("t,v\n1,abc\n"); }), "MalformedCsv");
	EXPECT_EQ(error_code([] { parse_dataset_csv("t,v\n"); }), "EmptySeries");
}

TEST(Csv, IsoDatesRoundTrip) {
	const std::string text = "t,a,b\n2024-01-01,1,2\n2024-01-02,3,4.5\n";
	const auto s = parse_dataset_csv(text);
	EXPECT_EQ(s.time_format, TimeFormat::date);
	EXPECT_EQ(s.timestamps[1] - s.timestamps[0], 86400);
	EXPECT_EQ(serialize_dataset_csv(s), text);
	EXPECT_EQ(format_timestamp(s.timestamps[0], s.time_format), "2024-01-01");
}

TEST(Csv, SerializeThenParseIsIdentity) {
	std::mt19937_64 rng(5);
	std::normal_distribution<double> noise(0.0, 100.0);
	for (int trial = 0; trial < 20; ++trial) {
		Matrix values(30, 3);
		for (auto &v : values.data()) {
			v = noise(rng);
		}
		auto s = make_series("rt", values);
		const auto back = parse_dataset_csv(serialize_dataset_csv(s), CsvOptions{ImputePolicy::reject, "rt"});
		EXPECT_EQ(back.values, s.values);
		EXPECT_EQ(back.timestamps, s.timestamps);
		EXPECT_EQ(back.channel_names, s.channel_names);
	}
}

TEST(Split, DocumentedBoundaries) {
	auto r = split(10, {});
	EXPECT_EQ(r.train, (IndexRange{0, 7}));
	EXPECT_EQ(r.val, (IndexRange{7, 8}));
	EXPECT_EQ(r.test, (IndexRange{8, 10}));
	r = split(100, {});
	EXPECT_EQ(r.train, (IndexRange{0, 70}));
	EXPECT_EQ(r.val, (IndexRange{70, 80}));
	EXPECT_EQ(r.test, (IndexRange{80, 100}));
	EXPECT_EQ(error_code([] { split(3, SplitSpec{0.98, 0.01, 0.01}); }), "DegenerateSplit");
}

TEST(Split, RangesPartitionTheSeries) {
	std::mt19937_64 rng(9);
	std::uniform_real_distribution<double> u(0.05, 0.9);
	for (std::size_t n = 3; n < 300; ++n) {
		const double a = u(rng);
		const double b = (1.0 - a) * u(rng);
		const SplitSpec spec{a, b, 1.0 - a - b};
		SplitRanges r;
		try {
			r = split(n, spec);
		} catch (const Error &e) {
			EXPECT_EQ(e.code(), "DegenerateSplit");
			continue;
		}
		EXPECT_EQ(r.train.begin, 0u);
		EXPECT_EQ(r.train.end, r.val.begin);
		EXPECT_EQ(r.val.end, r.test.begin);
		EXPECT_EQ(r.test.end, n);
		EXPECT_GT(r.train.size(), 0u);
		EXPECT_GT(r.val.size(), 0u);
		EXPECT_GT(r.test.size(), 0u);
	}
}

TEST(Split, InvalidRatiosRejected) {
	EXPECT_FALSE(error_code([] { validate_split_spec(SplitSpec{0.5, 0.3, 0.3}); }).empty());
	EXPECT_FALSE(error_code([] { validate_split_spec(SplitSpec{1.0, 0.0, 0.0}); }).empty());
}

TEST(Normalize, ZScoreExample) {
	const auto state = normalize_fit(Matrix::column({1, 3}));
	EXPECT_DOUBLE_EQ(state.mean[0], 2.0);
	EXPECT_DOUBLE_EQ(state.std[0], 1.0);
	EXPECT_DOUBLE_EQ(normalize_apply(state, Matrix::column({2}))(0, 0), 0.0);
}

TEST(Normalize, ConstantChannelIsZeroVariance) {
	EXPECT_EQ(error_code([] { normalize_fit(Matrix::column({5, 5})); }), "ZeroVariance");
}

TEST(Normalize, RoundTripIsIdentity) {
	std::mt19937_64 rng(1);
	std::normal_distribution<double> d(3.0, 50.0);
	for (int trial = 0; trial < 50; ++trial) {
		Matrix x(40, 4);
		for (auto &v : x.data()) {
			v = d(rng);
		}
		const auto state = normalize_fit(x.slice_rows(0, 20));
		const auto back = normalize_invert(state, normalize_apply(state, x));
		for (std::size_t i = 0; i < x.data().size(); ++i) {
			EXPECT_NEAR(back.data()[i], x.data()[i], 1e-9);
		}
	}
}

TEST(Synthetic, PureLine) {
	SyntheticSpec spec;
	spec.length = 4;
	spec.trend_slope = 1.0;
	const auto s = generate_synthetic(spec, 0);
	for (int t = 0; t < 4; ++t) {
		EXPECT_DOUBLE_EQ(s.values(static_cast<std::size_t>(t), 0), t);
	}
}

TEST(Synthetic, PureSine) {
	SyntheticSpec spec;
	spec.length = 8;
	spec.period = 4;
	spec.season_amp = 1.0;
	const auto s = generate_synthetic(spec, 0);
	const double expected[] = {0, 1, 0, -1, 0, 1, 0, -1};
	for (std::size_t t = 0; t < 8; ++t) {
		EXPECT_NEAR(s.values(t, 0), expected[t], 1e-12);
	}
}

TEST(Synthetic, PureFunctionOfSpecAndSeed) {
	SyntheticSpec spec;
	spec.length = 100;
	spec.noise_sd = 1.0;
	spec.channels = 3;
	spec.cross_corr = 0.5;
	const auto a = generate_synthetic(spec, 77);
	const auto b = generate_synthetic(spec, 77);
	const auto c = generate_synthetic(spec, 78);
	EXPECT_EQ(a.values, b.values);
	EXPECT_NE(a.values, c.values);
}

TEST(Synthetic, InvalidSpecs) {
	SyntheticSpec bad;
	bad.length = 0;
	EXPECT_EQ(error_code([&] { validate_synthetic_spec(bad); }), "InvalidSpec");
	bad = {};
	bad.season_amp = -1.0;
	EXPECT_EQ(error_code([&] { validate_synthetic_spec(bad); }), "InvalidSpec");
	bad = {};
	bad.length = 10;
	bad.period = 6;
	EXPECT_EQ(error_code([&] { validate_synthetic_spec(bad); }), "InvalidSpec");
}

TEST(Series, ValidationCatchesNonFiniteValues) {
	EXPECT_EQ(error_code([] { make_series("x", Matrix::column({1, std::nan(""), 3})); }), "InvalidSeries");
	auto s = make_series("x", Matrix::column({1, 2, 3}));
	s.values(1, 0) = std::numeric_limits<double>::infinity();
	EXPECT_EQ(error_code([&] { validate_series(s); }), "InvalidSeries");
}
