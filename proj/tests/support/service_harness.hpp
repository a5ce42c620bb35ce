#pragma once

#include "easytime/automl.hpp"
#include "easytime/service.hpp"
#include "easytime/synthetic.hpp"
#include "fixtures.hpp"

#include <chrono>
#include <httplib.h>
#include <memory>
#include <thread>

namespace fixtures {

inline const std::vector<easytime::MethodSpec> &harness_methods() {
	static const std::vector<easytime::MethodSpec> methods{{"naive", {}, 0},         {"seasonal_naive", {}, 0},
	                                                       {"linear_trend", {}, 0},  {"mean", {}, 0},
	                                                       {"ses", {}, 0}};
	return methods;
}

inline easytime::EvalConfig harness_eval() {
	easytime::EvalConfig c;
	c.strategy = easytime::Strategy::rolling;
	c.horizon = 12;
	c.metrics = {"mase", "mae"};
	return c;
}

/// Period-12 seasonal series, the dataset every harness instance preloads.
inline easytime::TimeSeries seasonal_fixture(std::uint64_t seed = 3, const std::string &id = "seasonal-fixture") {
	easytime::SyntheticSpec s;
	s.length = 240;
	s.period = 12;
	s.season_amp = 5.0;
	s.noise_sd = 0.2;
	s.level = 10.0;
	return easytime::generate_synthetic(s, seed, id);
}

/// Small recommender over harness_methods(), trained on seasonal and trend
/// series.
inline easytime::automl::ClassifierModel harness_model() {
	std::vector<easytime::TimeSeries> corpus;
	for (int i = 0; i < 12; ++i) {
		corpus.push_back(seasonal_fixture(static_cast<std::uint64_t>(100 + i), "s" + std::to_string(i)));
		easytime::SyntheticSpec t;
		t.length = 240;
		t.trend_slope = 0.2 + 0.05 * i;
		t.noise_sd = 0.05;
		t.level = 1.0;
		corpus.push_back(easytime::generate_synthetic(t, static_cast<std::uint64_t>(200 + i), "t" + std::to_string(i)));
	}
	return easytime::automl::pretrain_offline(corpus, harness_methods(), harness_eval(), {}, 1).model;
}

/// A running service on a free port over the demo store, a freshly trained
/// model (unless `with_model` is false) and the seasonal fixture.
class ServiceHarness {
public:
	explicit ServiceHarness(bool with_model = true) {
		const auto db = dir_ / "results.db";
		build_demo_store(db);
		easytime::ServiceOptions options;
		options.port = 0;
		options.results_db = db;
		options.data_dir = dir_ / "uploads";
		options.workers = 2;
		options.default_eval = harness_eval();
		options.config_dir = asset("configs");
		if (with_model) {
			options.model = dir_ / "model.json";
			easytime::automl::save_classifier(harness_model(), options.model);
		}
		easytime::Dataset fixture;
		fixture.series = seasonal_fixture();
		fixture.name = "seasonal fixture";
		fixture.domain = "energy";
		options.datasets.push_back(std::move(fixture));
		service_ = std::make_unique<easytime::Service>(std::move(options));
		port_ = service_->start();
	}

	int port() const { return port_; }
	easytime::Service &service() { return *service_; }
	const TempDir &dir() const { return dir_; }

	std::unique_ptr<httplib::Client> client() const {
		auto c = std::make_unique<httplib::Client>("127.0.0.1", port_);
		c->set_read_timeout(std::chrono::seconds(120));
		c->set_write_timeout(std::chrono::seconds(120));
		return c;
	}

	/// Polls a job until it leaves queued/running; returns the last body.
	nlohmann::json wait_job(const std::string &job_id, std::chrono::seconds timeout = std::chrono::seconds(120)) const {
		auto c = client();
		const auto deadline = std::chrono::steady_clock::now() + timeout;
		nlohmann::json body;
		while (std::chrono::steady_clock::now() < deadline) {
			const auto res = c->Get("/api/jobs/" + job_id);
			if (!res) {
				break;
			}
			body = nlohmann::json::parse(res->body);
			if (body["status"] == "done" || body["status"] == "failed") {
				return body;
			}
			std::this_thread::sleep_for(std::chrono::milliseconds(20));
		}
		return body;
	}

private:
	TempDir dir_;
	std::unique_ptr<easytime::Service> service_;
	int port_ = 0;
};

} // namespace fixtures
