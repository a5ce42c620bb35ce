#include "easytime/automl.hpp"

#include "easytime/error.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <fstream>
#include <numeric>

namespace easytime::automl {

namespace {

constexpr std::size_t kDim = features::kRepresentationSize;

std::vector<double> softmax(std::vector<double> logits) {
	const double peak = *std::max_element(logits.begin(), logits.end());
	double sum = 0.0;
	for (auto &v : logits) {
		v = std::exp(v - peak);
		sum += v;
	}
	for (auto &v : logits) {
		v /= sum;
	}
	return logits;
}

std::vector<double> logits(const std::vector<double> &weights, std::size_t m_count,
                           const features::RepresentationVector &x) {
	std::vector<double> out(m_count, 0.0);
	for (std::size_t m = 0; m < m_count; ++m) {
		double s = 0.0;
		for (std::size_t d = 0; d < kDim; ++d) {
			s += weights[m * kDim + d] * x[d];
		}
		out[m] = s;
	}
	return out;
}

void check_meta(const MetaDataset &meta) {
	if (meta.method_ids.empty()) {
		fail("InvalidMeta", "meta-dataset has no methods");
	}
	for (const auto &row : meta.rows) {
		for (const auto &id : meta.method_ids) {
			auto it = row.errors.find(id);
			if (it == row.errors.end()) {
				fail("InvalidMeta", fmt::format("meta row lacks an error for '{}'", id));
			}
			if (!std::isfinite(it->second) || it->second < 0.0) {
				fail("InvalidMeta", fmt::format("error for '{}' must be finite and >= 0", id));
			}
		}
		for (double v : row.representation) {
			if (!std::isfinite(v)) {
				fail("InvalidMeta", "representation contains non-finite values");
			}
		}
	}
}

} // namespace

SoftLabelMatrix build_soft_labels(const MetaDataset &meta, double temperature) {
	if (!(temperature > 0.0)) {
		fail("InvalidParam", "temperature must be > 0");
	}
	check_meta(meta);
	const auto m_count = meta.method_ids.size();
	SoftLabelMatrix out{meta.rows.size(), m_count, std::vector<double>(meta.rows.size() * m_count)};
	for (std::size_t i = 0; i < meta.rows.size(); ++i) {
		std::vector<double> e(m_count);
		for (std::size_t m = 0; m < m_count; ++m) {
			e[m] = meta.rows[i].errors.at(meta.method_ids[m]);
		}
		const double mean = std::accumulate(e.begin(), e.end(), 0.0) / static_cast<double>(m_count);
		double ss = 0.0;
		for (double v : e) {
			ss += (v - mean) * (v - mean);
		}
		const double sd = std::sqrt(ss / static_cast<double>(m_count));
		std::vector<double> scaled(m_count, 0.0);
		if (sd > 0.0) {
			for (std::size_t m = 0; m < m_count; ++m) {
				scaled[m] = -((e[m] - mean) / sd) / temperature;
			}
		}
		const auto q = softmax(std::move(scaled));
		std::copy(q.begin(), q.end(), out.q.begin() + static_cast<std::ptrdiff_t>(i * m_count));
	}
	return out;
}

std::vector<double> ClassifierModel::probabilities(const features::RepresentationVector &x) const {
	return softmax(logits(weights, method_ids.size(), x));
}

double classifier_loss(const MetaDataset &meta, const SoftLabelMatrix &labels, const std::vector<double> &weights,
                       double l2) {
	const auto n = meta.rows.size();
	const auto m_count = meta.method_ids.size();
	double ce = 0.0;
	for (std::size_t i = 0; i < n; ++i) {
		const auto z = logits(weights, m_count, meta.rows[i].representation);
		const double peak = *std::max_element(z.begin(), z.end());
		double lse = 0.0;
		for (double v : z) {
			lse += std::exp(v - peak);
		}
		lse = peak + std::log(lse);
		for (std::size_t m = 0; m < m_count; ++m) {
			ce -= labels(i, m) * (z[m] - lse);
		}
	}
	double norm2 = 0.0;
	for (double w : weights) {
		norm2 += w * w;
	}
	const double dn = static_cast<double>(n);
	return ce / dn + l2 * norm2 / (2.0 * dn);
}

std::vector<double> classifier_gradient(const MetaDataset &meta, const SoftLabelMatrix &labels,
                                        const std::vector<double> &weights, double l2) {
	const auto n = meta.rows.size();
	const auto m_count = meta.method_ids.size();
	std::vector<double> grad(weights.size(), 0.0);
	for (std::size_t i = 0; i < n; ++i) {
		const auto &x = meta.rows[i].representation;
		const auto p = softmax(logits(weights, m_count, x));
		for (std::size_t m = 0; m < m_count; ++m) {
			const double r = p[m] - labels(i, m);
			for (std::size_t d = 0; d < kDim; ++d) {
				grad[m * kDim + d] += r * x[d];
			}
		}
	}
	const double dn = static_cast<double>(n);
	for (std::size_t k = 0; k < grad.size(); ++k) {
		grad[k] = grad[k] / dn + l2 * weights[k] / dn;
	}
	return grad;
}

ClassifierModel train_classifier(const MetaDataset &meta, const TrainHyper &hyper) {
	check_meta(meta);
	if (meta.rows.size() < meta.method_ids.size()) {
		fail("InsufficientMeta", fmt::format("need at least {} meta rows, got {}", meta.method_ids.size(),
		                                     meta.rows.size()));
	}
	{
		auto ids = meta.method_ids;
		std::sort(ids.begin(), ids.end());
		if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
			fail("InvalidMeta", "method ids must be distinct");
		}
	}
	if (hyper.epochs < 0 || !(hyper.lr > 0.0) || hyper.l2 < 0.0) {
		fail("InvalidParam", "epochs >= 0, lr > 0 and l2 >= 0 required");
	}
	const auto labels = build_soft_labels(meta, hyper.temperature);
	ClassifierModel model;
	model.method_ids = meta.method_ids;
	model.weights.assign(meta.method_ids.size() * kDim, 0.0);
	model.train_meta = TrainMeta{hyper.temperature, hyper.l2, hyper.epochs, hyper.lr, 0.0, {}};
	auto &history = model.train_meta.loss_history;
	history.push_back(classifier_loss(meta, labels, model.weights, hyper.l2));
	for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
		const auto grad = classifier_gradient(meta, labels, model.weights, hyper.l2);
		for (std::size_t k = 0; k < grad.size(); ++k) {
			model.weights[k] -= hyper.lr * grad[k];
		}
		const double loss = classifier_loss(meta, labels, model.weights, hyper.l2);
		if (!std::isfinite(loss)) {
			fail("NonFiniteLoss", fmt::format("loss became non-finite at epoch {} (previous {})", epoch, history.back()));
		}
		history.push_back(loss);
	}
	model.train_meta.final_loss = history.back();
	return model;
}

nlohmann::json classifier_to_json(const ClassifierModel &model) {
	const auto &tm = model.train_meta;
	return nlohmann::json{{"method_ids", model.method_ids},
	                      {"W", model.weights},
	                      {"train_meta",
	                       {{"temperature", tm.temperature},
	                        {"l2", tm.l2},
	                        {"epochs", tm.epochs},
	                        {"lr", tm.lr},
	                        {"final_loss", tm.final_loss}}},
	                      {"representation_version", model.representation_version}};
}

ClassifierModel classifier_from_json(const nlohmann::json &j) {
	ClassifierModel model;
	try {
		model.representation_version = j.at("representation_version").get<std::string>();
		model.method_ids = j.at("method_ids").get<std::vector<std::string>>();
		model.weights = j.at("W").get<std::vector<double>>();
		const auto &tm = j.at("train_meta");
		model.train_meta.temperature = tm.at("temperature").get<double>();
		model.train_meta.l2 = tm.at("l2").get<double>();
		model.train_meta.epochs = tm.at("epochs").get<int>();
		model.train_meta.lr = tm.at("lr").get<double>();
		model.train_meta.final_loss = tm.at("final_loss").get<double>();
	} catch (const nlohmann::json::exception &e) {
		fail("InvalidModel", fmt::format("malformed classifier artifact: {}", e.what()));
	}
	if (model.representation_version != features::kRepresentationVersion) {
		fail("RepresentationMismatch", fmt::format("model uses representation '{}', this build provides '{}'",
		                                           model.representation_version, features::kRepresentationVersion));
	}
	if (model.method_ids.empty() || model.weights.size() != model.method_ids.size() * kDim) {
		fail("InvalidModel", "weight matrix does not match method count x 16");
	}
	for (double w : model.weights) {
		if (!std::isfinite(w)) {
			fail("InvalidModel", "non-finite weight");
		}
	}
	return model;
}

void save_classifier(const ClassifierModel &model, const std::filesystem::path &path) {
	std::ofstream out(path);
	if (!out) {
		fail("IoError", fmt::format("cannot write model to '{}'", path.string()));
	}
	out << classifier_to_json(model).dump(1) << '\n';
}

ClassifierModel load_classifier(const std::filesystem::path &path) {
	std::ifstream in(path);
	if (!in) {
		fail("ModelUnavailable", fmt::format("cannot read model '{}'", path.string()));
	}
	nlohmann::json j;
	try {
		in >> j;
	} catch (const nlohmann::json::exception &e) {
		fail("InvalidModel", fmt::format("model '{}' is not JSON: {}", path.string(), e.what()));
	}
	return classifier_from_json(j);
}

Recommendation recommend(const ClassifierModel &model, const Matrix &values, std::size_t k) {
	if (k < 1 || k > model.n_methods()) {
		fail("InvalidParam", fmt::format("k must lie in [1, {}], got {}", model.n_methods(), k));
	}
	const auto x = features::representation(values);
	const auto p = model.probabilities(x);
	Recommendation rec;
	rec.k = k;
	for (std::size_t m = 0; m < p.size(); ++m) {
		rec.ranked.push_back(RankedMethod{model.method_ids[m], p[m]});
	}
	std::sort(rec.ranked.begin(), rec.ranked.end(), [](const RankedMethod &a, const RankedMethod &b) {
		if (a.probability != b.probability) {
			return a.probability > b.probability;
		}
		return a.method_id < b.method_id;
	});
	rec.characteristics = features::characteristics(make_series("recommend", values));
	return rec;
}

Recommendation recommend(const ClassifierModel &model, const TimeSeries &series, std::size_t k) {
	return recommend(model, series.values, k);
}

std::vector<double> project_simplex(const std::vector<double> &v) {
	if (v.empty()) {
		return {};
	}
	std::vector<double> u = v;
	std::sort(u.begin(), u.end(), std::greater<>());
	double cumulative = 0.0;
	double theta = 0.0;
	for (std::size_t j = 0; j < u.size(); ++j) {
		cumulative += u[j];
		const double candidate = (cumulative - 1.0) / static_cast<double>(j + 1);
		if (u[j] - candidate > 0.0) {
			theta = candidate;
		}
	}
	std::vector<double> w(v.size());
	for (std::size_t i = 0; i < v.size(); ++i) {
		w[i] = std::max(v[i] - theta, 0.0);
	}
	return w;
}

double ensemble_objective(const std::vector<std::vector<double>> &a, const std::vector<double> &y,
                          const std::vector<double> &w) {
	const auto len = y.size();
	double sum = 0.0;
	for (std::size_t t = 0; t < len; ++t) {
		double pred = 0.0;
		for (std::size_t i = 0; i < a.size(); ++i) {
			pred += w[i] * a[i][t];
		}
		const double r = pred - y[t];
		sum += r * r;
	}
	return sum / static_cast<double>(len);
}

std::vector<double> fit_ensemble_weights(const std::vector<std::vector<double>> &a, const std::vector<double> &y) {
	const auto k = a.size();
	const auto len = y.size();
	if (k == 0 || len == 0) {
		fail("InvalidParam", "need at least one member and one target value");
	}
	for (const auto &row : a) {
		if (row.size() != len) {
			fail("ShapeMismatch", "member forecast length differs from target length");
		}
		for (double v : row) {
			if (!std::isfinite(v)) {
				fail("NonFiniteInput", "member forecasts contain non-finite values");
			}
		}
	}
	for (double v : y) {
		if (!std::isfinite(v)) {
			fail("NonFiniteInput", "target contains non-finite values");
		}
	}
	if (k == 1) {
		return {1.0};
	}

	std::vector<double> w(k, 0.0);
	double best = std::numeric_limits<double>::infinity();
	std::size_t best_i = 0;
	for (std::size_t i = 0; i < k; ++i) {
		std::vector<double> vertex(k, 0.0);
		vertex[i] = 1.0;
		const double f = ensemble_objective(a, y, vertex);
		if (f < best) {
			best = f;
			best_i = i;
		}
	}
	w[best_i] = 1.0;
	double fw = best;

	// Step from the infinity-norm bound on the Hessian 2*A*A^T/L.
	double gram_inf = 0.0;
	for (std::size_t i = 0; i < k; ++i) {
		double row_sum = 0.0;
		for (std::size_t j = 0; j < k; ++j) {
			double dot = 0.0;
			for (std::size_t t = 0; t < len; ++t) {
				dot += a[i][t] * a[j][t];
			}
			row_sum += std::abs(dot);
		}
		gram_inf = std::max(gram_inf, row_sum);
	}
	double step = 1.0 / (2.0 * gram_inf / static_cast<double>(len) + 1e-12);

	for (int iter = 0; iter < 1000; ++iter) {
		std::vector<double> residual(len);
		for (std::size_t t = 0; t < len; ++t) {
			double pred = 0.0;
			for (std::size_t i = 0; i < k; ++i) {
				pred += w[i] * a[i][t];
			}
			residual[t] = pred - y[t];
		}
		std::vector<double> candidate(k);
		for (std::size_t i = 0; i < k; ++i) {
			double g = 0.0;
			for (std::size_t t = 0; t < len; ++t) {
				g += a[i][t] * residual[t];
			}
			candidate[i] = w[i] - step * 2.0 * g / static_cast<double>(len);
		}
		candidate = project_simplex(candidate);
		const double fc = ensemble_objective(a, y, candidate);
		if (fc < fw) {
			const double decrease = fw - fc;
			w = std::move(candidate);
			fw = fc;
			if (decrease < 1e-12) {
				break;
			}
		} else {
			step /= 2.0;
			if (step < 1e-30) {
				break;
			}
		}
	}
	return w;
}

namespace {

std::vector<double> flatten_windows(const std::vector<WindowForecast> &windows, bool forecast) {
	std::vector<double> out;
	for (const auto &w : windows) {
		const auto &m = forecast ? w.forecast : w.actual;
		out.insert(out.end(), m.data().begin(), m.data().end());
	}
	return out;
}

} // namespace

EnsembleModel build_ensemble(const TimeSeries &series, const ClassifierModel &model, std::size_t k,
                             const EvalConfig &config, const ProgressFn &progress) {
	validate_eval_config(config);
	const auto ranges = split(series.length(), config.split);
	const auto test_start = ranges.test.begin;

	EnsembleModel ensemble;
	ensemble.config = config;
	ensemble.recommendation = recommend(model, series.values.slice_rows(0, test_start), k);

	std::vector<std::vector<double>> member_forecasts;
	std::vector<double> target;
	for (std::size_t i = 0; i < k; ++i) {
		MethodSpec spec{ensemble.recommendation.ranked[i].method_id, {}, config.seed};
		try {
			const auto detail = evaluate_detailed(series, spec, config, Segment::validation);
			auto refit = fit_window(series, spec, config, test_start);
			member_forecasts.push_back(flatten_windows(detail.windows, true));
			if (target.empty()) {
				target = flatten_windows(detail.windows, false);
			}
			ensemble.members.push_back(EnsembleMember{spec, std::move(refit), 0.0});
		} catch (const Error &e) {
			ensemble.warnings.push_back(fmt::format("dropped candidate '{}': [{}] {}", spec.method_id, e.code(), e.what()));
		}
		if (progress) {
			progress(i + 1, k + 1);
		}
	}
	if (ensemble.members.empty()) {
		fail("AllCandidatesFailed", fmt::format("none of the top-{} candidates could be fitted on '{}'", k, series.id));
	}
	ensemble.weights = fit_ensemble_weights(member_forecasts, target);
	for (std::size_t i = 0; i < ensemble.members.size(); ++i) {
		std::vector<double> vertex(ensemble.members.size(), 0.0);
		vertex[i] = 1.0;
		ensemble.members[i].validation_loss = ensemble_objective(member_forecasts, target, vertex);
	}
	ensemble.validation_loss = ensemble_objective(member_forecasts, target, ensemble.weights);
	if (progress) {
		progress(k + 1, k + 1);
	}
	return ensemble;
}

Predictor ensemble_predictor(const EnsembleModel &ensemble) {
	return [members = ensemble.members, weights = ensemble.weights](const Matrix &history, std::size_t horizon) {
		Matrix out(horizon, history.cols(), 0.0);
		for (std::size_t i = 0; i < members.size(); ++i) {
			if (weights[i] == 0.0) {
				continue;
			}
			const auto f = predict(fit(members[i].spec, history), horizon).values;
			for (std::size_t c = 0; c < out.data().size(); ++c) {
				out.data()[c] += weights[i] * f.data()[c];
			}
		}
		return out;
	};
}

nlohmann::json ensemble_to_json(const EnsembleModel &ensemble) {
	nlohmann::json members = nlohmann::json::array();
	for (std::size_t i = 0; i < ensemble.members.size(); ++i) {
		const auto &m = ensemble.members[i];
		members.push_back({{"method_id", m.spec.method_id},
		                   {"weight", ensemble.weights[i]},
		                   {"validation_loss", m.validation_loss},
		                   {"model", model_to_json(m.model)}});
	}
	nlohmann::json ranked = nlohmann::json::array();
	for (const auto &r : ensemble.recommendation.ranked) {
		ranked.push_back({{"method_id", r.method_id}, {"probability", r.probability}});
	}
	return nlohmann::json{{"members", std::move(members)},
	                      {"weights", ensemble.weights},
	                      {"validation_loss", ensemble.validation_loss},
	                      {"ranked", std::move(ranked)},
	                      {"warnings", ensemble.warnings},
	                      {"config", ensemble.config}};
}

PretrainResult pretrain_offline(const std::vector<TimeSeries> &corpus, const std::vector<MethodSpec> &methods,
                                const EvalConfig &config, const TrainHyper &hyper, std::size_t workers) {
	if (corpus.empty()) {
		fail("EmptyCorpus", "pretraining needs a non-empty corpus");
	}
	if (methods.empty()) {
		fail("InvalidParam", "pretraining needs at least one method");
	}
	validate_eval_config(config);
	const auto &metric = config.metrics.front();
	const auto m_count = methods.size();
	std::vector<std::optional<double>> errors(corpus.size() * m_count);
	parallel_for(errors.size(), workers, [&](std::size_t cell) {
		const auto &series = corpus[cell / m_count];
		const auto &spec = methods[cell % m_count];
		try {
			const auto detail = evaluate_detailed(series, spec, config, Segment::validation);
			errors[cell] = detail.record.metric_values.at(metric);
		} catch (const Error &) {
			errors[cell] = std::nullopt;
		}
	});

	PretrainResult result;
	for (const auto &m : methods) {
		result.meta.method_ids.push_back(m.method_id);
	}
	for (std::size_t s = 0; s < corpus.size(); ++s) {
		double worst = -1.0;
		for (std::size_t m = 0; m < m_count; ++m) {
			if (const auto &e = errors[s * m_count + m]) {
				worst = std::max(worst, *e);
			} else {
				++result.failed_cells;
			}
		}
		if (worst < 0.0) {
			++result.dropped_rows;
			continue;
		}
		MetaRow row;
		try {
			const auto ranges = split(corpus[s].length(), config.split);
			row.representation = features::representation(corpus[s].values.slice_rows(0, ranges.test.begin));
		} catch (const Error &) {
			++result.dropped_rows;
			continue;
		}
		for (std::size_t m = 0; m < m_count; ++m) {
			const auto &e = errors[s * m_count + m];
			row.errors[methods[m].method_id] = e ? *e : 2.0 * worst;
		}
		result.meta.rows.push_back(std::move(row));
	}
	result.model = train_classifier(result.meta, hyper);
	return result;
}

const std::vector<std::string> &regime_family(Regime regime) {
	static const std::vector<std::string> seasonal = {"seasonal_naive", "holt_winters"};
	static const std::vector<std::string> trend = {"linear_trend", "drift", "holt", "theta"};
	static const std::vector<std::string> level = {"mean", "ses", "ar_ls"};
	static const std::vector<std::string> persistence = {"naive", "ses", "drift", "ar_ls"};
	switch (regime) {
	case Regime::seasonal:
	case Regime::seasonal_trend:
		return seasonal;
	case Regime::trend:
		return trend;
	case Regime::stationary_noise:
		return level;
	case Regime::random_walk:
		return persistence;
	}
	return level;
}

} // namespace easytime::automl
