#pragma once

#include "easytime/evaluation.hpp"
#include "easytime/features.hpp"
#include "easytime/forecasters.hpp"
#include "easytime/synthetic.hpp"

#include <json.hpp>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace easytime::automl {

struct MetaRow {
	features::RepresentationVector representation{};
	std::map<std::string, double> errors; // method_id -> error
};

struct MetaDataset {
	std::vector<MetaRow> rows;
	std::vector<std::string> method_ids;
};

/// Row-major N x M distribution over methods.
struct SoftLabelMatrix {
	std::size_t rows = 0;
	std::size_t cols = 0;
	std::vector<double> q;

	double operator()(std::size_t i, std::size_t m) const { return q[i * cols + m]; }
};

/// Per row: z = (e - mean(e)) / std(e) (population std; z = 0 when all errors
/// tie), q = softmax(-z / temperature).
SoftLabelMatrix build_soft_labels(const MetaDataset &meta, double temperature);

struct TrainHyper {
	double temperature = 1.0;
	double l2 = 1e-4;
	double lr = 0.1;
	int epochs = 500;
};

struct TrainMeta {
	double temperature = 1.0;
	double l2 = 1e-4;
	int epochs = 500;
	double lr = 0.1;
	double final_loss = 0.0;
	std::vector<double> loss_history;
};

/// Linear softmax classifier over the 16-entry representation (the last
/// entry is the constant bias input).
struct ClassifierModel {
	std::vector<std::string> method_ids;
	/// M x 16, row-major.
	std::vector<double> weights;
	TrainMeta train_meta;
	std::string representation_version{features::kRepresentationVersion};

	std::size_t n_methods() const noexcept { return method_ids.size(); }
	std::vector<double> probabilities(const features::RepresentationVector &x) const;
};

/// Objective minimized by train_classifier:
///   J(W) = (1/N) * sum_i CE(q_i, softmax(W x_i)) + l2 * ||W||^2 / (2N)
/// i.e. the mean of the per-sample terms whose gradients are (p - q) x^T + l2 W / N.
double classifier_loss(const MetaDataset &meta, const SoftLabelMatrix &labels, const std::vector<double> &weights,
                       double l2);
std::vector<double> classifier_gradient(const MetaDataset &meta, const SoftLabelMatrix &labels,
                                        const std::vector<double> &weights, double l2);

/// Full-batch gradient descent from W = 0. Throws NonFiniteLoss.
ClassifierModel train_classifier(const MetaDataset &meta, const TrainHyper &hyper = {});

nlohmann::json classifier_to_json(const ClassifierModel &model);
/// Throws RepresentationMismatch when the artifact's representation_version
/// differs from the features module, InvalidModel when malformed.
ClassifierModel classifier_from_json(const nlohmann::json &j);
void save_classifier(const ClassifierModel &model, const std::filesystem::path &path);
ClassifierModel load_classifier(const std::filesystem::path &path);

struct RankedMethod {
	std::string method_id;
	double probability = 0.0;
};

struct Recommendation {
	std::vector<RankedMethod> ranked; // full ranking, descending
	std::size_t k = 0;                // ranked[0, k) is the top-k
	CharacteristicVector characteristics;
};

/// Full descending ranking of softmax(W * representation(values)); ties
/// broken by method id. Throws InvalidParam unless 1 <= k <= M.
Recommendation recommend(const ClassifierModel &model, const Matrix &values, std::size_t k);
Recommendation recommend(const ClassifierModel &model, const TimeSeries &series, std::size_t k);

/// Euclidean projection onto {w >= 0, sum w = 1} by sort-and-threshold.
std::vector<double> project_simplex(const std::vector<double> &v);

/// f(w) = ||A^T w - y||^2 / L for A given as k rows of length L.
double ensemble_objective(const std::vector<std::vector<double>> &member_forecasts, const std::vector<double> &target,
                          const std::vector<double> &w);

/// Projected gradient descent over the simplex starting from the best single
/// member's vertex, halving the step on non-decrease; the result is never
/// worse than the best vertex. Throws NonFiniteInput.
std::vector<double> fit_ensemble_weights(const std::vector<std::vector<double>> &member_forecasts,
                                         const std::vector<double> &target);

struct EnsembleMember {
	MethodSpec spec;
	FittedModel model; // refit on train + validation
	double validation_loss = 0.0;
};

struct EnsembleModel {
	std::vector<EnsembleMember> members;
	std::vector<double> weights;
	double validation_loss = 0.0;
	Recommendation recommendation;
	std::vector<std::string> warnings;
	EvalConfig config;
};

/// Recommends top-k on the train+validation prefix, scores each candidate
/// over the validation windows, fits convex weights on the stacked
/// validation targets and refits members on train+validation. Candidates
/// that fail are dropped with a warning. Throws AllCandidatesFailed.
EnsembleModel build_ensemble(const TimeSeries &series, const ClassifierModel &model, std::size_t k,
                             const EvalConfig &config, const ProgressFn &progress = {});

/// Weighted combination of the members, each refit at every forecast origin.
Predictor ensemble_predictor(const EnsembleModel &ensemble);

nlohmann::json ensemble_to_json(const EnsembleModel &ensemble);

struct PretrainResult {
	ClassifierModel model;
	MetaDataset meta;
	std::size_t failed_cells = 0;
	std::size_t dropped_rows = 0;
};

/// Validation-segment errors (metric = config.metrics[0]) of every method on
/// every series, penalty-imputed at 2x the row's worst error for failures,
/// then soft labels and classifier training. Throws EmptyCorpus.
PretrainResult pretrain_offline(const std::vector<TimeSeries> &corpus, const std::vector<MethodSpec> &methods,
                                const EvalConfig &config, const TrainHyper &hyper = {}, std::size_t workers = 0);

/// Method ids considered appropriate for a synthetic regime.
const std::vector<std::string> &regime_family(Regime regime);

} // namespace easytime::automl
