#include "easytime/config.hpp"
#include "easytime/resultstore.hpp"

#include <fmt/format.h>
#include <fstream>
#include <ostream>

namespace easytime {

namespace {

void write_file(const std::filesystem::path &path, const std::string &text) {
	if (path.has_parent_path()) {
		std::filesystem::create_directories(path.parent_path());
	}
	std::ofstream out(path, std::ios::binary);
	if (!out) {
		fail("IoError", fmt::format("cannot write '{}'", path.string()));
	}
	out << text;
}

std::filesystem::path per_dataset_path(const std::filesystem::path &report) {
	auto p = report;
	p.replace_filename(report.stem().string() + "_per_dataset.csv");
	return p;
}

} // namespace

int run_one_click(const std::filesystem::path &config_path, std::ostream &log) {
	RunConfig config;
	std::vector<Dataset> corpus;
	try {
		config = load_config(config_path);
		corpus = load_datasets(config);
	} catch (const ConfigInvalid &e) {
		log << "error: " << e.what() << '\n';
		return 1;
	} catch (const Error &e) {
		log << fmt::format("error: [{}] {}\n", e.code(), e.what());
		return 1;
	}

	PipelineResult result;
	try {
		auto store = ResultStore::open(config.output.results_db);
		PipelineOptions options;
		options.workers = workers_from_env(config.workers);
		options.progress = [&log](std::size_t done, std::size_t total, const std::string &label) {
			log << fmt::format("[{}/{}] {}\n", done, total, label);
		};
		log << fmt::format("evaluating {} datasets x {} methods\n", corpus.size(), config.methods.size());
		result = run_pipeline(corpus, config.methods, config.eval, store, options);
		const auto report = build_report(config, result);
		write_file(config.output.report, report.markdown);
		write_file(per_dataset_path(config.output.report), report.per_dataset_csv);
	} catch (const Error &e) {
		log << fmt::format("error: [{}] {}\n", e.code(), e.what());
		return 1;
	} catch (const std::filesystem::filesystem_error &e) {
		log << fmt::format("error: [IoError] {}\n", e.what());
		return 1;
	}

	log << fmt::format("{} runs ok, {} failed; report written to {}\n", result.records.size(), result.failures.size(),
	                   config.output.report.string());
	for (const auto &f : result.failures) {
		log << fmt::format("failed: {} / {}: [{}] {}\n", f.dataset_id, f.method_key, f.code, f.message);
	}
	return result.failures.empty() ? 0 : 2;
}

} // namespace easytime
