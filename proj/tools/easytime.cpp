#include "easytime/automl.hpp"
#include "easytime/config.hpp"
#include "easytime/qa.hpp"
#include "easytime/resultstore.hpp"
#include "easytime/service.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <iostream>

namespace {

using namespace easytime;

int report_error(const Error &e) {
	std::cerr << fmt::format("error: [{}] {}\n", e.code(), e.what());
	return 1;
}

int pretrain(const std::filesystem::path &config_path, const std::filesystem::path &out) {
	try {
		const auto config = load_config(config_path);
		const auto corpus = pretrain_corpus(config.pretrain);
		std::cerr << fmt::format("pretraining on {} series x {} methods\n", corpus.size(), config.methods.size());
		const auto result = automl::pretrain_offline(corpus, config.methods, config.eval, config.pretrain.hyper,
		                                             workers_from_env(config.workers));
		automl::save_classifier(result.model, out);
		std::cerr << fmt::format("final loss {:.6f}; {} failed cells imputed, {} rows dropped; wrote {}\n",
		                         result.model.train_meta.final_loss, result.failed_cells, result.dropped_rows,
		                         out.string());
		return 0;
	} catch (const Error &e) {
		return report_error(e);
	}
}

int serve(const std::filesystem::path &config_path, std::optional<int> port) {
	try {
		const auto config = load_config(config_path);
		auto options = service_options(config, config_path.parent_path());
		if (port) {
			options.port = *port;
		}
		Service service(std::move(options));
		std::cerr << fmt::format("serving on {}:{}\n", config.service.host, port.value_or(config.service.port));
		service.run();
		return 0;
	} catch (const Error &e) {
		return report_error(e);
	}
}

std::string cell_text(const SqlValue &value) {
	if (std::holds_alternative<std::monostate>(value)) {
		return "NULL";
	}
	if (const auto *i = std::get_if<std::int64_t>(&value)) {
		return std::to_string(*i);
	}
	if (const auto *d = std::get_if<double>(&value)) {
		return format_double(*d);
	}
	return std::get<std::string>(value);
}

int ask(const std::filesystem::path &db, const std::string &question, bool as_json) {
	try {
		const auto store = ResultStore::open_existing(db);
		qa::SessionStore sessions;
		const auto reply = qa::answer(question, "cli", sessions, store, qa::TranslatorConfig::from_env());
		if (as_json) {
			std::cout << qa::to_json(reply).dump(2) << '\n';
			return 0;
		}
		std::cout << reply.text << '\n';
		for (const auto &n : reply.notices) {
			std::cout << "note: " << n << '\n';
		}
		if (!reply.sql.empty()) {
			std::cout << "\nSQL: " << reply.sql << "\n\n";
			std::cout << fmt::format("{}\n", fmt::join(reply.rows.columns, "\t"));
			for (const auto &row : reply.rows.rows) {
				std::vector<std::string> cells;
				for (const auto &v : row) {
					cells.push_back(cell_text(v));
				}
				std::cout << fmt::format("{}\n", fmt::join(cells, "\t"));
			}
		}
		return reply.help ? 2 : 0;
	} catch (const Error &e) {
		return report_error(e);
	}
}

int export_csv(const std::filesystem::path &db, const std::filesystem::path &dir) {
	try {
		const auto store = ResultStore::open_existing(db);
		store.export_csv(dir);
		std::cerr << fmt::format("exported {} to {}\n", db.string(), dir.string());
		return 0;
	} catch (const Error &e) {
		return report_error(e);
	}
}

} // namespace

int main(int argc, char **argv) {
	CLI::App app{"Time-series forecasting workbench"};
	app.require_subcommand(1);

	std::filesystem::path config_path;
	std::filesystem::path out_path;
	std::filesystem::path db_path;
	std::string question;
	bool as_json = false;
	std::optional<int> port;

	auto *run = app.add_subcommand("run", "Evaluate every dataset x method in a config and write a report");
	run->add_option("-c,--config", config_path, "Configuration JSON")->required();

	auto *pre = app.add_subcommand("pretrain", "Pretrain the method recommender and write the model JSON");
	pre->add_option("-c,--config", config_path, "Configuration JSON")->required();
	pre->add_option("-o,--output", out_path, "Model JSON to write")->required();

	auto *srv = app.add_subcommand("serve", "Start the HTTP API");
	srv->add_option("-c,--config", config_path, "Configuration JSON")->required();
	srv->add_option("-p,--port", port, "Override the listen port");

	auto *qa_cmd = app.add_subcommand("ask", "Answer a question about stored benchmark results");
	qa_cmd->add_option("-d,--db", db_path, "Results database")->required();
	qa_cmd->add_option("question", question, "Question text")->required();
	qa_cmd->add_flag("--json", as_json, "Print the full answer as JSON");

	auto *exp = app.add_subcommand("export", "Write every results table as CSV");
	exp->add_option("-d,--db", db_path, "Results database")->required();
	exp->add_option("-o,--output", out_path, "Output directory")->required();

	CLI11_PARSE(app, argc, argv);

	if (*run) {
		return run_one_click(config_path, std::cerr);
	}
	if (*pre) {
		return pretrain(config_path, out_path);
	}
	if (*srv) {
		return serve(config_path, port);
	}
	if (*qa_cmd) {
		return ask(db_path, question, as_json);
	}
	return export_csv(db_path, out_path);
}
