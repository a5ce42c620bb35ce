#pragma once

#include "easytime/config.hpp"
#include "easytime/resultstore.hpp"

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace fixtures {

inline std::filesystem::path source_dir() {
	return EASYTIME_SOURCE_DIR;
}

inline std::filesystem::path asset(const std::string &relative) {
	return source_dir() / "assets" / relative;
}

inline std::string echo_plugin() {
	return EASYTIME_ECHO_PLUGIN;
}

inline std::string faulty_plugin() {
	return EASYTIME_FAULTY_PLUGIN;
}

inline std::string cli() {
	return EASYTIME_CLI;
}

/// Fresh directory removed on destruction.
class TempDir {
public:
	TempDir() {
		std::random_device rd;
		path_ = std::filesystem::temp_directory_path() / ("easytime-test-" + std::to_string(rd()) + std::to_string(rd()));
		std::filesystem::create_directories(path_);
	}
	~TempDir() {
		std::error_code ec;
		std::filesystem::remove_all(path_, ec);
	}
	TempDir(const TempDir &) = delete;
	TempDir &operator=(const TempDir &) = delete;

	const std::filesystem::path &path() const { return path_; }
	std::filesystem::path operator/(const std::string &name) const { return path_ / name; }

private:
	std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path &path) {
	std::ifstream in(path, std::ios::binary);
	std::stringstream buf;
	buf << in.rdbuf();
	return buf.str();
}

inline void write_file(const std::filesystem::path &path, const std::string &text) {
	std::ofstream out(path, std::ios::binary);
	out << text;
}

/// The demo store: the demo datasets evaluated at a long (96) and a short
/// (24, rolling) horizon, as the two shipped demo configs describe.
inline void build_demo_store(const std::filesystem::path &db) {
	auto store = easytime::ResultStore::open(db);
	for (const char *name : {"configs/demo_long.json", "configs/demo_short.json"}) {
		const auto config = easytime::load_config(asset(name));
		const auto corpus = easytime::load_datasets(config);
		easytime::PipelineOptions options;
		options.workers = 1;
		easytime::run_pipeline(corpus, config.methods, config.eval, store, options);
	}
}

/// Runs a shell command, returning its exit status.
inline int run_command(const std::string &command) {
	const int status = std::system(command.c_str());
	if (status == -1) {
		return -1;
	}
	return WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
}

inline std::string shell_quote(const std::string &s) {
	std::string out = "'";
	for (char c : s) {
		if (c == '\'') {
			out += "'\\''";
		} else {
			out += c;
		}
	}
	return out + "'";
}

} // namespace fixtures
