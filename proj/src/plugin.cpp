#include "easytime/plugin.hpp"

#include "easytime/error.hpp"

#include <cerrno>
#include <cmath>
#include <csignal>
#include <cstring>
#include <fcntl.h>
#include <fmt/format.h>
#include <mutex>
#include <poll.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

extern char **environ;

namespace easytime {

nlohmann::json request_to_json(const PluginRequest &request) {
	nlohmann::json history = nlohmann::json::array();
	for (std::size_t r = 0; r < request.history.rows(); ++r) {
		const auto row = request.history.row(r);
		history.push_back(std::vector<double>(row.begin(), row.end()));
	}
	return nlohmann::json{{"history", std::move(history)},
	                      {"horizon", request.horizon},
	                      {"params", request.params},
	                      {"seed", request.seed}};
}

Matrix parse_plugin_response(const std::string &line, std::size_t horizon, std::size_t channels) {
	nlohmann::json j;
	try {
		j = nlohmann::json::parse(line);
	} catch (const nlohmann::json::parse_error &e) {
		fail("PluginProtocolError", fmt::format("response is not JSON: {}", e.what()));
	}
	if (!j.is_object() || !j.contains("values") || !j["values"].is_array()) {
		fail("PluginProtocolError", "response must be an object with a 'values' array");
	}
	const auto &rows = j["values"];
	if (rows.size() != horizon) {
		fail("PluginProtocolError", fmt::format("expected {} forecast rows, got {}", horizon, rows.size()));
	}
	Matrix out(horizon, channels);
	for (std::size_t r = 0; r < horizon; ++r) {
		if (!rows[r].is_array() || rows[r].size() != channels) {
			fail("PluginProtocolError", fmt::format("row {} must hold {} numbers", r, channels));
		}
		for (std::size_t c = 0; c < channels; ++c) {
			const auto &v = rows[r][c];
			if (!v.is_number() || !std::isfinite(v.get<double>())) {
				fail("PluginProtocolError", fmt::format("value at ({}, {}) is not a finite number", r, c));
			}
			out(r, c) = v.get<double>();
		}
	}
	return out;
}

namespace {

struct Fd {
	int fd = -1;
	Fd() = default;
	explicit Fd(int f) : fd(f) {}
	Fd(const Fd &) = delete;
	Fd &operator=(const Fd &) = delete;
	~Fd() { reset(); }
	void reset() {
		if (fd >= 0) {
			::close(fd);
		}
		fd = -1;
	}
};

void make_pipe(Fd &read_end, Fd &write_end) {
	int fds[2];
	if (::pipe2(fds, O_CLOEXEC) != 0) {
		fail("PluginCrash", fmt::format("pipe failed: {}", std::strerror(errno)));
	}
	read_end.fd = fds[0];
	write_end.fd = fds[1];
}

void ignore_sigpipe() {
	static std::once_flag once;
	std::call_once(once, [] { std::signal(SIGPIPE, SIG_IGN); });
}

} // namespace

Matrix run_external_method(const std::string &executable, const PluginRequest &request,
                           std::chrono::milliseconds timeout) {
	if (::access(executable.c_str(), X_OK) != 0) {
		fail("PluginNotFound", fmt::format("plugin '{}' is not an executable file", executable));
	}
	ignore_sigpipe();

	Fd in_read, in_write, out_read, out_write, err_read, err_write;
	make_pipe(in_read, in_write);
	make_pipe(out_read, out_write);
	make_pipe(err_read, err_write);

	posix_spawn_file_actions_t actions;
	posix_spawn_file_actions_init(&actions);
	posix_spawn_file_actions_adddup2(&actions, in_read.fd, STDIN_FILENO);
	posix_spawn_file_actions_adddup2(&actions, out_write.fd, STDOUT_FILENO);
	posix_spawn_file_actions_adddup2(&actions, err_write.fd, STDERR_FILENO);
	std::string path = executable;
	char *argv[] = {path.data(), nullptr};
	pid_t pid = 0;
	const int rc = posix_spawn(&pid, path.c_str(), &actions, nullptr, argv, environ);
	posix_spawn_file_actions_destroy(&actions);
	if (rc != 0) {
		fail("PluginCrash", fmt::format("cannot launch plugin '{}': {}", executable, std::strerror(rc)));
	}
	in_read.reset();
	out_write.reset();
	err_write.reset();

	const std::string payload = request_to_json(request).dump() + "\n";
	std::size_t written = 0;
	std::string out;
	std::string err;
	const auto deadline = std::chrono::steady_clock::now() + timeout;
	::fcntl(in_write.fd, F_SETFL, O_NONBLOCK);
	bool timed_out = false;

	while (out_read.fd >= 0 || err_read.fd >= 0) {
		const auto remaining =
		    std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
		if (remaining.count() <= 0) {
			timed_out = true;
			break;
		}
		pollfd fds[3];
		nfds_t count = 0;
		int out_idx = -1, err_idx = -1, in_idx = -1;
		if (out_read.fd >= 0) {
			out_idx = static_cast<int>(count);
			fds[count++] = pollfd{out_read.fd, POLLIN, 0};
		}
		if (err_read.fd >= 0) {
			err_idx = static_cast<int>(count);
			fds[count++] = pollfd{err_read.fd, POLLIN, 0};
		}
		if (in_write.fd >= 0) {
			in_idx = static_cast<int>(count);
			fds[count++] = pollfd{in_write.fd, POLLOUT, 0};
		}
		const int ready = ::poll(fds, count, static_cast<int>(remaining.count()));
		if (ready < 0 && errno == EINTR) {
			continue;
		}
		if (ready == 0) {
			timed_out = true;
			break;
		}
		if (in_idx >= 0 && fds[in_idx].revents != 0) {
			const auto n = ::write(in_write.fd, payload.data() + written, payload.size() - written);
			if (n > 0) {
				written += static_cast<std::size_t>(n);
			}
			if (n < 0 && errno != EAGAIN && errno != EINTR) {
				in_write.reset(); // plugin closed its stdin
			} else if (written == payload.size()) {
				in_write.reset();
			}
		}
		auto drain = [](Fd &fd, std::string &sink, short revents) {
			if (revents == 0) {
				return;
			}
			char buf[65536];
			const auto n = ::read(fd.fd, buf, sizeof(buf));
			if (n > 0) {
				sink.append(buf, static_cast<std::size_t>(n));
			} else if (n == 0 || (errno != EAGAIN && errno != EINTR)) {
				fd.reset();
			}
		};
		if (out_idx >= 0) {
			drain(out_read, out, fds[out_idx].revents);
		}
		if (err_idx >= 0) {
			drain(err_read, err, fds[err_idx].revents);
		}
	}

	if (timed_out) {
		::kill(pid, SIGKILL);
		int status = 0;
		::waitpid(pid, &status, 0);
		fail("PluginTimeout", fmt::format("plugin '{}' exceeded {} ms", executable, timeout.count()));
	}
	int status = 0;
	while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
	}
	if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
		const auto code = WIFEXITED(status) ? fmt::format("exit code {}", WEXITSTATUS(status))
		                                    : fmt::format("signal {}", WTERMSIG(status));
		if (err.size() > 2048) {
			err.resize(2048);
		}
		fail("PluginCrash", fmt::format("plugin '{}' failed with {}: {}", executable, code, err));
	}
	const auto newline = out.find('\n');
	const std::string line = newline == std::string::npos ? out : out.substr(0, newline);
	return parse_plugin_response(line, request.horizon, request.history.cols());
}

} // namespace easytime
