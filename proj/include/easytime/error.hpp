#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace easytime {

/// Library-wide exception. `code()` is a stable identifier from the error
/// registry (e.g. "MalformedCsv", "InsufficientHistory") that the service
/// layer maps to HTTP status codes and clients may switch on.
class Error : public std::runtime_error {
public:
	Error(std::string code, const std::string &message)
	    : std::runtime_error(message), code_(std::move(code)) {}

	const std::string &code() const noexcept {
		return code_;
	}

private:
	std::string code_;
};

[[noreturn]] inline void fail(std::string code, const std::string &message) {
	throw Error(std::move(code), message);
}

} // namespace easytime
