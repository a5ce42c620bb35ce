#pragma once

#include "easytime/matrix.hpp"

#include <json.hpp>
#include <chrono>
#include <cstdint>
#include <map>
#include <string>

namespace easytime {

/// One request of the external-method protocol. On the wire:
///   {"history": [[...], ...], "horizon": H, "params": {...}, "seed": S}\n
/// and the plugin answers with one line
///   {"values": [[...], ...]}\n
/// holding `horizon` rows of `history`'s width.
struct PluginRequest {
	Matrix history;
	std::size_t horizon = 0;
	std::map<std::string, double> params;
	std::uint64_t seed = 0;
};

nlohmann::json request_to_json(const PluginRequest &request);

/// Validates a decoded response against the request's shape.
/// Throws PluginProtocolError.
Matrix parse_plugin_response(const std::string &line, std::size_t horizon, std::size_t channels);

/// Launches `executable` as a subprocess, writes the request to its stdin,
/// reads one JSON document from stdout and validates it.
/// Errors: PluginNotFound, PluginCrash (nonzero exit or signal),
/// PluginTimeout (killed after `timeout`), PluginProtocolError.
Matrix run_external_method(const std::string &executable, const PluginRequest &request,
                           std::chrono::milliseconds timeout);

} // namespace easytime
