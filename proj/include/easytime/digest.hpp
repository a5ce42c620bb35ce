#pragma once

#include <cstdint>
#include <fmt/format.h>
#include <string>
#include <string_view>

namespace easytime {

/// 64-bit FNV-1a. Used for stable identifiers (config digests, run ids),
/// not for security.
inline std::uint64_t fnv1a64(std::string_view data, std::uint64_t hash = 0xcbf29ce484222325ULL) {
	for (unsigned char ch : data) {
		hash ^= ch;
		hash *= 0x100000001b3ULL;
	}
	return hash;
}

inline std::string hex_digest(std::string_view data) {
	return fmt::format("{:016x}", fnv1a64(data));
}

} // namespace easytime
