#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace diffpool {

/// %.17g: enough digits to round-trip any double.
std::string format_double(double v);

double parse_double(std::string_view s);

std::vector<std::string_view> split(std::string_view s, char sep);

/// 64-bit FNV-1a; stable across platforms, used for content checksums.
std::uint64_t fnv1a64(std::string_view bytes);

std::string to_hex(std::uint64_t v);

}  // namespace diffpool
