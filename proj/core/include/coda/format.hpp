#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace coda {

// Shortest round-trip-safe rendering with 17 significant digits; parsing the
// result with parse_real reproduces the value bit for bit.
std::string format_real(double v);

// Whole-string parse; DataError on trailing characters or an empty field.
double parse_real(std::string_view text);
std::int64_t parse_int(std::string_view text);

// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL);

}  // namespace coda
