#pragma once

#include <charconv>
#include <string>

namespace ncgp {

/// Shortest decimal text that parses back to exactly `v`.
inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

/// Fixed-point text with `digits` decimals, for human-readable tables.
inline std::string format_fixed(double v, int digits) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, digits);
  return std::string(buf, res.ptr);
}

}  // namespace ncgp
