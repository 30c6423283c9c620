#pragma once

#include <charconv>
#include <cstdio>
#include <string>
#include <system_error>

namespace perflaw {

/// Shortest decimal string that parses back to the same double.
inline std::string format_exact(double value) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc{}) return std::to_string(value);
  return std::string(buf, end);
}

/// Fixed two-decimal rendering used by human-readable tables.
inline std::string format_2dp(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f", value);
  return buf;
}

}  // namespace perflaw
