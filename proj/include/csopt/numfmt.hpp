#pragma once

#include <charconv>
#include <string>
#include <string_view>
#include <system_error>

#include "csopt/errors.hpp"

namespace csopt {

// Shortest decimal string that round-trips to the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) return "nan";
  return std::string(buf, end);
}

inline double parse_double(std::string_view text, std::string_view what) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ConfigError("cannot parse '" + std::string(text) + "' as a number for " +
                      std::string(what));
  }
  return v;
}

}  // namespace csopt
