#pragma once

#include <charconv>
#include <string>
#include <string_view>

namespace cann {

// Shortest representation that reads back to the same double.
inline std::string fmt_double(double v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

// Whole-token parse; false on trailing junk or range errors.
inline bool parse_double(std::string_view s, double& out) {
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size() && !s.empty();
}

} // namespace cann
