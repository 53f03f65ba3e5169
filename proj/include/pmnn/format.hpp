#pragma once

#include <charconv>
#include <cmath>
#include <string>
#include <system_error>

namespace pmnn {

/// Locale-independent text for a double with 17 significant digits, so
/// every emitted value round-trips exactly. NaN/inf print as nan/inf/-inf.
inline std::string fmt_real(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  if (res.ec != std::errc{}) return "nan";
  return std::string(buf, res.ptr);
}

}  // namespace pmnn
