// SPDX-License-Identifier: Apache-2.0
//
// Deterministic double formatting. Canonical set strings use the shortest
// representation that round-trips exactly; report files use 17 significant
// digits so golden files stay stable across platforms.
#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <string>

namespace bilevel {

// Shortest decimal string that parses back to exactly the same double.
// Infinities print as "inf"/"-inf"; negative zero normalizes to "0".
inline std::string format_shortest(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == 0.0) return "0";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

// Fixed 17-significant-digit form used in JSON/CSV reports.
inline std::string format_report(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == 0.0) return "0";
  char buf[64];
  int n = std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf, static_cast<std::size_t>(n));
}

}  // namespace bilevel
