#pragma once

#include <boost/rational.hpp>

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace cws {

// Exact virtual time. The event clock never accumulates floating point error.
using Seconds = boost::rational<std::int64_t>;

using Bytes = std::int64_t;

inline constexpr Bytes kMiB = Bytes{1} << 20;
inline constexpr Bytes kGiB = Bytes{1} << 30;

// CPU requests and capacities are held in millicores so that fractional
// core counts compare exactly.
struct MilliCores {
  std::int64_t value = 0;

  static MilliCores from_cores(double cores);
  double cores() const { return static_cast<double>(value) / 1000.0; }

  friend auto operator<=>(const MilliCores&, const MilliCores&) = default;
  MilliCores& operator+=(MilliCores o) {
    value += o.value;
    return *this;
  }
  MilliCores& operator-=(MilliCores o) {
    value -= o.value;
    return *this;
  }
  friend MilliCores operator+(MilliCores a, MilliCores b) { return a += b; }
  friend MilliCores operator-(MilliCores a, MilliCores b) { return a -= b; }
};

// Rounds to the nearest microsecond.
Seconds seconds_from_double(double seconds);
double to_double(const Seconds& s);

// "12", "-3" or "101/3".
std::string to_string(const Seconds& s);
Seconds parse_seconds(std::string_view text);

}  // namespace cws
