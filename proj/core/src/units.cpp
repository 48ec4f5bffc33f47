#include "cws/units.hpp"

#include <charconv>
#include <cmath>
#include <string>

#include "cws/error.hpp"

namespace cws {

MilliCores MilliCores::from_cores(double cores) {
  if (!std::isfinite(cores)) throw CwsError(ErrorCode::kValidation, "cpu value is not finite");
  return MilliCores{static_cast<std::int64_t>(std::llround(cores * 1000.0))};
}

Seconds seconds_from_double(double seconds) {
  if (!std::isfinite(seconds)) throw CwsError(ErrorCode::kValidation, "time value is not finite");
  return Seconds(static_cast<std::int64_t>(std::llround(seconds * 1e6)), 1'000'000);
}

double to_double(const Seconds& s) {
  return static_cast<double>(s.numerator()) / static_cast<double>(s.denominator());
}

std::string to_string(const Seconds& s) {
  if (s.denominator() == 1) return std::to_string(s.numerator());
  return std::to_string(s.numerator()) + "/" + std::to_string(s.denominator());
}

Seconds parse_seconds(std::string_view text) {
  auto parse_int = [&](std::string_view part) {
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), v);
    if (ec != std::errc{} || ptr != part.data() + part.size()) {
      throw CwsError(ErrorCode::kValidation, "malformed rational '" + std::string(text) + "'");
    }
    return v;
  };
  auto slash = text.find('/');
  if (slash == std::string_view::npos) return Seconds(parse_int(text));
  std::int64_t den = parse_int(text.substr(slash + 1));
  if (den == 0) throw CwsError(ErrorCode::kValidation, "zero denominator in '" + std::string(text) + "'");
  return Seconds(parse_int(text.substr(0, slash)), den);
}

}  // namespace cws
