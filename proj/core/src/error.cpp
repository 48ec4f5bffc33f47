#include "cws/error.hpp"

#include <array>
#include <utility>

namespace cws {
namespace {

constexpr std::array<std::pair<ErrorCode, std::string_view>, 9> kNames{{
    {ErrorCode::kValidation, "validation"},
    {ErrorCode::kConflict, "conflict"},
    {ErrorCode::kNotFound, "not_found"},
    {ErrorCode::kUnknownStrategy, "unknown_strategy"},
    {ErrorCode::kCycle, "cycle"},
    {ErrorCode::kIllegalTransition, "illegal_transition"},
    {ErrorCode::kUnauthorized, "unauthorized"},
    {ErrorCode::kTransport, "transport"},
    {ErrorCode::kInternal, "internal"},
}};

}  // namespace

std::string_view to_string(ErrorCode code) {
  for (const auto& [c, name] : kNames) {
    if (c == code) return name;
  }
  return "internal";
}

ErrorCode error_code_from_string(std::string_view name) {
  for (const auto& [c, n] : kNames) {
    if (n == name) return c;
  }
  return ErrorCode::kInternal;
}

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kValidation: return 400;
    case ErrorCode::kUnauthorized: return 401;
    case ErrorCode::kNotFound: return 404;
    case ErrorCode::kConflict:
    case ErrorCode::kIllegalTransition: return 409;
    case ErrorCode::kUnknownStrategy:
    case ErrorCode::kCycle: return 422;
    case ErrorCode::kTransport: return 502;
    case ErrorCode::kInternal: return 500;
  }
  return 500;
}

}  // namespace cws
