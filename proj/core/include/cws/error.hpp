#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cws {

enum class ErrorCode {
  kValidation,
  kConflict,
  kNotFound,
  kUnknownStrategy,
  kCycle,
  kIllegalTransition,
  kUnauthorized,
  kTransport,
  kInternal,
};

std::string_view to_string(ErrorCode code);
ErrorCode error_code_from_string(std::string_view name);

// HTTP status used on the wire for each code.
int http_status(ErrorCode code);

// Every failure surfaced by the scheduler service carries a machine-readable
// code plus optional per-item diagnostics (offending edges, task ids, ...).
class CwsError : public std::runtime_error {
 public:
  CwsError(ErrorCode code, const std::string& message,
           std::vector<std::string> details = {})
      : std::runtime_error(message), code_(code), details_(std::move(details)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::vector<std::string>& details() const noexcept { return details_; }

 private:
  ErrorCode code_;
  std::vector<std::string> details_;
};

}  // namespace cws
