#pragma once

#include <cstdint>
#include <filesystem>

#include "cws/predictors.hpp"

namespace cws {

struct ServiceConfig {
  PredictorConfig predictor;
  MemoryConfig memory;
  std::int64_t poll_timeout_ms = 30000;
  int group_match_max_groups = 3;
};

// INI file with dotted keys, e.g.
//   [predictor]
//   alpha = 1e-6
//   share_across_workflows = true
//   [memory]
//   safety_factor = 1.2
// Unknown keys are rejected with CwsError(kValidation).
ServiceConfig load_config(const std::filesystem::path& path);

}  // namespace cws
