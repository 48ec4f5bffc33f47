#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "cws/units.hpp"

namespace cws {

struct PredictorConfig {
  double alpha = 1e-6;  // prior precision on the weights (times identity)
  double beta = 1.0;    // observation noise precision
  double default_runtime_s = 600.0;
  bool share_across_workflows = true;
  std::size_t min_runtime_observations = 2;
};

struct MemoryConfig {
  double safety_factor = 1.2;
  int doubling_cap = 3;
  Bytes floor_bytes = 128 * kMiB;
  std::size_t min_observations = 3;
};

// Conjugate Gaussian posterior over (intercept, seconds per GiB of input)
// with known noise precision. The precision-weighted mean eta = P m is
// carried alongside P so every update is a rank-one addition and the mean
// is recovered with a single solve. Accumulation and the solve run in
// extended precision: with few observations and a tiny prior the precision
// matrix is nearly singular, and double storage alone loses about 1e-7 of
// relative accuracy in the mean. The double fields are rounded copies.
struct RegressionState {
  using Matrix2x = Eigen::Matrix<long double, 2, 2>;
  using Vector2x = Eigen::Matrix<long double, 2, 1>;

  Eigen::Matrix2d precision;
  Eigen::Vector2d eta;
  Eigen::Vector2d mean;
  std::size_t count = 0;

  explicit RegressionState(double alpha);
  void observe(const Eigen::Vector2d& x, double y, double beta);

 private:
  Matrix2x precision_x_;
  Vector2x eta_x_;
};

Eigen::Vector2d runtime_features(Bytes input_bytes);

struct RuntimePrediction {
  double mean_s = 0;
  double std_s = 0;
  bool from_model = false;
};

// Online Bayesian runtime regression. Observations are normalized to the
// reference machine by the node factor; predictions are scaled back.
class RuntimePredictor {
 public:
  explicit RuntimePredictor(PredictorConfig config = {});

  void set_node_factor(const std::string& node_id, double factor);
  double node_factor(const std::string& node_id) const;

  // Throws CwsError(kNotFound) for an unknown node and kValidation for a
  // non-positive wall time.
  void observe_runtime(const std::string& process_name, Bytes input_bytes,
                       const std::string& node_id, double wall_time_s);
  RuntimePrediction predict_runtime(const std::string& process_name, Bytes input_bytes,
                                    const std::string& node_id) const;
  // Prediction on the reference machine (factor 1).
  RuntimePrediction predict_reference(const std::string& process_name, Bytes input_bytes) const;

  std::optional<RegressionState> state(const std::string& process_name) const;
  const PredictorConfig& config() const { return config_; }

 private:
  PredictorConfig config_;
  mutable std::mutex mutex_;
  std::unordered_map<std::string, double> factors_;
  std::unordered_map<std::string, RegressionState> models_;
};

struct OomDecision {
  bool permanent_failure = false;
  Bytes new_allocation_bytes = 0;
  std::string diagnostic;
};

// Peak-memory driven sizing with a safety margin and doubling on OOM.
class MemoryPredictor {
 public:
  explicit MemoryPredictor(MemoryConfig config = {});

  void set_max_node_capacity(Bytes capacity);
  void observe_peak(const std::string& process_name, Bytes peak_bytes);
  // `host_limit` is the largest memory of any node able to host the task;
  // 0 falls back to the largest node overall.
  Bytes initial_allocation(const std::string& process_name, Bytes memory_request_bytes,
                           Bytes host_limit = 0) const;
  // `oom_count` is the number of consecutive OOM failures including this one.
  OomDecision on_oom(const std::string& process_name, Bytes previous_allocation,
                     int oom_count, Bytes host_limit = 0);

  std::vector<Bytes> peaks(const std::string& process_name) const;
  const MemoryConfig& config() const { return config_; }

 private:
  MemoryConfig config_;
  Bytes max_node_capacity_ = 0;
  mutable std::mutex mutex_;
  std::unordered_map<std::string, std::vector<Bytes>> peaks_;
};

// One execution attempt as needed for wastage accounting.
struct AttemptUsage {
  std::string process_name;
  Bytes allocation_bytes = 0;
  Bytes peak_bytes = 0;
  double wall_time_s = 0;
};

struct WastageEntry {
  double allocated_byte_seconds = 0;
  double used_byte_seconds = 0;
  double wastage = 0;  // 1 - used / allocated
};

// Per-process wastage under a constant usage model (peak held for the whole
// attempt). The empty key aggregates all processes.
std::map<std::string, WastageEntry> wastage_from_attempts(const std::vector<AttemptUsage>& attempts);

}  // namespace cws
