#include "cws/predictors.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>

#include "cws/error.hpp"

namespace cws {

RegressionState::RegressionState(double alpha)
    : precision(Eigen::Matrix2d::Identity() * alpha),
      eta(Eigen::Vector2d::Zero()),
      mean(Eigen::Vector2d::Zero()),
      precision_x_(Matrix2x::Identity() * static_cast<long double>(alpha)),
      eta_x_(Vector2x::Zero()) {}

void RegressionState::observe(const Eigen::Vector2d& x, double y, double beta) {
  const Vector2x xx = x.cast<long double>();
  const long double b = beta;
  precision_x_ += b * xx * xx.transpose();
  eta_x_ += b * static_cast<long double>(y) * xx;
  mean = precision_x_.ldlt().solve(eta_x_).cast<double>();
  precision = precision_x_.cast<double>();
  eta = eta_x_.cast<double>();
  ++count;
}

Eigen::Vector2d runtime_features(Bytes input_bytes) {
  return {1.0, static_cast<double>(input_bytes) / static_cast<double>(kGiB)};
}

RuntimePredictor::RuntimePredictor(PredictorConfig config) : config_(config) {
  if (!(config_.alpha > 0) || !(config_.beta > 0)) {
    throw CwsError(ErrorCode::kValidation, "predictor alpha and beta must be positive");
  }
}

void RuntimePredictor::set_node_factor(const std::string& node_id, double factor) {
  if (!(factor > 0)) throw CwsError(ErrorCode::kValidation, "node factor must be positive");
  std::lock_guard lock(mutex_);
  factors_[node_id] = factor;
}

double RuntimePredictor::node_factor(const std::string& node_id) const {
  std::lock_guard lock(mutex_);
  auto it = factors_.find(node_id);
  if (it == factors_.end()) throw CwsError(ErrorCode::kNotFound, "unknown node '" + node_id + "'");
  return it->second;
}

void RuntimePredictor::observe_runtime(const std::string& process_name, Bytes input_bytes,
                                       const std::string& node_id, double wall_time_s) {
  if (!(wall_time_s > 0)) throw CwsError(ErrorCode::kValidation, "wall_time_s must be positive");
  const double factor = node_factor(node_id);
  std::lock_guard lock(mutex_);
  auto [it, inserted] = models_.try_emplace(process_name, config_.alpha);
  it->second.observe(runtime_features(input_bytes), wall_time_s * factor, config_.beta);
}

RuntimePrediction RuntimePredictor::predict_reference(const std::string& process_name,
                                                      Bytes input_bytes) const {
  std::lock_guard lock(mutex_);
  auto it = models_.find(process_name);
  if (it == models_.end() || it->second.count < config_.min_runtime_observations) {
    return {config_.default_runtime_s, config_.default_runtime_s, false};
  }
  const RegressionState& s = it->second;
  const Eigen::Vector2d x = runtime_features(input_bytes);
  const double mean = std::max(1.0, s.mean.dot(x));
  const double variance = 1.0 / config_.beta + x.dot(s.precision.ldlt().solve(x));
  return {mean, std::sqrt(variance), true};
}

RuntimePrediction RuntimePredictor::predict_runtime(const std::string& process_name, Bytes input_bytes,
                                                    const std::string& node_id) const {
  const double factor = [&] {
    std::lock_guard lock(mutex_);
    auto it = factors_.find(node_id);
    return it == factors_.end() ? 1.0 : it->second;
  }();
  RuntimePrediction p = predict_reference(process_name, input_bytes);
  p.mean_s /= factor;
  p.std_s /= factor;
  return p;
}

std::optional<RegressionState> RuntimePredictor::state(const std::string& process_name) const {
  std::lock_guard lock(mutex_);
  auto it = models_.find(process_name);
  if (it == models_.end()) return std::nullopt;
  return it->second;
}

MemoryPredictor::MemoryPredictor(MemoryConfig config) : config_(config) {
  if (!(config_.safety_factor >= 1.0)) throw CwsError(ErrorCode::kValidation, "safety_factor must be >= 1");
  if (config_.doubling_cap < 1) throw CwsError(ErrorCode::kValidation, "doubling_cap must be >= 1");
}

void MemoryPredictor::set_max_node_capacity(Bytes capacity) {
  std::lock_guard lock(mutex_);
  max_node_capacity_ = capacity;
}

void MemoryPredictor::observe_peak(const std::string& process_name, Bytes peak_bytes) {
  std::lock_guard lock(mutex_);
  peaks_[process_name].push_back(peak_bytes);
}

Bytes MemoryPredictor::initial_allocation(const std::string& process_name, Bytes memory_request_bytes,
                                          Bytes host_limit) const {
  if (memory_request_bytes <= 0) {
    throw CwsError(ErrorCode::kValidation, "memory request must be positive");
  }
  std::lock_guard lock(mutex_);
  auto it = peaks_.find(process_name);
  if (it == peaks_.end() || it->second.size() < config_.min_observations) return memory_request_bytes;
  const Bytes max_peak = *std::max_element(it->second.begin(), it->second.end());
  Bytes alloc = static_cast<Bytes>(std::ceil(config_.safety_factor * static_cast<double>(max_peak)));
  alloc = std::max(alloc, config_.floor_bytes);
  const Bytes limit = host_limit > 0 ? host_limit : max_node_capacity_;
  if (limit > 0) alloc = std::min(alloc, limit);
  return alloc;
}

OomDecision MemoryPredictor::on_oom(const std::string& process_name, Bytes previous_allocation,
                                    int oom_count, Bytes host_limit) {
  // The task needed more than it had; that is a lower bound on its peak.
  observe_peak(process_name, previous_allocation);
  OomDecision d;
  d.new_allocation_bytes = previous_allocation * 2;
  if (oom_count >= config_.doubling_cap) {
    d.permanent_failure = true;
    d.diagnostic = "out of memory " + std::to_string(oom_count) + " times (cap " +
                   std::to_string(config_.doubling_cap) + ")";
    return d;
  }
  std::lock_guard lock(mutex_);
  const Bytes limit = host_limit > 0 ? host_limit : max_node_capacity_;
  if (limit > 0 && d.new_allocation_bytes > limit) {
    d.permanent_failure = true;
    d.diagnostic = "doubled allocation " + std::to_string(d.new_allocation_bytes) +
                   " bytes exceeds the largest eligible node (" + std::to_string(limit) + " bytes)";
  }
  return d;
}

std::vector<Bytes> MemoryPredictor::peaks(const std::string& process_name) const {
  std::lock_guard lock(mutex_);
  auto it = peaks_.find(process_name);
  return it == peaks_.end() ? std::vector<Bytes>{} : it->second;
}

std::map<std::string, WastageEntry> wastage_from_attempts(const std::vector<AttemptUsage>& attempts) {
  std::map<std::string, WastageEntry> out;
  for (const auto& a : attempts) {
    const double allocated = static_cast<double>(a.allocation_bytes) * a.wall_time_s;
    const double used = static_cast<double>(std::min(a.peak_bytes, a.allocation_bytes)) * a.wall_time_s;
    for (const std::string& key : {a.process_name, std::string{}}) {
      out[key].allocated_byte_seconds += allocated;
      out[key].used_byte_seconds += used;
    }
  }
  for (auto& [_, e] : out) {
    e.wastage = e.allocated_byte_seconds > 0 ? 1.0 - e.used_byte_seconds / e.allocated_byte_seconds : 0.0;
  }
  return out;
}

}  // namespace cws
