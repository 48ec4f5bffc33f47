#include "cws/scheduler.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <utility>

#include "cws/error.hpp"

namespace cws {
namespace {

constexpr std::array<std::pair<StrategyName, std::string_view>, 6> kStrategies{{
    {StrategyName::kFifo, "fifo"},
    {StrategyName::kRoundRobin, "rr"},
    {StrategyName::kRankMinRr, "rank_min_rr"},
    {StrategyName::kRankMaxRr, "rank_max_rr"},
    {StrategyName::kWrankRr, "wrank_rr"},
    {StrategyName::kGroupMatch, "group_match"},
}};

bool fits(const PendingTask& task, const NodeState& node) {
  return node.cpu_free >= task.cpu_request && node.memory_free >= task.memory_allocation_bytes;
}

void debit(NodeState& node, const PendingTask& task) {
  node.cpu_free -= task.cpu_request;
  node.memory_free -= task.memory_allocation_bytes;
}

// Band of the item at `position` among `count` sorted distinct values.
int quantile_band(std::size_t position, std::size_t count, int group_count) {
  const double band = (static_cast<double>(position) + 0.5) * group_count / static_cast<double>(count);
  return std::clamp(static_cast<int>(std::floor(band)), 0, group_count - 1);
}

// Among feasible nodes, the first at or after `start` (wrapping); locality
// decides between nodes at equal distance.
std::optional<std::size_t> next_feasible(const PendingTask& task, const std::vector<NodeState>& nodes,
                                         const std::vector<std::size_t>& candidates, std::size_t start) {
  std::optional<std::size_t> best;
  std::size_t best_distance = 0;
  double best_locality = -1;
  const std::size_t n = nodes.size();
  for (std::size_t idx : candidates) {
    if (!fits(task, nodes[idx])) continue;
    const std::size_t distance = (idx + n - start % n) % n;
    const double locality = locality_fraction(task, nodes[idx]);
    if (!best || distance < best_distance || (distance == best_distance && locality > best_locality)) {
      best = idx;
      best_distance = distance;
      best_locality = locality;
    }
  }
  return best;
}

}  // namespace

BenchScore bench_score_from_double(double score) {
  if (!std::isfinite(score) || score <= 0) {
    throw CwsError(ErrorCode::kValidation, "bench_score must be positive");
  }
  return BenchScore(static_cast<std::int64_t>(std::llround(score * 1000.0)), 1000);
}

NodeState NodeState::make(std::string node_id, MilliCores cpu, Bytes memory, BenchScore score) {
  NodeState n;
  n.node_id = std::move(node_id);
  n.cpu_capacity = cpu;
  n.cpu_free = cpu;
  n.memory_capacity = memory;
  n.memory_free = memory;
  n.bench_score = score;
  return n;
}

std::string_view to_string(StrategyName s) {
  for (const auto& [name, text] : kStrategies) {
    if (name == s) return text;
  }
  return "fifo";
}

std::optional<StrategyName> strategy_from_string(std::string_view name) {
  for (const auto& [s, text] : kStrategies) {
    if (text == name) return s;
  }
  return std::nullopt;
}

const std::vector<StrategyName>& strategy_catalogue() {
  static const std::vector<StrategyName> all = [] {
    std::vector<StrategyName> v;
    for (const auto& entry : kStrategies) v.push_back(entry.first);
    return v;
  }();
  return all;
}

std::vector<std::string> strategy_names() {
  std::vector<std::string> names;
  for (const auto& entry : kStrategies) names.emplace_back(entry.second);
  return names;
}

bool uses_ranks(StrategyName s) {
  return s == StrategyName::kRankMinRr || s == StrategyName::kRankMaxRr || s == StrategyName::kWrankRr;
}

std::vector<std::size_t> filter_feasible(const PendingTask& task, const std::vector<NodeState>& nodes) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (fits(task, nodes[i])) out.push_back(i);
  }
  return out;
}

double locality_fraction(const PendingTask& task, const NodeState& node) {
  Bytes total = 0;
  Bytes local = 0;
  for (const auto& f : task.input_files) {
    total += f.size_bytes;
    if (node.stored_files.count(f.path)) local += f.size_bytes;
  }
  if (total == 0) return 0;
  return static_cast<double>(local) / static_cast<double>(total);
}

std::vector<std::string> prioritize(StrategyName strategy, const std::vector<std::string>& ready,
                                    const WorkflowDag& dag, const RankTable& ranks,
                                    const std::unordered_map<std::string, double>* weighted) {
  std::vector<std::string> ordered = ready;
  switch (strategy) {
    case StrategyName::kFifo:
    case StrategyName::kRoundRobin:
    case StrategyName::kGroupMatch:
      return ordered;
    case StrategyName::kRankMinRr:
    case StrategyName::kRankMaxRr: {
      const bool min_input = strategy == StrategyName::kRankMinRr;
      struct Key {
        int rank;
        Bytes input;
      };
      std::unordered_map<std::string, Key> keys;
      for (const auto& id : ready) {
        keys[id] = Key{ranks.at(id), dag.task(id).input_bytes_total()};
      }
      std::sort(ordered.begin(), ordered.end(), [&](const std::string& a, const std::string& b) {
        const Key& ka = keys.at(a);
        const Key& kb = keys.at(b);
        if (ka.rank != kb.rank) return ka.rank > kb.rank;
        if (ka.input != kb.input) return min_input ? ka.input < kb.input : ka.input > kb.input;
        return a < b;
      });
      return ordered;
    }
    case StrategyName::kWrankRr: {
      if (weighted == nullptr) {
        throw CwsError(ErrorCode::kValidation, "wrank_rr requires runtime estimates");
      }
      std::stable_sort(ordered.begin(), ordered.end(), [&](const std::string& a, const std::string& b) {
        return weighted->at(a) > weighted->at(b);
      });
      return ordered;
    }
  }
  return ordered;
}

std::vector<Assignment> place_round_robin(const std::vector<PendingTask>& ordered,
                                          std::vector<NodeState>& nodes, RoundRobinCursor& cursor,
                                          bool stop_at_blocked) {
  std::vector<Assignment> out;
  if (nodes.empty()) return out;
  std::vector<std::size_t> all(nodes.size());
  std::iota(all.begin(), all.end(), 0);
  for (const auto& task : ordered) {
    auto idx = next_feasible(task, nodes, all, cursor.next);
    if (!idx) {
      if (stop_at_blocked) break;
      continue;
    }
    debit(nodes[*idx], task);
    cursor.next = (*idx + 1) % nodes.size();
    out.push_back(Assignment{task.task_id, nodes[*idx].node_id, task.memory_allocation_bytes, 0});
  }
  return out;
}

int group_count_for(const std::vector<NodeState>& nodes, int max_groups) {
  std::vector<BenchScore> scores;
  for (const auto& n : nodes) scores.push_back(n.bench_score);
  std::sort(scores.begin(), scores.end());
  scores.erase(std::unique(scores.begin(), scores.end()), scores.end());
  return std::max(1, std::min<int>(max_groups, static_cast<int>(scores.size())));
}

std::vector<int> node_groups(const std::vector<NodeState>& nodes, int group_count) {
  std::vector<BenchScore> scores;
  for (const auto& n : nodes) scores.push_back(n.bench_score);
  std::sort(scores.begin(), scores.end());
  scores.erase(std::unique(scores.begin(), scores.end()), scores.end());
  std::vector<int> groups;
  groups.reserve(nodes.size());
  for (const auto& n : nodes) {
    const auto pos = static_cast<std::size_t>(
        std::lower_bound(scores.begin(), scores.end(), n.bench_score) - scores.begin());
    groups.push_back(quantile_band(pos, scores.size(), group_count));
  }
  return groups;
}

int process_group(const std::string& process_name,
                  const std::unordered_map<std::string, double>& median_peaks, int group_count) {
  auto it = median_peaks.find(process_name);
  if (it == median_peaks.end()) return group_count / 2;
  std::vector<double> values;
  for (const auto& entry : median_peaks) values.push_back(entry.second);
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  const auto pos = static_cast<std::size_t>(
      std::lower_bound(values.begin(), values.end(), it->second) - values.begin());
  return quantile_band(pos, values.size(), group_count);
}

std::vector<Assignment> place_group_match(const std::vector<PendingTask>& ordered,
                                          std::vector<NodeState>& nodes,
                                          const std::unordered_map<std::string, double>& median_peaks,
                                          GroupCursors& cursors, int max_groups) {
  std::vector<Assignment> out;
  if (nodes.empty()) return out;
  const int groups = nodes.size() < 2 ? 1 : group_count_for(nodes, max_groups);
  const std::vector<int> node_group = node_groups(nodes, groups);
  std::vector<std::vector<std::size_t>> members(groups);
  for (std::size_t i = 0; i < nodes.size(); ++i) members[node_group[i]].push_back(i);
  if (cursors.per_group.size() != static_cast<std::size_t>(groups)) {
    cursors.per_group.assign(groups, 0);
  }

  for (const auto& task : ordered) {
    const int home = groups == 1 ? 0 : process_group(task.process_name, median_peaks, groups);
    // home, then home+1, home-1, home+2, ...
    std::vector<int> tries{home};
    for (int d = 1; d < groups; ++d) {
      if (home + d < groups) tries.push_back(home + d);
      if (home - d >= 0) tries.push_back(home - d);
    }
    for (int g : tries) {
      const auto& group = members[g];
      if (group.empty()) continue;
      // The cursor walks positions within the group's member list.
      std::vector<NodeState> view;
      for (std::size_t idx : group) view.push_back(nodes[idx]);
      std::vector<std::size_t> local(group.size());
      std::iota(local.begin(), local.end(), 0);
      auto pick = next_feasible(task, view, local, cursors.per_group[g]);
      if (!pick) continue;
      const std::size_t idx = group[*pick];
      debit(nodes[idx], task);
      cursors.per_group[g] = (*pick + 1) % group.size();
      out.push_back(Assignment{task.task_id, nodes[idx].node_id, task.memory_allocation_bytes, 0});
      break;
    }
  }
  return out;
}

}  // namespace cws
