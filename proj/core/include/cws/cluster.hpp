#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cws/scheduler.hpp"

namespace cws {

struct NodeDef {
  std::string node_id;
  MilliCores cpu;
  Bytes memory_bytes = 0;
  BenchScore bench_score{kReferenceBenchScore};
};

// Cluster definition file: {"nodes":[{node_id,cpu,memory_bytes,bench_score}],"seed":n}
struct ClusterDef {
  std::vector<NodeDef> nodes;
  std::uint64_t seed = 0;

  std::vector<NodeState> initial_states() const;
  Bytes max_memory() const;
};

// Throws CwsError(kValidation): no nodes, duplicate ids, non-positive capacities.
void validate(const ClusterDef& cluster);
ClusterDef parse_cluster(const std::string& text);
ClusterDef load_cluster(const std::filesystem::path& path);
std::string dump_cluster(const ClusterDef& cluster);

}  // namespace cws
