#include "cws/cluster.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <set>
#include <sstream>

#include "cws/error.hpp"

namespace cws {

std::vector<NodeState> ClusterDef::initial_states() const {
  std::vector<NodeState> states;
  states.reserve(nodes.size());
  for (const auto& n : nodes) states.push_back(NodeState::make(n.node_id, n.cpu, n.memory_bytes, n.bench_score));
  return states;
}

Bytes ClusterDef::max_memory() const {
  Bytes best = 0;
  for (const auto& n : nodes) best = std::max(best, n.memory_bytes);
  return best;
}

void validate(const ClusterDef& cluster) {
  if (cluster.nodes.empty()) throw CwsError(ErrorCode::kValidation, "cluster has no nodes");
  std::set<std::string> ids;
  for (const auto& n : cluster.nodes) {
    if (n.node_id.empty()) throw CwsError(ErrorCode::kValidation, "node with empty node_id");
    if (!ids.insert(n.node_id).second) {
      throw CwsError(ErrorCode::kValidation, "duplicate node_id '" + n.node_id + "'");
    }
    if (n.cpu.value <= 0 || n.memory_bytes <= 0 || n.bench_score <= 0) {
      throw CwsError(ErrorCode::kValidation, "node '" + n.node_id + "' needs positive cpu, memory and bench_score");
    }
  }
}

ClusterDef parse_cluster(const std::string& text) {
  ClusterDef cluster;
  try {
    const auto j = nlohmann::json::parse(text);
    for (const auto& n : j.at("nodes")) {
      NodeDef def;
      def.node_id = n.at("node_id").get<std::string>();
      def.cpu = MilliCores::from_cores(n.at("cpu").get<double>());
      def.memory_bytes = n.at("memory_bytes").get<Bytes>();
      def.bench_score = bench_score_from_double(n.value("bench_score", 1000.0));
      cluster.nodes.push_back(std::move(def));
    }
    cluster.seed = j.value("seed", std::uint64_t{0});
  } catch (const nlohmann::json::exception& e) {
    throw CwsError(ErrorCode::kValidation, std::string("malformed cluster definition: ") + e.what());
  }
  validate(cluster);
  return cluster;
}

ClusterDef load_cluster(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CwsError(ErrorCode::kValidation, "cannot read cluster file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_cluster(buffer.str());
}

std::string dump_cluster(const ClusterDef& cluster) {
  nlohmann::ordered_json j;
  j["nodes"] = nlohmann::ordered_json::array();
  for (const auto& n : cluster.nodes) {
    j["nodes"].push_back({{"node_id", n.node_id},
                          {"cpu", n.cpu.cores()},
                          {"memory_bytes", n.memory_bytes},
                          {"bench_score", boost::rational_cast<double>(n.bench_score)}});
  }
  j["seed"] = cluster.seed;
  return j.dump(2) + "\n";
}

}  // namespace cws
