#include "cws/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "cws/error.hpp"

namespace cws {

ServiceConfig load_config(const std::filesystem::path& path) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(path.string(), tree);
  } catch (const pt::ini_parser_error& e) {
    throw CwsError(ErrorCode::kValidation, std::string("config: ") + e.what());
  }

  ServiceConfig config;
  try {
    for (const auto& [section, body] : tree) {
      if (body.empty()) throw CwsError(ErrorCode::kValidation, "config: key '" + section + "' is outside a section");
      for (const auto& [key, value] : body) {
        const std::string name = section + "." + key;
        if (name == "predictor.alpha") config.predictor.alpha = value.get_value<double>();
        else if (name == "predictor.beta") config.predictor.beta = value.get_value<double>();
        else if (name == "predictor.default_runtime_s") config.predictor.default_runtime_s = value.get_value<double>();
        else if (name == "predictor.share_across_workflows") config.predictor.share_across_workflows = value.get_value<bool>();
        else if (name == "memory.safety_factor") config.memory.safety_factor = value.get_value<double>();
        else if (name == "memory.doubling_cap") config.memory.doubling_cap = value.get_value<int>();
        else if (name == "memory.floor_bytes") config.memory.floor_bytes = value.get_value<Bytes>();
        else if (name == "server.poll_timeout_ms") config.poll_timeout_ms = value.get_value<std::int64_t>();
        else if (name == "scheduler.group_match_max_groups") config.group_match_max_groups = value.get_value<int>();
        else throw CwsError(ErrorCode::kValidation, "config: unknown key '" + name + "'");
      }
    }
  } catch (const pt::ptree_bad_data& e) {
    throw CwsError(ErrorCode::kValidation, std::string("config: ") + e.what());
  }
  return config;
}

}  // namespace cws
