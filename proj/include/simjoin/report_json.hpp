#pragma once

#include <json.hpp>

#include "simjoin/engine.hpp"
#include "simjoin/generator.hpp"

namespace simjoin {

// JSON report field names are part of the tool's interface; see README.md.
nlohmann::json to_json(const ClusterConfig& config);
ClusterConfig cluster_config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const FitResult& fit);
nlohmann::json to_json(const NodeReport& node);
nlohmann::json to_json(const SplitTree& tree);
nlohmann::json to_json(const CostReport& cost);
nlohmann::json to_json(const JoinReport& report);
nlohmann::json to_json(const SamplingPhaseResult& sampling, const ClusterConfig& config);

nlohmann::json to_json(const GeneratorSpec& spec);
GeneratorSpec generator_spec_from_json(const nlohmann::json& j);

}  // namespace simjoin
