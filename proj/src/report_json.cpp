#include "simjoin/report_json.hpp"

#include <cmath>

namespace simjoin {

namespace {

using nlohmann::json;

// JSON has no infinities; unbounded cell edges serialize as signed strings.
json bound(double v) {
  if (std::isfinite(v)) return v;
  return v > 0 ? "inf" : "-inf";
}

json bounds(const Eigen::ArrayXd& a) {
  json out = json::array();
  for (Eigen::Index i = 0; i < a.size(); ++i) out.push_back(bound(a[i]));
  return out;
}

json numbers(const Eigen::ArrayXd& a) {
  json out = json::array();
  for (Eigen::Index i = 0; i < a.size(); ++i) out.push_back(a[i]);
  return out;
}

Eigen::ArrayXd array_from(const json& j) {
  Eigen::ArrayXd a(j.size());
  Eigen::Index i = 0;
  for (const auto& v : j) a[i++] = v.get<double>();
  return a;
}

json eta_json(const EfdModel& model) {
  json eta;
  switch (model.family) {
    case Family::IndependentNormal:
      eta["mean"] = numbers(model.param1);
      eta["var"] = numbers(model.param2);
      break;
    case Family::IndependentExponential:
      eta["rate"] = numbers(model.param1);
      break;
    case Family::IndependentGamma:
      eta["shape"] = numbers(model.param1);
      eta["rate"] = numbers(model.param2);
      break;
  }
  return eta;
}

}  // namespace

json to_json(const ClusterConfig& config) {
  json families = json::array();
  for (Family f : config.families) families.push_back(to_string(f));
  return json{{"nodes", config.node_count},
              {"k", config.sample_size},
              {"partitions", config.partition_count},
              {"target_dim", config.target_dim},
              {"metric", to_string(config.metric)},
              {"delta", config.delta},
              {"sampling", to_string(config.sampling)},
              {"partition", to_string(config.partition)},
              {"families", families},
              {"cells", config.cell_count},
              {"clusters", config.cluster_count},
              {"seed", config.seed},
              {"threads", config.threads}};
}

ClusterConfig cluster_config_from_json(const json& j) {
  ClusterConfig c;
  if (j.contains("nodes")) c.node_count = j["nodes"].get<int>();
  if (j.contains("k")) c.sample_size = j["k"].get<long long>();
  if (j.contains("partitions")) c.partition_count = j["partitions"].get<int>();
  if (j.contains("target_dim")) c.target_dim = j["target_dim"].get<int>();
  if (j.contains("metric")) c.metric = metric_from_string(j["metric"].get<std::string>());
  if (j.contains("delta")) c.delta = j["delta"].get<double>();
  if (j.contains("sampling")) {
    c.sampling = sampling_mode_from_string(j["sampling"].get<std::string>());
  }
  if (j.contains("partition")) {
    c.partition = partition_mode_from_string(j["partition"].get<std::string>());
  }
  if (j.contains("families")) {
    c.families.clear();
    for (const auto& f : j["families"]) {
      c.families.push_back(family_from_string(f.get<std::string>()));
    }
  }
  if (j.contains("cells")) c.cell_count = j["cells"].get<int>();
  if (j.contains("clusters")) c.cluster_count = j["clusters"].get<int>();
  if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("threads")) c.threads = j["threads"].get<int>();
  return c;
}

json to_json(const FitResult& fit) {
  return json{{"family", to_string(fit.model.family)},
              {"eta", eta_json(fit.model)},
              {"k_star", fit.k_star},
              {"dof", fit.dof},
              {"confidence", fit.confidence}};
}

json to_json(const NodeReport& node) {
  json out{{"node_id", node.node_id},
           {"cardinality", node.cardinality},
           {"degraded", node.degraded},
           {"allocated_samples", node.allocated_samples}};
  if (!node.degrade_reason.empty()) out["degrade_reason"] = node.degrade_reason;
  if (node.fit) out["fit"] = to_json(*node.fit);
  return out;
}

json to_json(const SplitTree& tree) {
  json nodes = json::array();
  for (const auto& n : tree.nodes) {
    if (n.leaf >= 0) {
      nodes.push_back(json{{"leaf", n.leaf}});
    } else {
      nodes.push_back(
          json{{"dim", n.dim}, {"value", n.value}, {"left", n.left}, {"right", n.right}});
    }
  }
  return json{{"root", tree.root}, {"leaf_count", tree.leaf_count}, {"nodes", nodes}};
}

json to_json(const CostReport& cost) {
  return json{{"inner", cost.inner},
              {"outer", cost.outer},
              {"total", cost.total},
              {"total_pairs", cost.total_pairs},
              {"max_pairs", cost.max_pairs},
              {"mean_pairs", cost.mean_pairs},
              {"stdev_pairs", cost.stdev_pairs},
              {"kernel_sizes", cost.kernel_sizes},
              {"whole_sizes", cost.whole_sizes},
              {"pair_counts", cost.pair_counts}};
}

json to_json(const JoinReport& report) {
  json nodes = json::array();
  for (const auto& n : report.nodes) nodes.push_back(to_json(n));

  json areas = json::array();
  for (std::size_t h = 0; h < report.areas.size(); ++h) {
    const AreaReport& ar = report.areas[h];
    json a{{"leaf", h},
           {"cell_lo", bounds(ar.cell.lo)},
           {"cell_hi", bounds(ar.cell.hi)},
           {"kernel_size", ar.kernel_size},
           {"whole_size", ar.whole_size}};
    if (ar.pivot_box) {
      a["pivot_box_lo"] = bounds(ar.pivot_box->lo);
      a["pivot_box_hi"] = bounds(ar.pivot_box->hi);
    }
    areas.push_back(std::move(a));
  }

  json out{
      {"config", to_json(report.config)},
      {"dataset",
       {{"objects", report.object_count}, {"payload", to_string(report.payload)}}},
      {"nodes", nodes},
      {"sampling",
       {{"mode", to_string(report.config.sampling)},
        {"mode_effective", report.sampling_mode_effective},
        {"gibbs_iterations", report.gibbs.iterations},
        {"gibbs_rejections", report.gibbs.rejections},
        {"warnings", report.sampling_warnings}}},
      {"partition_layout", {{"tree", to_json(report.tree)}, {"areas", areas}}},
      {"cost", to_json(report.cost)},
      {"verifications", report.verifications},
      {"bytes",
       {{"sampling_broadcast", report.bytes.sampling_broadcast},
        {"sampling_data", report.bytes.sampling_data},
        {"shuffle", report.bytes.shuffle}}},
      {"timings_ms",
       {{"sample", report.millis.sample},
        {"map", report.millis.map},
        {"reduce", report.millis.reduce}}},
      {"result", {{"pairs", report.pair_count}}}};
  if (report.global_confidence) {
    out["global_confidence"] = *report.global_confidence;
  } else {
    out["global_confidence"] = nullptr;
  }
  return out;
}

json to_json(const SamplingPhaseResult& sampling, const ClusterConfig& config) {
  json nodes = json::array();
  for (const auto& n : sampling.nodes) nodes.push_back(to_json(n));
  json out{{"config", to_json(config)},
           {"nodes", nodes},
           {"sampling",
            {{"mode", to_string(config.sampling)},
             {"mode_effective", sampling.mode_effective},
             {"pivots", sampling.pivot_objects.size()},
             {"gibbs_iterations", sampling.gibbs.iterations},
             {"gibbs_rejections", sampling.gibbs.rejections},
             {"warnings", sampling.warnings}}},
           {"bytes",
            {{"sampling_broadcast", sampling.bytes_broadcast},
             {"sampling_data", sampling.bytes_data}}}};
  if (sampling.global_confidence) {
    out["global_confidence"] = *sampling.global_confidence;
  } else {
    out["global_confidence"] = nullptr;
  }
  return out;
}

namespace {

json component_json(const MixtureComponent& c) {
  json out{{"family", to_string(c.family)}, {"weight", c.weight}};
  switch (c.family) {
    case Family::IndependentNormal:
      out["mean"] = numbers(c.param1);
      out["var"] = numbers(c.param2);
      break;
    case Family::IndependentExponential:
      out["rate"] = numbers(c.param1);
      break;
    case Family::IndependentGamma:
      out["shape"] = numbers(c.param1);
      out["rate"] = numbers(c.param2);
      break;
  }
  return out;
}

MixtureComponent component_from_json(const json& j) {
  MixtureComponent c;
  c.family = family_from_string(j.at("family").get<std::string>());
  if (j.contains("weight")) c.weight = j["weight"].get<double>();
  switch (c.family) {
    case Family::IndependentNormal:
      c.param1 = array_from(j.at("mean"));
      c.param2 = array_from(j.at("var"));
      break;
    case Family::IndependentExponential:
      c.param1 = array_from(j.at("rate"));
      break;
    case Family::IndependentGamma:
      c.param1 = array_from(j.at("shape"));
      c.param2 = array_from(j.at("rate"));
      break;
  }
  return c;
}

}  // namespace

json to_json(const GeneratorSpec& spec) {
  json components = json::array();
  for (const auto& c : spec.components) components.push_back(component_json(c));
  json out{{"payload", to_string(spec.kind)},
           {"count", spec.count},
           {"dim", spec.dim},
           {"seed", spec.seed},
           {"components", components}};
  if (!spec.node_components.empty()) out["node_components"] = spec.node_components;
  if (spec.kind == PayloadKind::String) {
    out["string"] = json{{"centers", spec.string_spec.centers},
                         {"center_len_min", spec.string_spec.center_len_min},
                         {"center_len_max", spec.string_spec.center_len_max},
                         {"mutations_max", spec.string_spec.mutations_max},
                         {"alphabet", spec.string_spec.alphabet}};
  }
  if (spec.kind == PayloadKind::TokenSet) {
    out["set"] = json{{"universe", spec.set_spec.universe},
                      {"centers", spec.set_spec.centers},
                      {"set_size", spec.set_spec.set_size},
                      {"swaps_max", spec.set_spec.swaps_max}};
  }
  return out;
}

GeneratorSpec generator_spec_from_json(const json& j) {
  GeneratorSpec spec;
  spec.kind = payload_from_string(j.at("payload").get<std::string>());
  spec.count = j.at("count").get<long long>();
  if (j.contains("dim")) spec.dim = j["dim"].get<int>();
  if (j.contains("seed")) spec.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("components")) {
    for (const auto& c : j["components"]) {
      spec.components.push_back(component_from_json(c));
    }
  }
  if (j.contains("node_components")) {
    spec.node_components = j["node_components"].get<std::vector<int>>();
  }
  if (j.contains("string")) {
    const auto& s = j["string"];
    if (s.contains("centers")) spec.string_spec.centers = s["centers"].get<int>();
    if (s.contains("center_len_min"))
      spec.string_spec.center_len_min = s["center_len_min"].get<int>();
    if (s.contains("center_len_max"))
      spec.string_spec.center_len_max = s["center_len_max"].get<int>();
    if (s.contains("mutations_max"))
      spec.string_spec.mutations_max = s["mutations_max"].get<int>();
    if (s.contains("alphabet"))
      spec.string_spec.alphabet = s["alphabet"].get<std::string>();
  }
  if (j.contains("set")) {
    const auto& s = j["set"];
    if (s.contains("universe")) spec.set_spec.universe = s["universe"].get<int>();
    if (s.contains("centers")) spec.set_spec.centers = s["centers"].get<int>();
    if (s.contains("set_size")) spec.set_spec.set_size = s["set_size"].get<int>();
    if (s.contains("swaps_max")) spec.set_spec.swaps_max = s["swaps_max"].get<int>();
  }
  return spec;
}

}  // namespace simjoin
