// Command-line driver: dataset generation, join execution, oracle runs, and
// report emission. Exit codes: 0 success, 1 usage, 2 runtime.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "simjoin/engine.hpp"
#include "simjoin/generator.hpp"
#include "simjoin/metrics.hpp"
#include "simjoin/report_json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace simjoin;

namespace {

json load_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path.string());
  json j;
  in >> j;
  return j;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path.string());
  out << text;
}

struct CommonOptions {
  std::string input;
  std::string payload;
  std::string config_path;
  std::string metric = "l1";
  double delta = 0.0;
  int nodes = 15;
  long long k = 3200;
  int partitions = 60;
  int target_dim = 10;
  std::string sampling = "generative";
  std::string partition = "iterative";
  std::vector<std::string> families;
  int cells = 20;
  int clusters = 0;
  std::uint64_t seed = 0;
  int threads = 1;
};

void add_engine_options(CLI::App* cmd, CommonOptions& o, bool join_options) {
  cmd->add_option("--input", o.input, "dataset file");
  cmd->add_option("--payload", o.payload, "payload kind: vector|string|set");
  cmd->add_option("--config", o.config_path, "JSON config file; flags override it");
  cmd->add_option("--metric", o.metric, "metric: l1|l2|edit|jaccard");
  cmd->add_option("--nodes", o.nodes, "virtual node count");
  cmd->add_option("--k", o.k, "pivot sample size");
  cmd->add_option("--sampling", o.sampling, "random|dist|gen");
  cmd->add_option("--families", o.families, "candidate families for fitting");
  cmd->add_option("--cells", o.cells, "goodness-of-fit cell count");
  cmd->add_option("--seed", o.seed, "run seed");
  cmd->add_option("--threads", o.threads, "worker threads");
  if (join_options) {
    cmd->add_option("--delta", o.delta, "similarity threshold");
    cmd->add_option("--partitions", o.partitions, "partition count");
    cmd->add_option("--target-dim", o.target_dim, "target space dimension");
    cmd->add_option("--partition", o.partition, "iter|learn");
    cmd->add_option("--clusters", o.clusters,
                    "pivot label clusters (0 = ceil(sqrt(k)))");
  }
}

// A config file is either a bare config object or a full run report, whose
// echoed "config" block replays the run.
json load_config_json(const fs::path& path) {
  json j = load_json(path);
  if (j.contains("config")) return j["config"];
  return j;
}

// Precedence: defaults < JSON config file < explicit flags.
ClusterConfig resolve_config(const CLI::App* cmd, CommonOptions& o) {
  ClusterConfig cfg;
  if (!o.config_path.empty()) {
    const json j = load_config_json(o.config_path);
    cfg = cluster_config_from_json(j);
    if (o.input.empty() && j.contains("input")) o.input = j["input"].get<std::string>();
    if (o.payload.empty() && j.contains("payload")) {
      o.payload = j["payload"].get<std::string>();
    }
  }
  if (o.input.empty()) throw std::invalid_argument("no input dataset given");
  const bool flags_only = o.config_path.empty();

  auto seen = [&](const std::string& name) {
    return cmd->get_option_no_throw(name) && cmd->count(name) > 0;
  };
  auto take = [&](const std::string& name) { return flags_only || seen(name); };

  if (take("--metric")) cfg.metric = metric_from_string(o.metric);
  if (seen("--delta")) cfg.delta = o.delta;
  if (take("--nodes")) cfg.node_count = o.nodes;
  if (take("--k")) cfg.sample_size = o.k;
  if (cmd->get_option_no_throw("--partitions") && take("--partitions")) {
    cfg.partition_count = o.partitions;
  }
  if (cmd->get_option_no_throw("--target-dim") && take("--target-dim")) {
    cfg.target_dim = o.target_dim;
  }
  if (take("--sampling")) cfg.sampling = sampling_mode_from_string(o.sampling);
  if (cmd->get_option_no_throw("--partition") && take("--partition")) {
    cfg.partition = partition_mode_from_string(o.partition);
  }
  if (seen("--families")) {
    cfg.families.clear();
    for (const auto& f : o.families) cfg.families.push_back(family_from_string(f));
  }
  if (take("--cells")) cfg.cell_count = o.cells;
  if (seen("--clusters")) cfg.cluster_count = o.clusters;
  if (take("--seed")) cfg.seed = o.seed;
  if (take("--threads")) cfg.threads = o.threads;
  return cfg;
}

PayloadKind resolve_payload(const CommonOptions& o, MetricKind metric) {
  if (!o.payload.empty()) return payload_from_string(o.payload);
  return required_payload(metric);
}

// Object-drawing modes cannot draw more pivots than objects; shrink the
// request (and dependent knobs) to fit small inputs.
void clamp_to_dataset(ClusterConfig& cfg, const Dataset& ds,
                      std::vector<std::string>& notes) {
  const auto n = static_cast<long long>(ds.size());
  if (cfg.sample_size > n) {
    notes.push_back("k clamped from " + std::to_string(cfg.sample_size) + " to " +
                    std::to_string(n) + " (dataset size)");
    cfg.sample_size = n;
  }
  if (cfg.partition_count > cfg.sample_size) {
    notes.push_back("partitions clamped to k = " + std::to_string(cfg.sample_size));
    cfg.partition_count = static_cast<int>(cfg.sample_size);
  }
  if (cfg.target_dim > cfg.sample_size) {
    notes.push_back("target_dim clamped to k = " + std::to_string(cfg.sample_size));
    cfg.target_dim = static_cast<int>(cfg.sample_size);
  }
  if (cfg.node_count > n) {
    notes.push_back("nodes clamped to dataset size " + std::to_string(n));
    cfg.node_count = static_cast<int>(n);
  }
}

std::string format_pivots(const std::vector<DataObject>& pivots,
                          const std::vector<int>& provenance, PayloadKind kind) {
  std::string out;
  char buf[64];
  for (std::size_t i = 0; i < pivots.size(); ++i) {
    const std::string prov = provenance[i] == kGeneratedProvenance
                                 ? "generated"
                                 : std::to_string(provenance[i]);
    if (kind == PayloadKind::Vector) {
      out += std::to_string(pivots[i].id);
      const auto& v = std::get<Eigen::VectorXd>(pivots[i].payload);
      for (Eigen::Index d = 0; d < v.size(); ++d) {
        std::snprintf(buf, sizeof(buf), ",%.17g", v[d]);
        out += buf;
      }
      out += ',' + prov + '\n';
    } else {
      out += std::to_string(pivots[i].id) + '\t' + prov + '\t';
      if (kind == PayloadKind::String) {
        out += std::get<std::string>(pivots[i].payload);
      } else {
        const auto& toks = std::get<TokenSet>(pivots[i].payload);
        for (std::size_t t = 0; t < toks.size(); ++t) {
          if (t) out += ' ';
          out += toks[t];
        }
      }
      out += '\n';
    }
  }
  return out;
}

int cmd_join(const CLI::App* cmd, CommonOptions& o, const std::string& pairs_out,
             const std::string& report_out) {
  ClusterConfig cfg = resolve_config(cmd, o);
  const PayloadKind payload = resolve_payload(o, cfg.metric);
  const Dataset ds = read_dataset(o.input, payload);
  std::vector<std::string> notes;
  clamp_to_dataset(cfg, ds, notes);

  const JoinResult result = run_join(ds, cfg);
  if (!pairs_out.empty()) write_text(pairs_out, format_pairs_csv(result.pairs));

  json report = to_json(result.report);
  report["config"]["input"] = o.input;
  report["config"]["payload"] = to_string(payload);
  report["clamps"] = notes;
  if (!report_out.empty()) write_text(report_out, report.dump(2) + "\n");

  std::cout << "pairs: " << result.pairs.size()
            << "  verifications: " << result.report.verifications
            << "  mode: " << result.report.sampling_mode_effective << "\n";
  return 0;
}

int cmd_oracle(const CommonOptions& o, const std::string& pairs_out,
               const std::string& report_out) {
  const MetricKind metric = metric_from_string(o.metric);
  const PayloadKind payload = resolve_payload(o, metric);
  const Dataset ds = read_dataset(o.input, payload);
  const auto pairs = brute_force_join(ds, metric, o.delta);
  if (!pairs_out.empty()) write_text(pairs_out, format_pairs_csv(pairs));
  if (!report_out.empty()) {
    json report{{"input", o.input},
                {"metric", to_string(metric)},
                {"delta", o.delta},
                {"objects", ds.size()},
                {"pairs", pairs.size()}};
    write_text(report_out, report.dump(2) + "\n");
  }
  std::cout << "pairs: " << pairs.size() << "\n";
  return 0;
}

int cmd_sample(const CLI::App* cmd, CommonOptions& o,
               const std::string& pivots_out, const std::string& report_out,
               const std::string& manifest_path) {
  ClusterConfig cfg = resolve_config(cmd, o);
  const PayloadKind payload = resolve_payload(o, cfg.metric);
  const Dataset ds = read_dataset(o.input, payload);
  std::vector<std::string> notes;
  clamp_to_dataset(cfg, ds, notes);

  const SamplingPhaseResult sampled = run_sampling_phase(ds, cfg);
  if (!pivots_out.empty()) {
    write_text(pivots_out, format_pivots(sampled.pivot_objects, sampled.provenance,
                                         payload));
  }

  json report = to_json(sampled, cfg);
  report["config"]["input"] = o.input;
  report["config"]["payload"] = to_string(payload);
  report["clamps"] = notes;

  if (!manifest_path.empty()) {
    if (payload != PayloadKind::Vector) {
      throw std::runtime_error("sampling error against a manifest needs vector data");
    }
    const json manifest = load_json(manifest_path);
    const GeneratorSpec spec = generator_spec_from_json(manifest.at("spec"));
    const auto counts = manifest.at("component_counts").get<std::vector<long long>>();
    std::vector<Eigen::VectorXd> vectors;
    vectors.reserve(sampled.pivot_objects.size());
    for (const auto& p : sampled.pivot_objects) {
      vectors.push_back(std::get<Eigen::VectorXd>(p.payload));
    }
    const double err =
        sampling_error(vectors, mixture_marginal_cdf(spec, counts), spec.dim);
    report["sampling"]["sampling_error"] = err;
    std::cout << "sampling_error: " << err << "\n";
  }
  if (!report_out.empty()) write_text(report_out, report.dump(2) + "\n");
  std::cout << "pivots: " << sampled.pivot_objects.size()
            << "  mode: " << sampled.mode_effective << "\n";
  return 0;
}

int cmd_gen(const std::string& spec_path, const std::string& out_path,
            const std::string& manifest_out, long long count_flag, int dim_flag,
            std::uint64_t seed_flag, const CLI::App* cmd) {
  GeneratorSpec spec;
  if (!spec_path.empty()) {
    spec = generator_spec_from_json(load_json(spec_path));
  } else {
    spec.kind = PayloadKind::Vector;
    spec.dim = dim_flag;
    MixtureComponent c;
    c.family = Family::IndependentNormal;
    c.param1 = Eigen::ArrayXd::Zero(dim_flag);
    c.param2 = Eigen::ArrayXd::Ones(dim_flag);
    spec.components = {c};
  }
  if (cmd->count("--count") > 0 || spec_path.empty()) spec.count = count_flag;
  if (cmd->count("--dim") > 0) spec.dim = dim_flag;
  if (cmd->count("--seed") > 0 || spec_path.empty()) spec.seed = seed_flag;

  const GeneratedData data = generate(spec);
  write_dataset(data.dataset, out_path);
  if (!manifest_out.empty()) {
    json manifest{{"spec", to_json(spec)},
                  {"component_counts", data.component_counts},
                  {"objects", data.dataset.size()}};
    write_text(manifest_out, manifest.dump(2) + "\n");
  }
  std::cout << "objects: " << data.dataset.size() << "\n";
  return 0;
}

int cmd_report_diff(const std::string& left, const std::string& right) {
  auto read_pairs = [](const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_pairs_csv(ss.str());
  };
  const auto a = read_pairs(left);
  const auto b = read_pairs(right);
  std::vector<PairHit> only_a, only_b;
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(),
                      std::back_inserter(only_a));
  std::set_difference(b.begin(), b.end(), a.begin(), a.end(),
                      std::back_inserter(only_b));
  for (const auto& p : only_a) {
    std::cout << "only in " << left << ": " << p.a << "," << p.b << "\n";
  }
  for (const auto& p : only_b) {
    std::cout << "only in " << right << ": " << p.a << "," << p.b << "\n";
  }
  std::cout << "left: " << a.size() << " pairs, right: " << b.size()
            << " pairs, differences: " << only_a.size() + only_b.size() << "\n";
  return only_a.empty() && only_b.empty() ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"metric similarity join over a simulated cluster"};
  app.require_subcommand(1);

  CommonOptions join_opts;
  std::string join_pairs, join_report;
  CLI::App* join = app.add_subcommand("join", "run the three-phase similarity join");
  add_engine_options(join, join_opts, true);
  join->add_option("--pairs", join_pairs, "output pairs CSV");
  join->add_option("--report", join_report, "output report JSON");

  CommonOptions oracle_opts;
  std::string oracle_pairs, oracle_report;
  CLI::App* oracle = app.add_subcommand("oracle", "exhaustive all-pairs join");
  oracle->add_option("--input", oracle_opts.input, "dataset file")->required();
  oracle->add_option("--payload", oracle_opts.payload, "payload kind");
  oracle->add_option("--metric", oracle_opts.metric, "metric");
  oracle->add_option("--delta", oracle_opts.delta, "similarity threshold");
  oracle->add_option("--pairs", oracle_pairs, "output pairs CSV");
  oracle->add_option("--report", oracle_report, "output report JSON");

  CommonOptions sample_opts;
  std::string sample_pivots, sample_report, sample_manifest;
  CLI::App* sample = app.add_subcommand("sample", "run the sampling stages only");
  add_engine_options(sample, sample_opts, false);
  sample->add_option("--pivots", sample_pivots, "output pivots file");
  sample->add_option("--report", sample_report, "output report JSON");
  sample->add_option("--manifest", sample_manifest,
                     "generator manifest for sampling-error evaluation");

  std::string gen_spec, gen_out, gen_manifest;
  long long gen_count = 1000;
  int gen_dim = 2;
  std::uint64_t gen_seed = 0;
  CLI::App* gen = app.add_subcommand("gen", "generate a synthetic dataset");
  gen->add_option("--spec", gen_spec, "generator spec JSON");
  gen->add_option("--out", gen_out, "output dataset file")->required();
  gen->add_option("--manifest", gen_manifest, "output manifest JSON");
  gen->add_option("--count", gen_count, "object count (without --spec)");
  gen->add_option("--dim", gen_dim, "vector dimension (without --spec)");
  gen->add_option("--seed", gen_seed, "generator seed");

  std::string diff_left, diff_right;
  CLI::App* diff = app.add_subcommand("report-diff", "compare two pairs files");
  diff->add_option("left", diff_left, "pairs CSV")->required();
  diff->add_option("right", diff_right, "pairs CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (join->parsed()) return cmd_join(join, join_opts, join_pairs, join_report);
    if (oracle->parsed()) return cmd_oracle(oracle_opts, oracle_pairs, oracle_report);
    if (sample->parsed()) {
      return cmd_sample(sample, sample_opts, sample_pivots, sample_report,
                        sample_manifest);
    }
    if (gen->parsed()) {
      return cmd_gen(gen_spec, gen_out, gen_manifest, gen_count, gen_dim, gen_seed, gen);
    }
    if (diff->parsed()) return cmd_report_diff(diff_left, diff_right);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
