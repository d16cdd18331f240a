#include "simjoin/engine.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "simjoin/rng.hpp"

namespace simjoin {

const char* to_string(SamplingMode mode) {
  switch (mode) {
    case SamplingMode::Random: return "random";
    case SamplingMode::DistributionAware: return "distribution_aware";
    case SamplingMode::Generative: return "generative";
  }
  return "?";
}

const char* to_string(PartitionMode mode) {
  switch (mode) {
    case PartitionMode::Iterative: return "iterative";
    case PartitionMode::Learning: return "learning";
  }
  return "?";
}

SamplingMode sampling_mode_from_string(const std::string& name) {
  if (name == "random") return SamplingMode::Random;
  if (name == "distribution_aware" || name == "dist") return SamplingMode::DistributionAware;
  if (name == "generative" || name == "gen") return SamplingMode::Generative;
  throw std::invalid_argument("unknown sampling mode: " + name);
}

PartitionMode partition_mode_from_string(const std::string& name) {
  if (name == "iterative" || name == "iter") return PartitionMode::Iterative;
  if (name == "learning" || name == "learn") return PartitionMode::Learning;
  throw std::invalid_argument("unknown partition mode: " + name);
}

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

// Runs fn(begin, end) over [0, n) split into contiguous chunks, one thread
// per chunk. Results must be written to disjoint, preallocated slots.
void parallel_chunks(std::size_t n, int threads,
                     const std::function<void(std::size_t, std::size_t)>& fn) {
  if (threads <= 1 || n < 2) {
    fn(0, n);
    return;
  }
  const auto t = static_cast<std::size_t>(std::min<long long>(threads, static_cast<long long>(n)));
  std::vector<std::thread> pool;
  pool.reserve(t);
  const std::size_t chunk = (n + t - 1) / t;
  for (std::size_t i = 0; i < t; ++i) {
    const std::size_t begin = i * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back(fn, begin, end);
  }
  for (auto& th : pool) th.join();
}

long long summary_bytes(const NodeSummary& s) {
  // family tag + per-dimension parameters + confidence + cardinality
  return 8 + 8 * (s.model.param1.size() + s.model.param2.size()) + 8 + 8;
}

std::vector<std::vector<std::size_t>> shard_round_robin(const Dataset& ds, int m) {
  std::vector<std::vector<std::size_t>> shards(static_cast<std::size_t>(m));
  for (std::size_t i = 0; i < ds.objects.size(); ++i) {
    shards[i % static_cast<std::size_t>(m)].push_back(i);
  }
  return shards;
}

Eigen::MatrixXd shard_matrix(const Dataset& ds, const std::vector<std::size_t>& shard) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(shard.size()), ds.dim);
  for (std::size_t r = 0; r < shard.size(); ++r) {
    m.row(static_cast<Eigen::Index>(r)) =
        std::get<Eigen::VectorXd>(ds.objects[shard[r]].payload).transpose();
  }
  return m;
}

std::vector<std::size_t> uniform_without_replacement(std::size_t population,
                                                     long long k,
                                                     std::mt19937_64& rng) {
  std::vector<std::size_t> idx(population);
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<std::size_t> out;
  out.reserve(static_cast<std::size_t>(k));
  for (long long i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(i),
                                                    population - 1);
    const std::size_t j = pick(rng);
    std::swap(idx[static_cast<std::size_t>(i)], idx[j]);
    out.push_back(idx[static_cast<std::size_t>(i)]);
  }
  return out;
}

void validate_config(const Dataset& ds, const ClusterConfig& cfg) {
  if (ds.objects.empty()) throw std::invalid_argument("dataset is empty");
  if (required_payload(cfg.metric) != ds.kind) {
    throw std::invalid_argument("metric requires payload kind '" +
                                std::string(to_string(required_payload(cfg.metric))) +
                                "' but dataset holds '" + to_string(ds.kind) + "'");
  }
  if (cfg.node_count < 1) throw std::invalid_argument("node count must be at least 1");
  if (static_cast<std::size_t>(cfg.node_count) > ds.objects.size()) {
    throw std::invalid_argument("more nodes than objects");
  }
  if (cfg.partition_count < 1 || cfg.sample_size < cfg.partition_count) {
    throw std::invalid_argument("need sample_size >= partition_count >= 1");
  }
  if (cfg.target_dim < 1 || cfg.target_dim > cfg.sample_size) {
    throw std::invalid_argument("need 1 <= target_dim <= sample_size");
  }
  if (!(cfg.delta >= 0.0)) throw std::invalid_argument("delta must be non-negative");
  if (cfg.families.empty()) throw std::invalid_argument("family list is empty");
  if (cfg.threads < 1) throw std::invalid_argument("threads must be at least 1");

  const bool draws_objects =
      ds.kind != PayloadKind::Vector || cfg.sampling != SamplingMode::Generative;
  if (draws_objects && cfg.sample_size > static_cast<long long>(ds.objects.size())) {
    throw std::invalid_argument("sample size exceeds dataset size");
  }
}

struct SamplingOutcome {
  std::vector<DataObject> pivot_objects;
  std::vector<int> provenance;
  std::string mode_effective;
  std::vector<std::string> warnings;
  GibbsStats gibbs;
  long long bytes_broadcast = 0;
  long long bytes_data = 0;
};

// Uniform node-local draws without replacement, used for string/set payloads
// and for nodes whose fit was rejected.
void uniform_node_draw(const Dataset& ds, const std::vector<std::size_t>& shard,
                       long long lc, int node_id, std::uint64_t seed,
                       SamplingOutcome& out) {
  auto rng = phase_rng(seed, "sample.node." + std::to_string(node_id));
  if (lc > static_cast<long long>(shard.size())) {
    // Allocation can exceed the shard when other nodes carried low
    // confidence; fall back to drawing with replacement.
    std::uniform_int_distribution<std::size_t> pick(0, shard.size() - 1);
    for (long long i = 0; i < lc; ++i) {
      out.pivot_objects.push_back(ds.objects[shard[pick(rng)]]);
      out.provenance.push_back(node_id);
    }
    out.warnings.push_back("node " + std::to_string(node_id) +
                           ": allocation exceeds shard, drew with replacement");
    return;
  }
  for (std::size_t r : uniform_without_replacement(shard.size(), lc, rng)) {
    out.pivot_objects.push_back(ds.objects[shard[r]]);
    out.provenance.push_back(node_id);
  }
}

SamplingOutcome sample_pivots(const Dataset& ds, const ClusterConfig& cfg,
                              const std::vector<std::vector<std::size_t>>& shards,
                              std::vector<NodeReport>& nodes,
                              const std::vector<NodeSummary>& summaries) {
  SamplingOutcome out;
  const int m = cfg.node_count;
  const long long k = cfg.sample_size;

  if (cfg.sampling == SamplingMode::Random) {
    out.mode_effective = "random";
    auto rng = phase_rng(cfg.seed, "sample.random");
    const auto rows = uniform_without_replacement(ds.objects.size(), k, rng);
    for (std::size_t r : rows) {
      out.pivot_objects.push_back(ds.objects[r]);
      out.provenance.push_back(static_cast<int>(r % static_cast<std::size_t>(m)));
    }
    // The baseline ships each sampled object to every other node.
    for (std::size_t r : rows) {
      out.bytes_data += payload_bytes(ds.objects[r]) * (m - 1);
    }
    return out;
  }

  // Every participating node broadcasts <model, confidence, cardinality>;
  // degraded nodes broadcast their cardinality only.
  for (const auto& s : summaries) out.bytes_broadcast += summary_bytes(s) * (m - 1);
  for (const auto& n : nodes) {
    if (n.degraded) out.bytes_broadcast += 8LL * (m - 1);
  }

  // Allocation over all nodes; degraded nodes weigh in with confidence 1.
  std::vector<NodeSummary> alloc_view;
  alloc_view.reserve(nodes.size());
  for (const auto& n : nodes) {
    NodeSummary s;
    s.node_id = n.node_id;
    s.cardinality = std::max<long long>(1, n.cardinality);
    s.confidence = n.degraded ? 1.0 : n.fit->confidence;
    alloc_view.push_back(std::move(s));
  }
  const std::vector<long long> alloc = allocate_sample_sizes(alloc_view, k);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    nodes[i].allocated_samples = alloc[i];
  }

  const bool all_degraded = summaries.empty();
  if (cfg.sampling == SamplingMode::Generative && !all_degraded) {
    out.mode_effective = "generative";
    // Degraded nodes contribute their allocation as uniform local draws; the
    // rest is synthesized from the fitted mixture.
    long long generated = k;
    for (const auto& n : nodes) {
      if (!n.degraded || n.allocated_samples == 0) continue;
      generated -= n.allocated_samples;
      const std::size_t before = out.pivot_objects.size();
      uniform_node_draw(ds, shards[static_cast<std::size_t>(n.node_id)],
                        n.allocated_samples, n.node_id, cfg.seed, out);
      out.warnings.push_back("node " + std::to_string(n.node_id) +
                             " degraded to uniform sampling: " + n.degrade_reason);
      for (std::size_t i = before; i < out.pivot_objects.size(); ++i) {
        out.bytes_data += payload_bytes(out.pivot_objects[i]) * (m - 1);
      }
    }
    if (generated > 0) {
      auto rng = phase_rng(cfg.seed, "sample.gibbs");
      PivotSet gen = gibbs_sample(summaries, generated, rng, &out.gibbs);
      std::uint64_t next_id = ds.objects.back().id + 1;
      for (auto& v : gen.pivots) {
        out.pivot_objects.push_back({next_id++, std::move(v)});
        out.provenance.push_back(kGeneratedProvenance);
      }
    }
    if (out.mode_effective == "generative" &&
        std::any_of(nodes.begin(), nodes.end(),
                    [](const NodeReport& n) { return n.degraded; })) {
      out.mode_effective = "generative+uniform_fallback";
    }
    return out;
  }

  // Distribution-aware stratified draws per node (or uniform everywhere when
  // no node holds a fit: string/set payloads and fully degraded runs).
  out.mode_effective = all_degraded ? "uniform_per_node" : "distribution_aware";
  if (cfg.sampling == SamplingMode::Generative) {
    out.mode_effective = "uniform_per_node";
    out.warnings.push_back("no node produced a usable fit; generative sampling "
                           "fell back to uniform node-local draws");
  }
  for (const auto& n : nodes) {
    if (n.allocated_samples == 0) continue;
    const auto& shard = shards[static_cast<std::size_t>(n.node_id)];
    if (n.degraded) {
      uniform_node_draw(ds, shard, n.allocated_samples, n.node_id, cfg.seed, out);
      if (!n.degrade_reason.empty()) {
        out.warnings.push_back("node " + std::to_string(n.node_id) +
                               " degraded to uniform sampling: " + n.degrade_reason);
      }
    } else {
      auto rng = phase_rng(cfg.seed, "sample.node." + std::to_string(n.node_id));
      const NodeSummary* summary = nullptr;
      for (const auto& s : summaries) {
        if (s.node_id == n.node_id) summary = &s;
      }
      const Eigen::MatrixXd data = shard_matrix(ds, shard);
      StratifiedSample draw =
          distribution_aware_sample(data, *summary, n.allocated_samples, rng);
      for (const auto& w : draw.warnings) {
        out.warnings.push_back("node " + std::to_string(n.node_id) + ": " + w);
      }
      for (Eigen::Index r : draw.rows) {
        out.pivot_objects.push_back(ds.objects[shard[static_cast<std::size_t>(r)]]);
        out.provenance.push_back(n.node_id);
      }
    }
    // Each node ships its local samples to the other nodes.
    for (std::size_t i = out.pivot_objects.size() -
                         static_cast<std::size_t>(n.allocated_samples);
         i < out.pivot_objects.size(); ++i) {
      out.bytes_data += payload_bytes(out.pivot_objects[i]) * (m - 1);
    }
  }
  return out;
}

}  // namespace

std::vector<PairHit> brute_force_join(const Dataset& dataset, MetricKind metric,
                                      double delta) {
  std::vector<PairHit> out;
  const auto n = dataset.objects.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = distance(metric, dataset.objects[i], dataset.objects[j]);
      if (d <= delta) {
        out.push_back({std::min(dataset.objects[i].id, dataset.objects[j].id),
                       std::max(dataset.objects[i].id, dataset.objects[j].id), d});
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::size_t> random_sample_baseline(const Dataset& dataset, long long k,
                                                std::uint64_t seed) {
  if (k < 0 || k > static_cast<long long>(dataset.objects.size())) {
    throw std::invalid_argument("sample size exceeds dataset size");
  }
  auto rng = phase_rng(seed, "sample.random");
  return uniform_without_replacement(dataset.objects.size(), k, rng);
}

SamplingPhaseResult run_sampling_phase(const Dataset& dataset,
                                       const ClusterConfig& config) {
  validate_config(dataset, config);
  SamplingPhaseResult out;
  const int m = config.node_count;
  const auto shards = shard_round_robin(dataset, m);

  // Stage 1+2: per-node distribution fit and confidence (vector payloads).
  std::vector<NodeSummary> summaries;
  out.nodes.resize(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    NodeReport& nr = out.nodes[static_cast<std::size_t>(i)];
    nr.node_id = i;
    nr.cardinality = static_cast<long long>(shards[static_cast<std::size_t>(i)].size());
    if (dataset.kind != PayloadKind::Vector) {
      nr.degraded = true;
      nr.degrade_reason = "distribution fitting is defined for vector payloads";
      continue;
    }
    try {
      const Eigen::MatrixXd data = shard_matrix(dataset, shards[static_cast<std::size_t>(i)]);
      FitResult fit = fit_and_test(data, config.families, config.cell_count);
      // A confidence this low means every candidate family was rejected by
      // the test; sampling from such a model would mostly produce rejections,
      // so the node falls back to uniform draws.
      if (fit.confidence < kFitRejectionFloor) {
        nr.degraded = true;
        nr.degrade_reason = "fit rejected: confidence " +
                            std::to_string(fit.confidence) + " below " +
                            std::to_string(kFitRejectionFloor);
        nr.fit = fit;
      } else {
        nr.fit = fit;
        summaries.push_back({i, fit.model, fit.confidence, nr.cardinality});
      }
    } catch (const FitError& e) {
      nr.degraded = true;
      nr.degrade_reason = e.what();
    }
  }
  {
    std::vector<FitResult> fits;
    for (const auto& n : out.nodes) {
      if (n.fit) fits.push_back(*n.fit);
    }
    if (!fits.empty()) out.global_confidence = global_confidence(fits);
  }

  // Stage 3: pivots.
  SamplingOutcome sampled = sample_pivots(dataset, config, shards, out.nodes, summaries);
  out.pivot_objects = std::move(sampled.pivot_objects);
  out.provenance = std::move(sampled.provenance);
  out.mode_effective = std::move(sampled.mode_effective);
  out.warnings = std::move(sampled.warnings);
  out.gibbs = sampled.gibbs;
  out.bytes_broadcast = sampled.bytes_broadcast;
  out.bytes_data = sampled.bytes_data;
  return out;
}

JoinResult run_join(const Dataset& dataset, const ClusterConfig& config) {
  JoinResult result;
  JoinReport& report = result.report;
  report.config = config;
  report.payload = dataset.kind;
  report.object_count = static_cast<long long>(dataset.objects.size());

  const auto t_sample = Clock::now();
  SamplingPhaseResult sampled = run_sampling_phase(dataset, config);
  report.nodes = std::move(sampled.nodes);
  report.global_confidence = sampled.global_confidence;
  report.sampling_mode_effective = sampled.mode_effective;
  report.sampling_warnings = sampled.warnings;
  report.gibbs = sampled.gibbs;
  report.bytes.sampling_broadcast = sampled.bytes_broadcast;
  report.bytes.sampling_data = sampled.bytes_data;
  report.millis.sample = elapsed_ms(t_sample);

  const auto t_map = Clock::now();

  // Anchors and the split tree over mapped pivots.
  DimensionalPivots anchors;
  {
    auto rng = phase_rng(config.seed, "anchors");
    const auto rows = uniform_without_replacement(sampled.pivot_objects.size(),
                                                  config.target_dim, rng);
    for (std::size_t r : rows) anchors.anchors.push_back(sampled.pivot_objects[r]);
  }
  std::vector<Eigen::VectorXd> pivots_target(sampled.pivot_objects.size());
  parallel_chunks(sampled.pivot_objects.size(), config.threads,
                  [&](std::size_t begin, std::size_t end) {
                    for (std::size_t i = begin; i < end; ++i) {
                      pivots_target[i] =
                          map_to_target(sampled.pivot_objects[i], anchors, config.metric);
                    }
                  });

  SplitTree tree;
  if (config.partition == PartitionMode::Iterative) {
    auto rng = phase_rng(config.seed, "partition.tree");
    tree = iterative_partition(pivots_target, config.partition_count, rng);
  } else {
    const int clusters =
        config.cluster_count > 0
            ? std::min<int>(config.cluster_count,
                            static_cast<int>(sampled.pivot_objects.size()))
            : static_cast<int>(std::ceil(std::sqrt(
                  static_cast<double>(sampled.pivot_objects.size()))));
    const std::vector<int> labels =
        label_pivots(sampled.pivot_objects, config.metric, clusters);
    tree = learning_partition(pivots_target, labels, config.partition_count);
  }

  const std::vector<AreaBox> cells = leaf_cells(tree, config.target_dim);

  // Map phase: target embedding and partition assignment per object. The
  // expansion carries a hair of slack so coordinate rounding at exact-delta
  // boundaries cannot drop a candidate; verification filters the extras.
  const double expand = config.delta + 1e-9 * (1.0 + config.delta);
  std::vector<PartitionAssignment> assignments(dataset.objects.size());
  parallel_chunks(dataset.objects.size(), config.threads,
                  [&](std::size_t begin, std::size_t end) {
                    for (std::size_t i = begin; i < end; ++i) {
                      const Eigen::VectorXd t =
                          map_to_target(dataset.objects[i], anchors, config.metric);
                      assignments[i] = assign(dataset.objects[i].id, t, tree, cells,
                                              Threshold{expand});
                    }
                  });
  report.millis.map = elapsed_ms(t_map);

  const auto t_reduce = Clock::now();
  const int p = tree.leaf_count;
  std::vector<std::vector<std::size_t>> kernel_members(static_cast<std::size_t>(p));
  std::vector<std::vector<std::size_t>> whole_members(static_cast<std::size_t>(p));
  for (std::size_t i = 0; i < assignments.size(); ++i) {
    kernel_members[static_cast<std::size_t>(assignments[i].kernel)].push_back(i);
    for (int h : assignments[i].whole) {
      whole_members[static_cast<std::size_t>(h)].push_back(i);
      report.bytes.shuffle += payload_bytes(dataset.objects[i]);
    }
  }

  // Reduce phase: verify V_h x W_h per partition; pairs inside the kernel are
  // ordered by id to avoid double work within one partition.
  std::vector<std::vector<PairHit>> found(static_cast<std::size_t>(p));
  std::vector<long long> verifications(static_cast<std::size_t>(p), 0);
  parallel_chunks(static_cast<std::size_t>(p), config.threads,
                  [&](std::size_t begin, std::size_t end) {
    for (std::size_t h = begin; h < end; ++h) {
      const auto& kernel = kernel_members[h];
      const auto& whole = whole_members[h];
      auto& hits = found[h];
      long long checked = 0;
      for (std::size_t x : kernel) {
        const auto& ox = dataset.objects[x];
        for (std::size_t y : whole) {
          if (x == y) continue;
          const auto& oy = dataset.objects[y];
          const bool y_in_kernel =
              assignments[y].kernel == static_cast<int>(h);
          if (y_in_kernel && ox.id >= oy.id) continue;
          ++checked;
          const double d = distance(config.metric, ox, oy);
          if (d <= config.delta) {
            hits.push_back({std::min(ox.id, oy.id), std::max(ox.id, oy.id), d});
          }
        }
      }
      verifications[h] = checked;
    }
  });
  report.millis.reduce = elapsed_ms(t_reduce);

  // Union of per-reducer results, deduplicated.
  std::size_t total_hits = 0;
  for (const auto& f : found) total_hits += f.size();
  result.pairs.reserve(total_hits);
  for (auto& f : found) {
    result.pairs.insert(result.pairs.end(), f.begin(), f.end());
  }
  std::sort(result.pairs.begin(), result.pairs.end());
  result.pairs.erase(std::unique(result.pairs.begin(), result.pairs.end()),
                     result.pairs.end());

  // Every emitted pair is re-verified at collection time.
  for (const auto& hit : result.pairs) {
    if (!(hit.dist <= config.delta)) {
      throw std::runtime_error("internal error: emitted pair fails verification");
    }
  }

  report.cost = cost_report(assignments, p);
  report.verifications =
      std::accumulate(verifications.begin(), verifications.end(), 0LL);
  report.pair_count = static_cast<long long>(result.pairs.size());

  report.tree = tree;
  report.areas.resize(static_cast<std::size_t>(p));
  std::vector<std::optional<AreaBox>> pivot_boxes(static_cast<std::size_t>(p));
  {
    const Eigen::Index dim = config.target_dim;
    for (int h = 0; h < p; ++h) {
      const auto& members = tree.leaf_pivots[static_cast<std::size_t>(h)];
      if (members.empty()) continue;
      AreaBox b;
      b.lo = Eigen::ArrayXd::Constant(dim, std::numeric_limits<double>::infinity());
      b.hi = Eigen::ArrayXd::Constant(dim, -std::numeric_limits<double>::infinity());
      for (int idx : members) {
        b.lo = b.lo.min(pivots_target[static_cast<std::size_t>(idx)].array());
        b.hi = b.hi.max(pivots_target[static_cast<std::size_t>(idx)].array());
      }
      pivot_boxes[static_cast<std::size_t>(h)] = std::move(b);
    }
  }
  for (int h = 0; h < p; ++h) {
    AreaReport& ar = report.areas[static_cast<std::size_t>(h)];
    ar.cell = cells[static_cast<std::size_t>(h)];
    ar.pivot_box = pivot_boxes[static_cast<std::size_t>(h)];
    ar.kernel_size = report.cost.kernel_sizes[static_cast<std::size_t>(h)];
    ar.whole_size = report.cost.whole_sizes[static_cast<std::size_t>(h)];
  }
  return result;
}

std::string format_pairs_csv(const std::vector<PairHit>& pairs) {
  std::string out = "id_a,id_b,distance\n";
  char buf[96];
  for (const auto& p : pairs) {
    std::snprintf(buf, sizeof(buf), "%llu,%llu,%.17g\n",
                  static_cast<unsigned long long>(p.a),
                  static_cast<unsigned long long>(p.b), p.dist);
    out += buf;
  }
  return out;
}

std::vector<PairHit> parse_pairs_csv(const std::string& text) {
  std::vector<PairHit> out;
  std::istringstream in(text);
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (first) {
      first = false;
      if (line.rfind("id_a", 0) == 0) continue;
    }
    if (line.empty()) continue;
    PairHit hit;
    const char* p = line.data();
    const char* end = p + line.size();
    auto r1 = std::from_chars(p, end, hit.a);
    if (r1.ec != std::errc() || r1.ptr == end || *r1.ptr != ',') {
      throw std::invalid_argument("bad pairs line: " + line);
    }
    auto r2 = std::from_chars(r1.ptr + 1, end, hit.b);
    if (r2.ec != std::errc()) throw std::invalid_argument("bad pairs line: " + line);
    if (r2.ptr != end && *r2.ptr == ',') {
      hit.dist = std::strtod(r2.ptr + 1, nullptr);
    }
    out.push_back(hit);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace simjoin
