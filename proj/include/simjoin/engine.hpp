#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "simjoin/distribution.hpp"
#include "simjoin/metrics.hpp"
#include "simjoin/partition.hpp"
#include "simjoin/sampling.hpp"

namespace simjoin {

enum class SamplingMode { Random, DistributionAware, Generative };
enum class PartitionMode { Iterative, Learning };

// Nodes whose best fit scores below this p-value are treated as unfitted and
// degrade to uniform sampling.
inline constexpr double kFitRejectionFloor = 0.01;

const char* to_string(SamplingMode mode);
const char* to_string(PartitionMode mode);
SamplingMode sampling_mode_from_string(const std::string& name);
PartitionMode partition_mode_from_string(const std::string& name);

struct ClusterConfig {
  int node_count = 15;
  long long sample_size = 3200;
  int partition_count = 60;
  int target_dim = 10;
  MetricKind metric = MetricKind::L1Norm;
  double delta = 0.0;
  SamplingMode sampling = SamplingMode::Generative;
  PartitionMode partition = PartitionMode::Iterative;
  std::vector<Family> families = {Family::IndependentNormal,
                                  Family::IndependentExponential,
                                  Family::IndependentGamma};
  int cell_count = 20;
  int cluster_count = 0;  // 0 = ceil(sqrt(sample_size))
  std::uint64_t seed = 0;
  int threads = 1;
};

struct NodeReport {
  int node_id = 0;
  long long cardinality = 0;
  bool degraded = false;
  std::string degrade_reason;
  std::optional<FitResult> fit;
  long long allocated_samples = 0;
};

struct PhaseBytes {
  long long sampling_broadcast = 0;
  long long sampling_data = 0;
  long long shuffle = 0;
};

struct PhaseMillis {
  double sample = 0.0;
  double map = 0.0;
  double reduce = 0.0;
};

struct AreaReport {
  AreaBox cell;
  std::optional<AreaBox> pivot_box;  // absent when the leaf holds no pivots
  long long kernel_size = 0;
  long long whole_size = 0;
};

struct JoinReport {
  ClusterConfig config;
  PayloadKind payload = PayloadKind::Vector;
  long long object_count = 0;
  std::vector<NodeReport> nodes;
  std::string sampling_mode_effective;
  std::vector<std::string> sampling_warnings;
  GibbsStats gibbs;
  std::optional<double> global_confidence;
  SplitTree tree;
  std::vector<AreaReport> areas;
  CostReport cost;
  long long verifications = 0;  // distance evaluations in the reduce phase
  PhaseBytes bytes;
  PhaseMillis millis;
  long long pair_count = 0;
};

struct PairHit {
  std::uint64_t a = 0;  // a < b
  std::uint64_t b = 0;
  double dist = 0.0;

  friend bool operator<(const PairHit& x, const PairHit& y) {
    return x.a != y.a ? x.a < y.a : x.b < y.b;
  }
  friend bool operator==(const PairHit& x, const PairHit& y) {
    return x.a == y.a && x.b == y.b;
  }
};

struct JoinResult {
  std::vector<PairHit> pairs;  // sorted by (a, b), deduplicated
  JoinReport report;
};

// Stages 1-3 in isolation: shard, fit per node, draw pivots.
struct SamplingPhaseResult {
  std::vector<NodeReport> nodes;
  std::optional<double> global_confidence;
  std::vector<DataObject> pivot_objects;
  std::vector<int> provenance;
  std::string mode_effective;
  std::vector<std::string> warnings;
  GibbsStats gibbs;
  long long bytes_broadcast = 0;
  long long bytes_data = 0;
};

SamplingPhaseResult run_sampling_phase(const Dataset& dataset,
                                       const ClusterConfig& config);

/// Runs the full three-phase join over a simulated cluster: shard, fit,
/// sample pivots, build the partition layout, map every object, verify per
/// partition, and union the results.
JoinResult run_join(const Dataset& dataset, const ClusterConfig& config);

/// All pairs within delta by exhaustive comparison.
std::vector<PairHit> brute_force_join(const Dataset& dataset, MetricKind metric,
                                      double delta);

/// k objects drawn uniformly without replacement across the whole dataset;
/// returns indices into dataset.objects in draw order.
std::vector<std::size_t> random_sample_baseline(const Dataset& dataset, long long k,
                                                std::uint64_t seed);

std::string format_pairs_csv(const std::vector<PairHit>& pairs);
std::vector<PairHit> parse_pairs_csv(const std::string& text);

}  // namespace simjoin
