#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "simjoin/engine.hpp"
#include "simjoin/generator.hpp"
#include "simjoin/rng.hpp"
#include "test_support.hpp"

using namespace simjoin;
using namespace simjoin::test;

namespace {

ClusterConfig small_config(MetricKind metric, double delta) {
  ClusterConfig cfg;
  cfg.metric = metric;
  cfg.delta = delta;
  cfg.node_count = 3;
  cfg.sample_size = 60;
  cfg.partition_count = 6;
  cfg.target_dim = 4;
  cfg.cell_count = 4;
  cfg.seed = 1;
  return cfg;
}

GeneratorSpec vector_spec(long long count, int dim, std::uint64_t seed) {
  GeneratorSpec spec;
  spec.kind = PayloadKind::Vector;
  spec.count = count;
  spec.dim = dim;
  spec.seed = seed;
  MixtureComponent a;
  a.family = Family::IndependentNormal;
  a.param1 = Eigen::ArrayXd::Zero(dim);
  a.param2 = Eigen::ArrayXd::Ones(dim);
  a.weight = 0.6;
  MixtureComponent b;
  b.family = Family::IndependentNormal;
  b.param1 = Eigen::ArrayXd::Constant(dim, 4.0);
  b.param2 = Eigen::ArrayXd::Constant(dim, 2.0);
  b.weight = 0.4;
  spec.components = {a, b};
  return spec;
}

// Each node holds one component, so per-node fits succeed.
GeneratorSpec skewed_vector_spec(long long count, int dim, std::uint64_t seed,
                                 int nodes) {
  GeneratorSpec spec = vector_spec(count, dim, seed);
  spec.node_components.resize(static_cast<std::size_t>(nodes));
  for (int i = 0; i < nodes; ++i) {
    spec.node_components[static_cast<std::size_t>(i)] = i % 2;
  }
  return spec;
}

bool same_pairs(const std::vector<PairHit>& a, const std::vector<PairHit>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!(a[i] == b[i])) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("brute force on the four-vector example") {
  const Dataset ds = four_vector_dataset();
  const auto pairs = brute_force_join(ds, MetricKind::L1Norm, 30.0);
  REQUIRE(pairs.size() == 2);
  CHECK(pairs[0].a == 0);
  CHECK(pairs[0].b == 1);
  CHECK(pairs[1].a == 2);
  CHECK(pairs[1].b == 3);

  CHECK(brute_force_join(ds, MetricKind::L1Norm, 100.0).size() == 6);
  Dataset empty;
  empty.kind = PayloadKind::Vector;
  CHECK(brute_force_join(empty, MetricKind::L1Norm, 10.0).empty());
}

TEST_CASE("the engine reproduces the four-vector join") {
  const Dataset ds = four_vector_dataset();
  ClusterConfig cfg;
  cfg.metric = MetricKind::L1Norm;
  cfg.delta = 30.0;
  cfg.node_count = 1;
  cfg.sample_size = 4;
  cfg.partition_count = 2;
  cfg.target_dim = 2;
  cfg.sampling = SamplingMode::Random;
  for (std::uint64_t seed : {1, 7, 12}) {
    cfg.seed = seed;
    const JoinResult r = run_join(ds, cfg);
    REQUIRE(r.pairs.size() == 2);
    CHECK(r.pairs[0].a == 0);
    CHECK(r.pairs[0].b == 1);
    CHECK(r.pairs[1].a == 2);
    CHECK(r.pairs[1].b == 3);
    CHECK(r.report.pair_count == 2);
  }
}

TEST_CASE("zero threshold on distinct objects yields nothing") {
  const GeneratedData g = generate(vector_spec(200, 3, 5));
  ClusterConfig cfg = small_config(MetricKind::Euclidean, 0.0);
  const JoinResult r = run_join(g.dataset, cfg);
  CHECK(r.pairs.empty());
}

TEST_CASE("oracle equivalence across sampling and partition modes") {
  const GeneratedData g = generate(skewed_vector_spec(600, 4, 77, 3));
  for (MetricKind metric : {MetricKind::L1Norm, MetricKind::Euclidean}) {
    const double delta = metric == MetricKind::L1Norm ? 1.2 : 0.7;
    const auto oracle = brute_force_join(g.dataset, metric, delta);
    REQUIRE(oracle.size() > 10);  // the threshold produces real work
    for (SamplingMode sm : {SamplingMode::Random, SamplingMode::DistributionAware,
                            SamplingMode::Generative}) {
      for (PartitionMode pm : {PartitionMode::Iterative, PartitionMode::Learning}) {
        for (std::uint64_t seed : {2, 3}) {
          ClusterConfig cfg = small_config(metric, delta);
          cfg.sampling = sm;
          cfg.partition = pm;
          cfg.seed = seed;
          cfg.cell_count = 6;
          const JoinResult r = run_join(g.dataset, cfg);
          REQUIRE(same_pairs(r.pairs, oracle));
        }
      }
    }
  }
}

TEST_CASE("oracle equivalence for strings") {
  GeneratorSpec spec;
  spec.kind = PayloadKind::String;
  spec.count = 300;
  spec.seed = 9;
  spec.string_spec.centers = 12;
  const GeneratedData g = generate(spec);
  const auto oracle = brute_force_join(g.dataset, MetricKind::EditDistance, 3.0);
  REQUIRE(!oracle.empty());
  for (SamplingMode sm : {SamplingMode::Random, SamplingMode::DistributionAware}) {
    ClusterConfig cfg = small_config(MetricKind::EditDistance, 3.0);
    cfg.sampling = sm;
    cfg.partition = PartitionMode::Learning;
    const JoinResult r = run_join(g.dataset, cfg);
    REQUIRE(same_pairs(r.pairs, oracle));
    CHECK(r.report.sampling_mode_effective == (sm == SamplingMode::Random
                                                   ? "random"
                                                   : "uniform_per_node"));
  }
}

TEST_CASE("oracle equivalence for token sets") {
  GeneratorSpec spec;
  spec.kind = PayloadKind::TokenSet;
  spec.count = 300;
  spec.seed = 10;
  spec.set_spec.centers = 15;
  const GeneratedData g = generate(spec);
  const auto oracle = brute_force_join(g.dataset, MetricKind::JaccardDistance, 0.4);
  REQUIRE(!oracle.empty());
  ClusterConfig cfg = small_config(MetricKind::JaccardDistance, 0.4);
  cfg.sampling = SamplingMode::Generative;  // falls back to uniform per node
  const JoinResult r = run_join(g.dataset, cfg);
  REQUIRE(same_pairs(r.pairs, oracle));
  CHECK(r.report.sampling_mode_effective == "uniform_per_node");
}

TEST_CASE("every emitted pair satisfies the threshold") {
  const GeneratedData g = generate(vector_spec(400, 3, 21));
  ClusterConfig cfg = small_config(MetricKind::L1Norm, 1.0);
  const JoinResult r = run_join(g.dataset, cfg);
  for (const auto& p : r.pairs) {
    CHECK(p.dist <= cfg.delta);
  }
}

TEST_CASE("random baseline draws whole dataset at k = N and is deterministic") {
  const Dataset ds = four_vector_dataset();
  const auto all = random_sample_baseline(ds, 4, 3);
  std::vector<std::size_t> sorted = all;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == std::vector<std::size_t>{0, 1, 2, 3});
  CHECK(random_sample_baseline(ds, 3, 42) == random_sample_baseline(ds, 3, 42));
  CHECK_THROWS_AS(random_sample_baseline(ds, 5, 1), std::invalid_argument);
}

TEST_CASE("random baseline draws uniformly") {
  GeneratorSpec spec = vector_spec(10, 2, 30);
  const GeneratedData g = generate(spec);
  const long long trials = 10000;
  const long long k = 3;
  std::vector<long long> hits(10, 0);
  for (long long t = 0; t < trials; ++t) {
    for (std::size_t idx : random_sample_baseline(g.dataset, k, 1000 + t)) {
      ++hits[idx];
    }
  }
  // Inclusion frequency k/N per object within 5 sigma.
  const double p = static_cast<double>(k) / 10.0;
  const double sigma = std::sqrt(trials * p * (1 - p));
  for (long long h : hits) {
    CHECK(std::abs(h - trials * p) < 5 * sigma);
  }
}

TEST_CASE("degenerate nodes fall back to uniform sampling and stay exact") {
  // One coordinate is constant on every node, so normal fits reject.
  Dataset ds;
  ds.kind = PayloadKind::Vector;
  ds.dim = 2;
  auto rng = phase_rng(4, "test.degenerate");
  std::uniform_real_distribution<double> coord(0.0, 10.0);
  for (int i = 0; i < 200; ++i) {
    Eigen::VectorXd v(2);
    v << coord(rng), 1.0;
    ds.objects.push_back({static_cast<std::uint64_t>(i), v});
  }
  ClusterConfig cfg = small_config(MetricKind::L1Norm, 0.5);
  cfg.families = {Family::IndependentNormal};
  const JoinResult r = run_join(ds, cfg);
  CHECK(r.report.nodes[0].degraded);
  CHECK(r.report.sampling_mode_effective == "uniform_per_node");
  CHECK(same_pairs(r.pairs, brute_force_join(ds, MetricKind::L1Norm, 0.5)));
}

TEST_CASE("generative sampling transfers summaries, not samples") {
  const GeneratedData g = generate(skewed_vector_spec(800, 2, 55, 4));
  ClusterConfig cfg = small_config(MetricKind::L1Norm, 0.8);
  cfg.node_count = 4;
  cfg.sample_size = 200;  // k > M^2
  cfg.partition_count = 8;

  cfg.sampling = SamplingMode::Generative;
  const JoinResult gen = run_join(g.dataset, cfg);
  cfg.sampling = SamplingMode::DistributionAware;
  const JoinResult dist = run_join(g.dataset, cfg);

  const long long gen_total =
      gen.report.bytes.sampling_broadcast + gen.report.bytes.sampling_data;
  const long long dist_total =
      dist.report.bytes.sampling_broadcast + dist.report.bytes.sampling_data;
  CHECK(gen_total < dist_total);
  CHECK(gen.report.bytes.sampling_data == 0);
  CHECK(dist.report.bytes.sampling_data > 0);
}

TEST_CASE("identical seeds give identical results under any thread count") {
  const GeneratedData g = generate(skewed_vector_spec(500, 3, 66, 3));
  ClusterConfig cfg = small_config(MetricKind::Euclidean, 0.8);
  cfg.sampling = SamplingMode::Generative;
  cfg.partition = PartitionMode::Learning;

  cfg.threads = 1;
  const JoinResult serial = run_join(g.dataset, cfg);
  cfg.threads = 4;
  const JoinResult parallel = run_join(g.dataset, cfg);

  CHECK(format_pairs_csv(serial.pairs) == format_pairs_csv(parallel.pairs));
  CHECK(serial.report.cost.inner == parallel.report.cost.inner);
  CHECK(serial.report.cost.outer == parallel.report.cost.outer);
  CHECK(serial.report.cost.pair_counts == parallel.report.cost.pair_counts);
  CHECK(serial.report.verifications == parallel.report.verifications);

  const JoinResult again = run_join(g.dataset, cfg);
  CHECK(format_pairs_csv(parallel.pairs) == format_pairs_csv(again.pairs));
}

TEST_CASE("kernel assignments cover every object exactly once") {
  const GeneratedData g = generate(vector_spec(400, 2, 91));
  ClusterConfig cfg = small_config(MetricKind::L1Norm, 0.6);
  const JoinResult r = run_join(g.dataset, cfg);
  long long total = 0;
  for (long long v : r.report.cost.kernel_sizes) {
    CHECK(v >= 0);
    total += v;
  }
  CHECK(total == static_cast<long long>(g.dataset.size()));
  // Eq. 16 bound with exact integers.
  const long long n = total;
  const long long p = static_cast<long long>(r.report.cost.kernel_sizes.size());
  CHECK(p * r.report.cost.inner >= n * n);
}

TEST_CASE("config validation rejects inconsistent setups") {
  const Dataset ds = four_vector_dataset();
  ClusterConfig cfg = small_config(MetricKind::EditDistance, 1.0);
  CHECK_THROWS_AS(run_join(ds, cfg), std::invalid_argument);  // payload mismatch

  cfg = small_config(MetricKind::L1Norm, 1.0);
  cfg.node_count = 40;
  CHECK_THROWS_AS(run_join(ds, cfg), std::invalid_argument);  // more nodes than objects

  cfg = small_config(MetricKind::L1Norm, 1.0);
  cfg.sample_size = 2;
  cfg.partition_count = 4;
  CHECK_THROWS_AS(run_join(ds, cfg), std::invalid_argument);  // k < p

  cfg = small_config(MetricKind::L1Norm, 1.0);
  cfg.sample_size = 400;  // exceeds the 4-object dataset
  cfg.sampling = SamplingMode::Random;
  CHECK_THROWS_AS(run_join(ds, cfg), std::invalid_argument);
}

TEST_CASE("pairs CSV round-trips") {
  std::vector<PairHit> pairs = {{1, 2, 0.5}, {3, 9, 14.0}};
  const std::string csv = format_pairs_csv(pairs);
  CHECK(csv.rfind("id_a,id_b,distance\n", 0) == 0);
  const auto parsed = parse_pairs_csv(csv);
  REQUIRE(parsed.size() == 2);
  CHECK(parsed[0].a == 1);
  CHECK(parsed[1].b == 9);
  CHECK(parsed[1].dist == 14.0);
}

TEST_CASE("generative broadcast bytes do not depend on the sample size") {
  const GeneratedData g = generate(skewed_vector_spec(2000, 2, 13, 4));
  ClusterConfig cfg = small_config(MetricKind::L1Norm, 0.5);
  cfg.node_count = 4;
  cfg.partition_count = 8;
  cfg.sampling = SamplingMode::Generative;

  cfg.sample_size = 100;
  const JoinResult a = run_join(g.dataset, cfg);
  cfg.sample_size = 800;
  const JoinResult b = run_join(g.dataset, cfg);
  CHECK(a.report.bytes.sampling_broadcast == b.report.bytes.sampling_broadcast);
  CHECK(a.report.bytes.sampling_data == 0);
  CHECK(b.report.bytes.sampling_data == 0);
}

TEST_CASE("positive-support data exercises the exponential and gamma fits") {
  GeneratorSpec spec;
  spec.kind = PayloadKind::Vector;
  spec.count = 1600;
  spec.dim = 2;
  spec.seed = 88;
  MixtureComponent a;
  a.family = Family::IndependentExponential;
  a.param1 = Eigen::ArrayXd::Constant(2, 0.8);
  a.weight = 0.5;
  MixtureComponent b;
  b.family = Family::IndependentGamma;
  b.param1 = Eigen::ArrayXd::Constant(2, 4.0);
  b.param2 = Eigen::ArrayXd::Constant(2, 0.5);
  b.weight = 0.5;
  spec.components = {a, b};
  spec.node_components = {0, 1, 0, 1};
  const GeneratedData g = generate(spec);

  ClusterConfig cfg = small_config(MetricKind::L1Norm, 0.4);
  cfg.node_count = 4;
  cfg.sampling = SamplingMode::Generative;
  cfg.partition = PartitionMode::Learning;
  const JoinResult r = run_join(g.dataset, cfg);
  bool positive_family = false;
  for (const auto& n : r.report.nodes) {
    if (n.fit && (n.fit->model.family == Family::IndependentExponential ||
                  n.fit->model.family == Family::IndependentGamma)) {
      positive_family = true;
    }
  }
  CHECK(positive_family);
  CHECK(same_pairs(r.pairs, brute_force_join(g.dataset, MetricKind::L1Norm, 0.4)));
}

TEST_CASE("exactness holds at ten thousand objects") {
  const GeneratedData g = generate(skewed_vector_spec(10000, 3, 99, 4));
  ClusterConfig cfg = small_config(MetricKind::Euclidean, 0.35);
  cfg.node_count = 4;
  cfg.sample_size = 600;
  cfg.partition_count = 12;
  cfg.sampling = SamplingMode::Generative;
  cfg.threads = 4;
  const JoinResult r = run_join(g.dataset, cfg);
  const auto oracle = brute_force_join(g.dataset, MetricKind::Euclidean, 0.35);
  CHECK(!oracle.empty());
  CHECK(same_pairs(r.pairs, oracle));
}

TEST_CASE("a dataset of identical objects still joins exactly") {
  Dataset ds;
  ds.kind = PayloadKind::Vector;
  ds.dim = 2;
  for (int i = 0; i < 50; ++i) {
    Eigen::VectorXd v(2);
    v << 3.5, -1.0;
    ds.objects.push_back({static_cast<std::uint64_t>(i), v});
  }
  ClusterConfig cfg = small_config(MetricKind::L1Norm, 0.0);
  cfg.sample_size = 20;
  cfg.partition_count = 4;
  cfg.target_dim = 2;
  const JoinResult r = run_join(ds, cfg);
  CHECK(r.pairs.size() == 50 * 49 / 2);  // everything matches at delta 0
  CHECK(same_pairs(r.pairs, brute_force_join(ds, MetricKind::L1Norm, 0.0)));
  for (const auto& n : r.report.nodes) CHECK(n.degraded);
}
