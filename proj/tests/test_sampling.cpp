#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>

#include "simjoin/rng.hpp"
#include "simjoin/sampling.hpp"
#include "test_support.hpp"

using namespace simjoin;
using namespace simjoin::test;

namespace {

EfdModel normal_model(std::initializer_list<double> means,
                      std::initializer_list<double> vars) {
  EfdModel m;
  m.family = Family::IndependentNormal;
  m.param1.resize(static_cast<Eigen::Index>(means.size()));
  m.param2.resize(static_cast<Eigen::Index>(vars.size()));
  Eigen::Index i = 0;
  for (double v : means) m.param1[i++] = v;
  i = 0;
  for (double v : vars) m.param2[i++] = v;
  return m;
}

NodeSummary summary(int id, EfdModel model, double conf, long long n) {
  return NodeSummary{id, std::move(model), conf, n};
}

}  // namespace

TEST_CASE("allocation splits evenly for identical nodes") {
  const std::vector<NodeSummary> nodes = {
      summary(0, normal_model({0}, {1}), 1.0, 100),
      summary(1, normal_model({0}, {1}), 1.0, 100)};
  CHECK(allocate_sample_sizes(nodes, 10) == std::vector<long long>{5, 5});
}

TEST_CASE("allocation weighs nodes by cardinality over confidence") {
  const std::vector<NodeSummary> nodes = {
      summary(0, normal_model({0}, {1}), 0.5, 100),
      summary(1, normal_model({0}, {1}), 1.0, 300)};
  CHECK(allocate_sample_sizes(nodes, 10) == std::vector<long long>{4, 6});
}

TEST_CASE("largest-remainder rounding keeps the exact total") {
  const std::vector<NodeSummary> nodes = {
      summary(0, normal_model({0}, {1}), 1.0, 7),
      summary(1, normal_model({0}, {1}), 1.0, 7),
      summary(2, normal_model({0}, {1}), 1.0, 7)};
  CHECK(allocate_sample_sizes(nodes, 10) == std::vector<long long>{4, 3, 3});
}

TEST_CASE("allocation is invariant under scaling all cardinalities") {
  auto rng = phase_rng(3, "test.alloc");
  std::uniform_int_distribution<long long> card(1, 5000);
  std::uniform_real_distribution<double> conf(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<NodeSummary> nodes;
    for (int i = 0; i < 6; ++i) {
      nodes.push_back(summary(i, normal_model({0}, {1}), conf(rng), card(rng)));
    }
    const auto base = allocate_sample_sizes(nodes, 97);
    CHECK(std::accumulate(base.begin(), base.end(), 0LL) == 97);
    for (auto& n : nodes) n.cardinality *= 13;
    CHECK(allocate_sample_sizes(nodes, 97) == base);
  }
}

TEST_CASE("zero confidence is clamped rather than dividing by zero") {
  const std::vector<NodeSummary> nodes = {summary(0, normal_model({0}, {1}), 0.0, 10),
                                          summary(1, normal_model({0}, {1}), 1.0, 10)};
  const auto counts = allocate_sample_sizes(nodes, 8);
  CHECK(counts[0] + counts[1] == 8);
  CHECK(counts[0] >= 7);  // near-zero confidence dominates the weights
}

TEST_CASE("stratified draw returns exactly lc rows") {
  auto rng = phase_rng(17, "test.strat");
  Eigen::MatrixXd data(200, 1);
  for (int i = 0; i < 200; ++i) data(i, 0) = -3.0 + 6.0 * i / 199.0;
  const NodeSummary s = summary(0, normal_model({0}, {1}), 1.0, 200);

  auto one = distribution_aware_sample(data, s, 1, rng);
  CHECK(one.rows.size() == 1);
  auto hundred = distribution_aware_sample(data, s, 100, rng);
  CHECK(hundred.rows.size() == 100);
  CHECK(hundred.warnings.empty());
}

TEST_CASE("with full confidence per-stratum counts equal the rounded targets") {
  auto rng = phase_rng(23, "test.strat.exact");
  // 10 strata for lc = 100; residents placed well inside each decile of the
  // standard normal.
  const NodeSummary s = summary(0, normal_model({0}, {1}), 1.0, 1000);
  Eigen::MatrixXd data(1000, 1);
  for (int i = 0; i < 1000; ++i) {
    const double u = (i % 10 + 0.5) / 10.0;
    data(i, 0) = normal_quantile(u);
  }
  const auto draw = distribution_aware_sample(data, s, 100, rng);
  REQUIRE(draw.rows.size() == 100);
  // Count draws per decile; each target is exactly 10.
  std::vector<int> per(10, 0);
  for (const auto r : draw.rows) {
    const double u = normal_cdf(data(r, 0));
    ++per[std::min(9, static_cast<int>(u * 10))];
  }
  for (int j = 0; j < 10; ++j) CHECK(per[j] == 10);
}

TEST_CASE("empty strata hand their targets to neighbors") {
  auto rng = phase_rng(29, "test.strat.empty");
  // All residents sit far in the right tail, so most strata are empty.
  Eigen::MatrixXd data(50, 1);
  for (int i = 0; i < 50; ++i) data(i, 0) = 10.0 + i * 0.01;
  const NodeSummary s = summary(0, normal_model({0}, {1}), 1.0, 50);
  const auto draw = distribution_aware_sample(data, s, 25, rng);
  CHECK(draw.rows.size() == 25);
  CHECK(!draw.warnings.empty());
}

TEST_CASE("node selection weights follow the selector") {
  const std::vector<NodeSummary> nodes = {summary(0, normal_model({0}, {1}), 0.5, 100),
                                          summary(1, normal_model({0}, {1}), 1.0, 300)};
  const Eigen::ArrayXd w0 = node_selection_weights(nodes, 0);
  CHECK(w0[0] == doctest::Approx(0.25));
  CHECK(w0[1] == doctest::Approx(0.75));
  const Eigen::ArrayXd w1 = node_selection_weights(nodes, 1);
  CHECK(w1[0] == doctest::Approx(200.0 / 500.0));
  CHECK(w1[1] == doctest::Approx(300.0 / 500.0));
  CHECK(std::abs(w0.sum() - 1.0) < 1e-12);
  CHECK(std::abs(w1.sum() - 1.0) < 1e-12);
}

TEST_CASE("full confidence accepts every proposal") {
  auto rng = phase_rng(31, "test.gibbs.accept");
  const std::vector<NodeSummary> nodes = {summary(0, normal_model({0}, {1}), 1.0, 50),
                                          summary(1, normal_model({5}, {2}), 1.0, 50)};
  GibbsStats stats;
  const PivotSet s = gibbs_sample(nodes, 64, rng, &stats);
  CHECK(s.size() == 64);
  CHECK(stats.iterations == 64);
  CHECK(stats.rejections == 0);
  for (int p : s.provenance) CHECK(p == kGeneratedProvenance);
}

TEST_CASE("generated samples match the source distribution") {
  auto rng = phase_rng(37, "test.gibbs.dist");
  const std::vector<NodeSummary> nodes = {summary(0, normal_model({0, 0}, {1, 1}), 1.0, 100)};
  const PivotSet s = gibbs_sample(nodes, 3200, rng);
  REQUIRE(s.size() == 3200);
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  for (const auto& x : s.pivots) mean += x;
  mean /= 3200.0;
  CHECK(std::abs(mean[0]) < 0.06);
  CHECK(std::abs(mean[1]) < 0.06);
}

TEST_CASE("a chain with near-zero confidences stalls with a diagnostic") {
  auto rng = phase_rng(41, "test.gibbs.stall");
  const std::vector<NodeSummary> nodes = {summary(0, normal_model({0}, {1}), 0.0, 10)};
  CHECK_THROWS_AS(gibbs_sample(nodes, 5, rng), std::runtime_error);
}

TEST_CASE("sampling error of a single sample at the median is one half") {
  const EfdModel m = normal_model({0}, {1});
  const std::vector<Eigen::VectorXd> one = {Eigen::VectorXd::Zero(1)};
  CHECK(sampling_error(one, m) == doctest::Approx(0.5));
}

TEST_CASE("samples at evenly spaced quantiles have a tight stair-step error") {
  const EfdModel m = normal_model({0}, {1});
  const int k = 99;
  std::vector<Eigen::VectorXd> samples;
  for (int i = 1; i <= k; ++i) {
    Eigen::VectorXd x(1);
    x[0] = normal_quantile(static_cast<double>(i) / (k + 1));
    samples.push_back(x);
  }
  // F(x_(i)) = i/(k+1); the empirical CDF deviates by at most 1/(k+1) plus
  // the quantile spacing.
  CHECK(sampling_error(samples, m) <= 1.0 / (k + 1) + 1.0 / k + 1e-12);
}

TEST_CASE("error shrinks with sample size") {
  const EfdModel m = normal_model({0, 0}, {1, 4});
  const std::vector<NodeSummary> nodes = {summary(0, m, 1.0, 100)};
  std::vector<double> small, large;
  for (int s = 0; s < 20; ++s) {
    auto rng = phase_rng(500 + s, "test.ks.scale");
    small.push_back(sampling_error(gibbs_sample(nodes, 200, rng).pivots, m));
    large.push_back(sampling_error(gibbs_sample(nodes, 3200, rng).pivots, m));
  }
  std::sort(small.begin(), small.end());
  std::sort(large.begin(), large.end());
  CHECK(large[10] < small[10]);
}

TEST_CASE("required sample size closed form") {
  CHECK(required_sample_size(0.05, 2, 0.05) == 877);
  CHECK(required_sample_size(0.1, 2, 0.05) == 220);
  CHECK_THROWS_AS(required_sample_size(0.1, 1, 2.0), std::invalid_argument);
  CHECK_THROWS_AS(required_sample_size(1.5, 1, 0.05), std::invalid_argument);
  // Doubling the dimension adds about ln(2) / (2 eps^2).
  const double eps = 0.07;
  const long long bump = static_cast<long long>(
      std::ceil(std::log(2.0) / (2 * eps * eps)));
  const long long k1 = required_sample_size(eps, 1, 0.05);
  const long long k2 = required_sample_size(eps, 2, 0.05);
  CHECK((k2 - k1 == bump || k2 - k1 == bump - 1));
}

TEST_CASE("global confidence pools the statistics") {
  FitResult a;
  a.k_star = 0.0;
  a.dof = 17;
  a.confidence = confidence(a.k_star, a.dof);
  const std::vector<FitResult> single = {a};
  CHECK(global_confidence(single) == doctest::Approx(a.confidence));

  FitResult b = a;
  const std::vector<FitResult> zeros = {a, b};
  CHECK(global_confidence(zeros) == doctest::Approx(1.0));

  a.k_star = 17.0;
  b.k_star = 17.0;
  const std::vector<FitResult> pooled = {a, b};
  CHECK(global_confidence(pooled) ==
        doctest::Approx(1.0 - chi_square_cdf(34.0, 34)).epsilon(1e-12));
  CHECK(global_confidence(pooled) == doctest::Approx(0.47).epsilon(0.03));
}

TEST_CASE("sampling is deterministic for a fixed seed") {
  const std::vector<NodeSummary> nodes = {summary(0, normal_model({0}, {1}), 0.9, 60),
                                          summary(1, normal_model({3}, {2}), 0.7, 40)};
  auto r1 = phase_rng(77, "x");
  auto r2 = phase_rng(77, "x");
  const PivotSet a = gibbs_sample(nodes, 50, r1);
  const PivotSet b = gibbs_sample(nodes, 50, r2);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.pivots[i] == b.pivots[i]);
  }
}

TEST_CASE("pooled confidence tracks the weakest node") {
  // Directional check: the pooled p-value should not fall more than 0.05
  // below the weakest per-node confidence.
  int violations = 0;
  for (int trial = 0; trial < 100; ++trial) {
    auto rng = phase_rng(3000 + trial, "test.thm2");
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<FitResult> fits;
    double min_conf = 1.0;
    for (int node = 0; node < 5; ++node) {
      Eigen::MatrixXd data(2000, 2);
      for (Eigen::Index i = 0; i < data.rows(); ++i) {
        data(i, 0) = normal(rng);
        data(i, 1) = normal(rng);
      }
      fits.push_back(fit_and_test(data, Family::IndependentNormal, 20));
      min_conf = std::min(min_conf, fits.back().confidence);
    }
    if (global_confidence(fits) < min_conf - 0.05) ++violations;
  }
  CHECK(violations == 0);
}
