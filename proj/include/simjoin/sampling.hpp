#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "simjoin/distribution.hpp"

namespace simjoin {

// Confidence values are clamped to at least this before appearing in a
// denominator or an acceptance probability.
inline constexpr double kMinConfidence = 1e-6;

// Per-pivot provenance value for synthesized pivots.
inline constexpr int kGeneratedProvenance = -1;

// The broadcast triple <fitted model, confidence, cardinality> for one node.
struct NodeSummary {
  int node_id = 0;
  EfdModel model;
  double confidence = 1.0;
  long long cardinality = 0;
};

struct PivotSet {
  std::vector<Eigen::VectorXd> pivots;
  std::vector<int> provenance;  // source node id, or kGeneratedProvenance

  std::size_t size() const { return pivots.size(); }
};

/// Splits k into per-node counts proportional to N_i / c_i, rounded by the
/// largest-remainder method (ties to the lowest index). Counts sum to k.
std::vector<long long> allocate_sample_sizes(std::span<const NodeSummary> summaries,
                                             long long k);

/// Largest-remainder rounding of non-negative quotas so the result sums to
/// `total`. Ties on the fractional part go to the lowest index.
std::vector<long long> largest_remainder_round(const Eigen::ArrayXd& quotas,
                                               long long total);

struct StratifiedSample {
  std::vector<Eigen::Index> rows;  // indices into the node's data, size lc
  std::vector<std::string> warnings;
};

/// Stratified draw of lc objects from one node. The node's space is split
/// into floor(sqrt(lc)) equal-probability intervals under the fitted model
/// along its largest-variance dimension; per-stratum targets are
/// largest-remainder rounded, and each draw is rejected with probability
/// 1 - confidence and redrawn. Strata with a target but no resident objects
/// hand their target to the nearest non-empty stratum (recorded as a warning).
StratifiedSample distribution_aware_sample(const Eigen::MatrixXd& node_data,
                                           const NodeSummary& summary, long long lc,
                                           std::mt19937_64& rng);

/// Node-selection weights p(E = i | C = c): N_i * c_i^{-c}, normalized.
Eigen::ArrayXd node_selection_weights(std::span<const NodeSummary> summaries, int c);

struct GibbsStats {
  long long iterations = 0;
  long long rejections = 0;
};

/// Synthesizes k pivots from the mixture of node models: the chain picks a
/// node by the confidence-weighted selector, draws a point from that node's
/// model by per-dimension inverse CDF, and accepts it with probability equal
/// to the node's confidence; on rejection the previous state is held. Aborts
/// after 1e6 consecutive rejections.
PivotSet gibbs_sample(std::span<const NodeSummary> summaries, long long k,
                      std::mt19937_64& rng, GibbsStats* stats = nullptr);

// Marginal reference CDF: (dimension, x) -> P(X_d <= x).
using MarginalCdf = std::function<double(Eigen::Index, double)>;

/// Max over dimensions of the Kolmogorov-Smirnov statistic between the
/// samples' empirical marginal and the reference marginal.
double sampling_error(const std::vector<Eigen::VectorXd>& samples,
                      const MarginalCdf& reference, Eigen::Index dim);
double sampling_error(const std::vector<Eigen::VectorXd>& samples,
                      const EfdModel& reference);

/// Smallest k with 2m * exp(-2 k eps^2) <= fail_prob.
long long required_sample_size(double epsilon, int m, double fail_prob);

/// p-value of sum(K_i*) under a chi-square with sum(dof_i) degrees of freedom.
double global_confidence(std::span<const FitResult> fits);

}  // namespace simjoin
