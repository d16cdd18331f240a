#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "simjoin/metrics.hpp"

namespace simjoin {

// Anchor objects whose distances define target-space coordinates.
struct DimensionalPivots {
  std::vector<DataObject> anchors;

  Eigen::Index dim() const { return static_cast<Eigen::Index>(anchors.size()); }
};

/// Target-space embedding: coordinate j is distance(metric, anchors[j], o).
Eigen::VectorXd map_to_target(const DataObject& o, const DimensionalPivots& anchors,
                              MetricKind metric);

// Binary split tree over target space with `leaf_count` leaves. Points with
// coordinate < value descend left, >= value descend right.
struct SplitTree {
  struct Node {
    int dim = -1;
    double value = 0.0;
    int left = -1;
    int right = -1;
    int leaf = -1;  // >= 0 for leaves
  };
  std::vector<Node> nodes;
  int root = 0;
  int leaf_count = 0;
  // Pivot indices routed to each leaf during construction.
  std::vector<std::vector<int>> leaf_pivots;

  int descend(const Eigen::VectorXd& x) const;
};

/// Recursive fractile split with a uniformly random dimension at each node;
/// the left subtree receives ceil(p/2) leaves and the right floor(p/2).
SplitTree iterative_partition(const std::vector<Eigen::VectorXd>& pivots, int p,
                              std::mt19937_64& rng);

/// Same recursion, but the split dimension at each node maximizes the gain
/// ratio of the fractile split over the pivot labels. Ties go to the lowest
/// dimension index.
SplitTree learning_partition(const std::vector<Eigen::VectorXd>& pivots,
                             std::span<const int> labels, int p);

/// Agglomerative average-linkage clustering of the pivots in origin space,
/// cut at `cluster_count` clusters. Labels are 0..cluster_count-1 in order of
/// first appearance.
std::vector<int> label_pivots(const std::vector<DataObject>& pivots, MetricKind metric,
                              int cluster_count);

/// Shannon entropy (natural log) of a label multiset.
double entropy_cost(std::span<const int> labels);

/// Information gain of the split divided by the split entropy; 0 when fewer
/// than two children are non-empty.
double gain_ratio(std::span<const int> parent,
                  std::span<const std::vector<int>> children);

struct AreaBox {
  Eigen::ArrayXd lo, hi;

  // Closed bounds: lo - delta <= x <= hi + delta.
  bool contains(const Eigen::VectorXd& x, double delta) const;
  // Half-open upper bounds, matching tree descent; cells tile space exactly.
  bool contains_halfopen(const Eigen::VectorXd& x, double delta) const;
};

/// Componentwise min/max of the pivots routed to each leaf. Every leaf must
/// hold at least one pivot.
std::vector<AreaBox> build_boxes(const SplitTree& tree,
                                 const std::vector<Eigen::VectorXd>& pivots);

/// Per-leaf cell bounds implied by the tree's splits: lo <= x < hi, with
/// infinite outer bounds. Cells tile the whole target space.
std::vector<AreaBox> leaf_cells(const SplitTree& tree, Eigen::Index dim);

struct PartitionAssignment {
  std::uint64_t object_id = 0;
  int kernel = 0;
  std::vector<int> whole;  // sorted, always contains kernel
};

/// Kernel = leaf reached by tree descent; whole memberships = every area
/// whose delta-expanded bounds contain the point, with the kernel area always
/// included.
PartitionAssignment assign(std::uint64_t object_id, const Eigen::VectorXd& target,
                           const SplitTree& tree, std::span<const AreaBox> areas,
                           Threshold delta);

struct CostReport {
  std::vector<long long> kernel_sizes;
  std::vector<long long> whole_sizes;
  std::vector<long long> pair_counts;  // per-area verification pairs
  long long inner = 0;                 // sum |V_h|^2
  long long outer = 0;                 // sum |V_h| (|W_h| - |V_h|)
  long long total = 0;                 // inner + outer
  long long total_pairs = 0;
  long long max_pairs = 0;
  double mean_pairs = 0.0;
  double stdev_pairs = 0.0;
};

/// Pair verifications in area h: |V_h| (|W_h| - |V_h|) + |V_h| (|V_h| - 1) / 2.
std::vector<long long> pair_counts_from_sizes(std::span<const long long> kernel_sizes,
                                              std::span<const long long> whole_sizes);

CostReport cost_report_from_sizes(std::span<const long long> kernel_sizes,
                                  std::span<const long long> whole_sizes);
CostReport cost_report(std::span<const PartitionAssignment> assignments, int p);

}  // namespace simjoin
