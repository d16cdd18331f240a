#include "simjoin/partition.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

namespace simjoin {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

Eigen::VectorXd map_to_target(const DataObject& o, const DimensionalPivots& anchors,
                              MetricKind metric) {
  Eigen::VectorXd t(anchors.dim());
  for (Eigen::Index j = 0; j < anchors.dim(); ++j) {
    t[j] = distance(metric, anchors.anchors[static_cast<std::size_t>(j)], o);
  }
  return t;
}

int SplitTree::descend(const Eigen::VectorXd& x) const {
  int idx = root;
  while (true) {
    const Node& n = nodes[static_cast<std::size_t>(idx)];
    if (n.leaf >= 0) return n.leaf;
    idx = x[n.dim] < n.value ? n.left : n.right;
  }
}

namespace {

// Chooses the split dimension for the pivot subset; returns -1 to delegate.
using DimChooser = std::function<int(const std::vector<int>&, int)>;

struct TreeBuilder {
  const std::vector<Eigen::VectorXd>& pivots;
  Eigen::Index dim;
  SplitTree tree;

  // Split value for the ceil(p/2) : floor(p/2) fractile of `subset` on
  // dimension d: the element at 0-based sorted rank ceil(count*ceil(p/2)/p),
  // clamped into [1, count-1]. Equal values route right.
  double fractile_value(std::vector<int>& subset, int d, int p) const {
    std::sort(subset.begin(), subset.end(), [&](int a, int b) {
      const double va = pivots[static_cast<std::size_t>(a)][d];
      const double vb = pivots[static_cast<std::size_t>(b)][d];
      if (va != vb) return va < vb;
      return a < b;
    });
    const auto count = static_cast<long long>(subset.size());
    const long long left_leaves = (p + 1) / 2;
    long long rank = (count * left_leaves + p - 1) / p;  // ceil
    rank = std::clamp<long long>(rank, 1, count - 1);
    return pivots[static_cast<std::size_t>(subset[static_cast<std::size_t>(rank)])][d];
  }

  int build(std::vector<int> subset, int p, const DimChooser& choose) {
    if (p == 1) {
      SplitTree::Node leaf;
      leaf.leaf = tree.leaf_count++;
      tree.leaf_pivots.push_back(std::move(subset));
      tree.nodes.push_back(leaf);
      return static_cast<int>(tree.nodes.size()) - 1;
    }
    int d = 0;
    double value = 0.0;
    if (subset.size() >= 2) {
      d = choose(subset, p);
      value = fractile_value(subset, d, p);
    }
    std::vector<int> left, right;
    for (int idx : subset) {
      if (pivots[static_cast<std::size_t>(idx)][d] < value) {
        left.push_back(idx);
      } else {
        right.push_back(idx);
      }
    }
    const int node_idx = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    const int l = build(std::move(left), (p + 1) / 2, choose);
    const int r = build(std::move(right), p / 2, choose);
    tree.nodes[static_cast<std::size_t>(node_idx)].dim = d;
    tree.nodes[static_cast<std::size_t>(node_idx)].value = value;
    tree.nodes[static_cast<std::size_t>(node_idx)].left = l;
    tree.nodes[static_cast<std::size_t>(node_idx)].right = r;
    return node_idx;
  }
};

SplitTree build_tree(const std::vector<Eigen::VectorXd>& pivots, int p,
                     const DimChooser& choose) {
  if (p < 1) throw std::invalid_argument("partition count must be at least 1");
  if (static_cast<long long>(pivots.size()) < p) {
    throw std::invalid_argument("fewer pivots than requested partitions");
  }
  TreeBuilder builder{pivots, pivots.empty() ? 0 : pivots[0].size(), {}};
  std::vector<int> all(pivots.size());
  std::iota(all.begin(), all.end(), 0);
  builder.tree.root = builder.build(std::move(all), p, choose);
  return std::move(builder.tree);
}

}  // namespace

SplitTree iterative_partition(const std::vector<Eigen::VectorXd>& pivots, int p,
                              std::mt19937_64& rng) {
  const Eigen::Index dim = pivots.empty() ? 1 : pivots[0].size();
  std::uniform_int_distribution<int> pick(0, static_cast<int>(dim) - 1);
  return build_tree(pivots, p,
                    [&](const std::vector<int>&, int) { return pick(rng); });
}

SplitTree learning_partition(const std::vector<Eigen::VectorXd>& pivots,
                             std::span<const int> labels, int p) {
  if (labels.size() != pivots.size()) {
    throw std::invalid_argument("labels must align with pivots");
  }
  const Eigen::Index dim = pivots.empty() ? 1 : pivots[0].size();
  TreeBuilder probe{pivots, dim, {}};
  auto choose = [&](const std::vector<int>& subset, int node_p) {
    std::vector<int> parent_labels;
    parent_labels.reserve(subset.size());
    for (int idx : subset) parent_labels.push_back(labels[static_cast<std::size_t>(idx)]);
    int best_d = 0;
    double best_gain = -1.0;
    std::vector<int> scratch = subset;
    for (int d = 0; d < dim; ++d) {
      const double value = probe.fractile_value(scratch, d, node_p);
      std::vector<std::vector<int>> children(2);
      for (int idx : subset) {
        const bool left = pivots[static_cast<std::size_t>(idx)][d] < value;
        children[left ? 0 : 1].push_back(labels[static_cast<std::size_t>(idx)]);
      }
      const double g = gain_ratio(parent_labels, children);
      if (g > best_gain) {
        best_gain = g;
        best_d = d;
      }
    }
    return best_d;
  };
  return build_tree(pivots, p, choose);
}

// ---------------------------------------------------------------------------
// Labeling: average-linkage agglomerative clustering via nearest-neighbor
// chains, cut at the requested cluster count.

std::vector<int> label_pivots(const std::vector<DataObject>& pivots, MetricKind metric,
                              int cluster_count) {
  const auto n = static_cast<Eigen::Index>(pivots.size());
  if (n == 0) throw std::invalid_argument("no pivots to label");
  if (cluster_count < 1 || cluster_count > n) {
    throw std::invalid_argument("cluster count must be in [1, pivot count]");
  }

  Eigen::MatrixXd dist(n, n);
  dist.setZero();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double d = distance(metric, pivots[static_cast<std::size_t>(i)],
                                pivots[static_cast<std::size_t>(j)]);
      dist(i, j) = d;
      dist(j, i) = d;
    }
  }

  std::vector<bool> active(static_cast<std::size_t>(n), true);
  std::vector<double> size(static_cast<std::size_t>(n), 1.0);
  struct Merge {
    Eigen::Index a, b;
    double linkage;
  };
  std::vector<Merge> merges;
  merges.reserve(static_cast<std::size_t>(n) - 1);
  std::vector<Eigen::Index> chain;

  auto nearest = [&](Eigen::Index a) {
    Eigen::Index best = -1;
    double best_d = kInf;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == a || !active[static_cast<std::size_t>(j)]) continue;
      if (dist(a, j) < best_d) {
        best_d = dist(a, j);
        best = j;
      }
    }
    return best;
  };

  while (merges.size() + 1 < static_cast<std::size_t>(n)) {
    if (chain.empty()) {
      for (Eigen::Index i = 0; i < n; ++i) {
        if (active[static_cast<std::size_t>(i)]) {
          chain.push_back(i);
          break;
        }
      }
    }
    const Eigen::Index a = chain.back();
    const Eigen::Index b = nearest(a);
    if (chain.size() >= 2 && b == chain[chain.size() - 2]) {
      chain.pop_back();
      chain.pop_back();
      const Eigen::Index keep = std::min(a, b), drop = std::max(a, b);
      merges.push_back({keep, drop, dist(a, b)});
      // Lance-Williams update for average linkage.
      const double sa = size[static_cast<std::size_t>(keep)];
      const double sb = size[static_cast<std::size_t>(drop)];
      for (Eigen::Index j = 0; j < n; ++j) {
        if (!active[static_cast<std::size_t>(j)] || j == keep || j == drop) continue;
        const double d = (sa * dist(keep, j) + sb * dist(drop, j)) / (sa + sb);
        dist(keep, j) = d;
        dist(j, keep) = d;
      }
      size[static_cast<std::size_t>(keep)] = sa + sb;
      active[static_cast<std::size_t>(drop)] = false;
    } else {
      chain.push_back(b);
    }
  }

  // Cut: apply the n - cluster_count cheapest merges in linkage order.
  std::stable_sort(merges.begin(), merges.end(),
                   [](const Merge& x, const Merge& y) { return x.linkage < y.linkage; });
  std::vector<Eigen::Index> parent(static_cast<std::size_t>(n));
  std::iota(parent.begin(), parent.end(), 0);
  std::function<Eigen::Index(Eigen::Index)> find = [&](Eigen::Index x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
      parent[static_cast<std::size_t>(x)] =
          parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
      x = parent[static_cast<std::size_t>(x)];
    }
    return x;
  };
  const auto cuts = static_cast<std::size_t>(n - cluster_count);
  for (std::size_t i = 0; i < cuts; ++i) {
    const Eigen::Index ra = find(merges[i].a), rb = find(merges[i].b);
    parent[static_cast<std::size_t>(std::max(ra, rb))] = std::min(ra, rb);
  }

  std::vector<int> labels(static_cast<std::size_t>(n), -1);
  std::unordered_map<Eigen::Index, int> order;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index r = find(i);
    auto [it, inserted] = order.try_emplace(r, static_cast<int>(order.size()));
    labels[static_cast<std::size_t>(i)] = it->second;
  }
  return labels;
}

double entropy_cost(std::span<const int> labels) {
  if (labels.empty()) throw std::invalid_argument("empty label multiset");
  std::unordered_map<int, long long> freq;
  for (int y : labels) ++freq[y];
  const double n = static_cast<double>(labels.size());
  double h = 0.0;
  for (const auto& [y, f] : freq) {
    const double p = static_cast<double>(f) / n;
    h -= p * std::log(p);
  }
  return h;
}

double gain_ratio(std::span<const int> parent,
                  std::span<const std::vector<int>> children) {
  if (parent.empty()) throw std::invalid_argument("empty parent multiset");
  std::size_t total = 0;
  int non_empty = 0;
  for (const auto& k : children) {
    total += k.size();
    if (!k.empty()) ++non_empty;
  }
  if (total != parent.size()) {
    throw std::invalid_argument("children must partition the parent multiset");
  }
  if (non_empty < 2) return 0.0;

  const double n = static_cast<double>(parent.size());
  double weighted = 0.0;
  double split_entropy = 0.0;
  for (const auto& k : children) {
    if (k.empty()) continue;
    const double share = static_cast<double>(k.size()) / n;
    weighted += share * entropy_cost(k);
    split_entropy -= share * std::log(share);
  }
  const double gain = entropy_cost(parent) - weighted;
  return gain / split_entropy;
}

// ---------------------------------------------------------------------------
// Boxes, cells, assignment, costs.

bool AreaBox::contains(const Eigen::VectorXd& x, double delta) const {
  for (Eigen::Index d = 0; d < lo.size(); ++d) {
    if (!(x[d] >= lo[d] - delta) || !(x[d] <= hi[d] + delta)) return false;
  }
  return true;
}

bool AreaBox::contains_halfopen(const Eigen::VectorXd& x, double delta) const {
  for (Eigen::Index d = 0; d < lo.size(); ++d) {
    if (!(x[d] >= lo[d] - delta) || !(x[d] < hi[d] + delta)) return false;
  }
  return true;
}

std::vector<AreaBox> build_boxes(const SplitTree& tree,
                                 const std::vector<Eigen::VectorXd>& pivots) {
  if (pivots.empty()) throw std::invalid_argument("no pivots");
  const Eigen::Index dim = pivots[0].size();
  std::vector<AreaBox> boxes(static_cast<std::size_t>(tree.leaf_count));
  for (int h = 0; h < tree.leaf_count; ++h) {
    const auto& members = tree.leaf_pivots[static_cast<std::size_t>(h)];
    if (members.empty()) {
      throw std::invalid_argument("leaf " + std::to_string(h) + " holds no pivots");
    }
    AreaBox& b = boxes[static_cast<std::size_t>(h)];
    b.lo = Eigen::ArrayXd::Constant(dim, kInf);
    b.hi = Eigen::ArrayXd::Constant(dim, -kInf);
    for (int idx : members) {
      b.lo = b.lo.min(pivots[static_cast<std::size_t>(idx)].array());
      b.hi = b.hi.max(pivots[static_cast<std::size_t>(idx)].array());
    }
  }
  return boxes;
}

namespace {

void collect_cells(const SplitTree& tree, int node_idx, AreaBox box,
                   std::vector<AreaBox>& out) {
  const SplitTree::Node& n = tree.nodes[static_cast<std::size_t>(node_idx)];
  if (n.leaf >= 0) {
    out[static_cast<std::size_t>(n.leaf)] = std::move(box);
    return;
  }
  AreaBox left = box;
  left.hi[n.dim] = std::min(left.hi[n.dim], n.value);
  AreaBox right = std::move(box);
  right.lo[n.dim] = std::max(right.lo[n.dim], n.value);
  collect_cells(tree, n.left, std::move(left), out);
  collect_cells(tree, n.right, std::move(right), out);
}

}  // namespace

std::vector<AreaBox> leaf_cells(const SplitTree& tree, Eigen::Index dim) {
  std::vector<AreaBox> cells(static_cast<std::size_t>(tree.leaf_count));
  AreaBox whole;
  whole.lo = Eigen::ArrayXd::Constant(dim, -kInf);
  whole.hi = Eigen::ArrayXd::Constant(dim, kInf);
  collect_cells(tree, tree.root, std::move(whole), cells);
  return cells;
}

PartitionAssignment assign(std::uint64_t object_id, const Eigen::VectorXd& target,
                           const SplitTree& tree, std::span<const AreaBox> areas,
                           Threshold delta) {
  PartitionAssignment a;
  a.object_id = object_id;
  a.kernel = tree.descend(target);
  for (std::size_t h = 0; h < areas.size(); ++h) {
    if (static_cast<int>(h) == a.kernel ||
        areas[h].contains_halfopen(target, delta.delta)) {
      a.whole.push_back(static_cast<int>(h));
    }
  }
  return a;
}

std::vector<long long> pair_counts_from_sizes(std::span<const long long> kernel_sizes,
                                              std::span<const long long> whole_sizes) {
  if (kernel_sizes.size() != whole_sizes.size()) {
    throw std::invalid_argument("size lists must align");
  }
  std::vector<long long> counts(kernel_sizes.size());
  for (std::size_t h = 0; h < kernel_sizes.size(); ++h) {
    const long long v = kernel_sizes[h];
    const long long w = whole_sizes[h];
    counts[h] = v * (w - v) + v * (v - 1) / 2;
  }
  return counts;
}

CostReport cost_report_from_sizes(std::span<const long long> kernel_sizes,
                                  std::span<const long long> whole_sizes) {
  CostReport r;
  r.kernel_sizes.assign(kernel_sizes.begin(), kernel_sizes.end());
  r.whole_sizes.assign(whole_sizes.begin(), whole_sizes.end());
  r.pair_counts = pair_counts_from_sizes(kernel_sizes, whole_sizes);
  for (std::size_t h = 0; h < kernel_sizes.size(); ++h) {
    r.inner += kernel_sizes[h] * kernel_sizes[h];
    r.outer += kernel_sizes[h] * (whole_sizes[h] - kernel_sizes[h]);
    r.total_pairs += r.pair_counts[h];
    r.max_pairs = std::max(r.max_pairs, r.pair_counts[h]);
  }
  r.total = r.inner + r.outer;
  const double p = static_cast<double>(r.pair_counts.size());
  r.mean_pairs = static_cast<double>(r.total_pairs) / p;
  double ss = 0.0;
  for (long long c : r.pair_counts) {
    const double d = static_cast<double>(c) - r.mean_pairs;
    ss += d * d;
  }
  r.stdev_pairs = std::sqrt(ss / p);
  return r;
}

CostReport cost_report(std::span<const PartitionAssignment> assignments, int p) {
  std::vector<long long> kernel(static_cast<std::size_t>(p), 0);
  std::vector<long long> whole(static_cast<std::size_t>(p), 0);
  for (const auto& a : assignments) {
    ++kernel[static_cast<std::size_t>(a.kernel)];
    for (int h : a.whole) ++whole[static_cast<std::size_t>(h)];
  }
  return cost_report_from_sizes(kernel, whole);
}

}  // namespace simjoin
