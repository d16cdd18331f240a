#include "simjoin/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace simjoin {

namespace {

double clamped_confidence(double c) {
  return std::clamp(c, kMinConfidence, 1.0);
}

}  // namespace

std::vector<long long> largest_remainder_round(const Eigen::ArrayXd& quotas,
                                               long long total) {
  const Eigen::Index n = quotas.size();
  std::vector<long long> counts(n, 0);
  long long assigned = 0;
  std::vector<std::pair<double, Eigen::Index>> remainders;
  remainders.reserve(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(quotas[i] >= 0.0)) throw std::invalid_argument("negative quota");
    const double floor_v = std::floor(quotas[i]);
    counts[i] = static_cast<long long>(floor_v);
    assigned += counts[i];
    remainders.push_back({quotas[i] - floor_v, i});
  }
  long long left = total - assigned;
  if (left < 0) throw std::invalid_argument("quotas exceed total");
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (long long j = 0; left > 0; ++j) {
    counts[remainders[static_cast<std::size_t>(j) % remainders.size()].second] += 1;
    --left;
  }
  return counts;
}

std::vector<long long> allocate_sample_sizes(std::span<const NodeSummary> summaries,
                                             long long k) {
  if (summaries.empty()) throw std::invalid_argument("no node summaries");
  if (k < 1) throw std::invalid_argument("sample size must be at least 1");
  Eigen::ArrayXd weights(summaries.size());
  for (std::size_t i = 0; i < summaries.size(); ++i) {
    if (summaries[i].cardinality < 1) {
      throw std::invalid_argument("node cardinality must be at least 1");
    }
    weights[static_cast<Eigen::Index>(i)] =
        static_cast<double>(summaries[i].cardinality) /
        clamped_confidence(summaries[i].confidence);
  }
  const Eigen::ArrayXd quotas = weights / weights.sum() * static_cast<double>(k);
  return largest_remainder_round(quotas, k);
}

StratifiedSample distribution_aware_sample(const Eigen::MatrixXd& node_data,
                                           const NodeSummary& summary, long long lc,
                                           std::mt19937_64& rng) {
  if (node_data.rows() == 0) throw std::invalid_argument("node data is empty");
  if (lc < 1) throw std::invalid_argument("local sample size must be at least 1");

  const auto strata =
      static_cast<Eigen::Index>(std::max(1.0, std::floor(std::sqrt(static_cast<double>(lc)))));
  const Eigen::Index dim = summary.model.spread_dimension();

  // Equal-probability interval edges under the fitted model.
  Eigen::ArrayXd edges(strata - 1);
  for (Eigen::Index j = 1; j < strata; ++j) {
    edges[j - 1] = summary.model.quantile(dim, static_cast<double>(j) / strata);
  }

  std::vector<std::vector<Eigen::Index>> residents(strata);
  for (Eigen::Index i = 0; i < node_data.rows(); ++i) {
    const double x = node_data(i, dim);
    const auto cell =
        std::lower_bound(edges.data(), edges.data() + edges.size(), x) - edges.data();
    residents[cell].push_back(i);
  }

  std::vector<long long> targets = largest_remainder_round(
      Eigen::ArrayXd::Constant(strata, static_cast<double>(lc) / strata), lc);

  StratifiedSample out;
  // Move targets off strata that hold no objects.
  for (Eigen::Index j = 0; j < strata; ++j) {
    if (targets[j] == 0 || !residents[j].empty()) continue;
    Eigen::Index dest = -1;
    for (Eigen::Index step = 1; step < strata; ++step) {
      if (j - step >= 0 && !residents[j - step].empty()) {
        dest = j - step;
        break;
      }
      if (j + step < strata && !residents[j + step].empty()) {
        dest = j + step;
        break;
      }
    }
    if (dest < 0) throw std::invalid_argument("node data is empty");
    targets[dest] += targets[j];
    out.warnings.push_back("stratum " + std::to_string(j) +
                           " has no resident objects; target moved to stratum " +
                           std::to_string(dest));
    targets[j] = 0;
  }

  const double accept = clamped_confidence(summary.confidence);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  out.rows.reserve(static_cast<std::size_t>(lc));
  for (Eigen::Index j = 0; j < strata; ++j) {
    if (targets[j] == 0) continue;
    std::uniform_int_distribution<std::size_t> pick(0, residents[j].size() - 1);
    for (long long c = 0; c < targets[j]; ++c) {
      Eigen::Index chosen = residents[j][pick(rng)];
      for (long long attempt = 0; attempt < 1000000; ++attempt) {
        if (accept >= 1.0 || unit(rng) < accept) break;
        chosen = residents[j][pick(rng)];
      }
      out.rows.push_back(chosen);
    }
  }
  return out;
}

Eigen::ArrayXd node_selection_weights(std::span<const NodeSummary> summaries, int c) {
  if (c != 0 && c != 1) throw std::invalid_argument("selector must be 0 or 1");
  Eigen::ArrayXd w(summaries.size());
  for (std::size_t i = 0; i < summaries.size(); ++i) {
    double v = static_cast<double>(summaries[i].cardinality);
    if (c == 1) v /= clamped_confidence(summaries[i].confidence);
    w[static_cast<Eigen::Index>(i)] = v;
  }
  return w / w.sum();
}

PivotSet gibbs_sample(std::span<const NodeSummary> summaries, long long k,
                      std::mt19937_64& rng, GibbsStats* stats) {
  if (summaries.empty()) throw std::invalid_argument("no node summaries");
  if (k < 1) throw std::invalid_argument("sample size must be at least 1");
  for (const auto& s : summaries) s.model.validate();

  const Eigen::Index m = summaries[0].model.dim();
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  auto draw_unit = [&] {
    double u = unit(rng);
    while (u <= 0.0) u = unit(rng);  // quantile(0) could be -inf
    return u;
  };
  auto draw_from = [&](std::size_t node) {
    Eigen::VectorXd x(m);
    for (Eigen::Index d = 0; d < m; ++d) {
      x[d] = summaries[node].model.quantile(d, draw_unit());
    }
    return x;
  };

  GibbsStats local;
  PivotSet out;
  out.pivots.reserve(static_cast<std::size_t>(k));

  // Initial state: node uniform, point from its model, selector 1. The first
  // state is kept as a sample.
  std::uniform_int_distribution<std::size_t> init_node(0, summaries.size() - 1);
  int prev_c = 1;
  out.pivots.push_back(draw_from(init_node(rng)));
  local.iterations = 1;

  const Eigen::ArrayXd weights[2] = {node_selection_weights(summaries, 0),
                                     node_selection_weights(summaries, 1)};

  long long consecutive_rejections = 0;
  while (static_cast<long long>(out.pivots.size()) < k) {
    ++local.iterations;
    // e ~ p(E | C = prev_c)
    const Eigen::ArrayXd& w = weights[prev_c];
    double u = unit(rng);
    std::size_t e = 0;
    for (; e + 1 < summaries.size(); ++e) {
      u -= w[static_cast<Eigen::Index>(e)];
      if (u < 0.0) break;
    }
    Eigen::VectorXd x = draw_from(e);
    const int c = unit(rng) < summaries[e].confidence ? 1 : 0;
    if (c == 1) {
      out.pivots.push_back(std::move(x));
      prev_c = 1;
      consecutive_rejections = 0;
    } else {
      // State held: the previous (accepted) state carries selector 1.
      ++local.rejections;
      if (++consecutive_rejections >= 1000000) {
        throw std::runtime_error(
            "generative sampling stalled: 1e6 consecutive rejections "
            "(all node confidences are near zero)");
      }
    }
  }
  out.provenance.assign(out.pivots.size(), kGeneratedProvenance);
  if (stats) *stats = local;
  return out;
}

double sampling_error(const std::vector<Eigen::VectorXd>& samples,
                      const MarginalCdf& reference, Eigen::Index dim) {
  if (samples.empty()) throw std::invalid_argument("no samples");
  const auto n = static_cast<double>(samples.size());
  double worst = 0.0;
  std::vector<double> xs(samples.size());
  for (Eigen::Index d = 0; d < dim; ++d) {
    for (std::size_t i = 0; i < samples.size(); ++i) xs[i] = samples[i][d];
    std::sort(xs.begin(), xs.end());
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double f = reference(d, xs[i]);
      const double above = static_cast<double>(i + 1) / n - f;
      const double below = f - static_cast<double>(i) / n;
      worst = std::max({worst, above, below});
    }
  }
  return worst;
}

double sampling_error(const std::vector<Eigen::VectorXd>& samples,
                      const EfdModel& reference) {
  return sampling_error(
      samples,
      [&reference](Eigen::Index d, double x) { return reference.cdf(d, x); },
      reference.dim());
}

long long required_sample_size(double epsilon, int m, double fail_prob) {
  if (!(epsilon > 0.0) || !(epsilon < 1.0)) {
    throw std::invalid_argument("epsilon must be in (0, 1)");
  }
  if (!(fail_prob > 0.0) || !(fail_prob < 1.0)) {
    throw std::invalid_argument("failure probability must be in (0, 1)");
  }
  if (m < 1) throw std::invalid_argument("dimension must be at least 1");
  const double k = std::log(2.0 * m / fail_prob) / (2.0 * epsilon * epsilon);
  return static_cast<long long>(std::ceil(k));
}

double global_confidence(std::span<const FitResult> fits) {
  if (fits.empty()) throw std::invalid_argument("no fit results");
  double k_sum = 0.0;
  long long dof_sum = 0;
  for (const auto& f : fits) {
    k_sum += f.k_star;
    dof_sum += f.dof;
  }
  return confidence(k_sum, static_cast<int>(dof_sum));
}

}  // namespace simjoin
