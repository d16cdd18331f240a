#include "simjoin/generator.hpp"

#include <algorithm>
#include <stdexcept>

#include "simjoin/rng.hpp"

namespace simjoin {

namespace {

void validate(const GeneratorSpec& spec) {
  if (spec.count < 1) throw std::invalid_argument("count must be at least 1");
  if (spec.kind == PayloadKind::Vector) {
    if (spec.dim < 1) throw std::invalid_argument("dim must be at least 1");
    if (spec.components.empty()) {
      throw std::invalid_argument("vector generation needs at least one component");
    }
    for (const auto& c : spec.components) {
      if (!(c.weight > 0.0)) throw std::invalid_argument("component weight must be positive");
      c.model().validate();
      if (c.param1.size() != spec.dim) {
        throw std::invalid_argument("component parameters must match dim");
      }
    }
  }
  if (!spec.node_components.empty()) {
    for (int c : spec.node_components) {
      if (c < 0 || c >= static_cast<int>(std::max<std::size_t>(spec.components.size(), 1))) {
        throw std::invalid_argument("node component index out of range");
      }
    }
  }
}

std::vector<int> pick_components(const GeneratorSpec& spec, std::mt19937_64& rng,
                                 std::size_t choices) {
  std::vector<int> component_of(spec.count, 0);
  if (!spec.node_components.empty()) {
    // Round-robin sharding sends id j to node j % M; assigning the node's
    // component here reproduces per-node local distributions downstream.
    const auto m = spec.node_components.size();
    for (long long j = 0; j < spec.count; ++j) {
      component_of[static_cast<std::size_t>(j)] =
          spec.node_components[static_cast<std::size_t>(j) % m];
    }
    return component_of;
  }
  if (choices <= 1) return component_of;
  double total = 0.0;
  std::vector<double> cumulative;
  for (const auto& c : spec.components) {
    total += c.weight;
    cumulative.push_back(total);
  }
  std::uniform_real_distribution<double> unit(0.0, total);
  for (long long j = 0; j < spec.count; ++j) {
    const double u = unit(rng);
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    component_of[static_cast<std::size_t>(j)] = static_cast<int>(
        std::min<std::ptrdiff_t>(it - cumulative.begin(),
                                 static_cast<std::ptrdiff_t>(choices) - 1));
  }
  return component_of;
}

Dataset generate_vectors(const GeneratorSpec& spec, const std::vector<int>& component_of,
                         std::mt19937_64& rng) {
  Dataset ds;
  ds.kind = PayloadKind::Vector;
  ds.dim = spec.dim;
  ds.objects.reserve(static_cast<std::size_t>(spec.count));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<EfdModel> models;
  for (const auto& c : spec.components) models.push_back(c.model());
  for (long long j = 0; j < spec.count; ++j) {
    const EfdModel& m = models[static_cast<std::size_t>(component_of[static_cast<std::size_t>(j)])];
    Eigen::VectorXd x(spec.dim);
    for (int d = 0; d < spec.dim; ++d) {
      double u = unit(rng);
      while (u <= 0.0) u = unit(rng);  // quantile(0) could be -inf
      x[d] = m.quantile(d, u);
    }
    ds.objects.push_back({static_cast<std::uint64_t>(j), std::move(x)});
  }
  return ds;
}

Dataset generate_strings(const GeneratorSpec& spec, const std::vector<int>& component_of,
                         std::mt19937_64& rng) {
  const StringSpec& s = spec.string_spec;
  if (s.centers < 1 || s.alphabet.empty() || s.center_len_min < 1 ||
      s.center_len_max < s.center_len_min) {
    throw std::invalid_argument("bad string generator parameters");
  }
  std::uniform_int_distribution<int> len_pick(s.center_len_min, s.center_len_max);
  std::uniform_int_distribution<std::size_t> chr(0, s.alphabet.size() - 1);
  std::vector<std::string> centers;
  centers.reserve(static_cast<std::size_t>(s.centers));
  for (int c = 0; c < s.centers; ++c) {
    std::string str(static_cast<std::size_t>(len_pick(rng)), 'a');
    for (auto& ch : str) ch = s.alphabet[chr(rng)];
    centers.push_back(std::move(str));
  }

  std::uniform_int_distribution<int> center_pick(0, s.centers - 1);
  std::uniform_int_distribution<int> mut_count(0, s.mutations_max);
  std::uniform_int_distribution<int> mut_kind(0, 2);
  Dataset ds;
  ds.kind = PayloadKind::String;
  for (long long j = 0; j < spec.count; ++j) {
    // Component index shifts which slice of centers a node draws from.
    const int comp = component_of[static_cast<std::size_t>(j)];
    int base = center_pick(rng);
    if (!spec.node_components.empty()) {
      const int share = std::max(1, s.centers / static_cast<int>(spec.components.size()));
      base = comp * share + base % share;
      base = std::min(base, s.centers - 1);
    }
    std::string str = centers[static_cast<std::size_t>(base)];
    const int muts = mut_count(rng);
    for (int t = 0; t < muts; ++t) {
      const int kind = mut_kind(rng);
      std::uniform_int_distribution<std::size_t> pos(0, str.empty() ? 0 : str.size() - 1);
      if (kind == 0 && !str.empty()) {
        str[pos(rng)] = s.alphabet[chr(rng)];
      } else if (kind == 1) {
        const std::size_t p = str.empty() ? 0 : pos(rng);
        str.insert(str.begin() + static_cast<std::ptrdiff_t>(p), s.alphabet[chr(rng)]);
      } else if (!str.empty()) {
        str.erase(str.begin() + static_cast<std::ptrdiff_t>(pos(rng)));
      }
    }
    ds.objects.push_back({static_cast<std::uint64_t>(j), std::move(str)});
  }
  return ds;
}

Dataset generate_sets(const GeneratorSpec& spec, const std::vector<int>& component_of,
                      std::mt19937_64& rng) {
  const SetSpec& s = spec.set_spec;
  if (s.centers < 1 || s.universe < s.set_size || s.set_size < 1) {
    throw std::invalid_argument("bad set generator parameters");
  }
  auto token = [](int t) { return "t" + std::to_string(t); };

  std::uniform_int_distribution<int> tok_pick(0, s.universe - 1);
  std::vector<std::vector<int>> centers;
  for (int c = 0; c < s.centers; ++c) {
    std::vector<int> toks;
    while (static_cast<int>(toks.size()) < s.set_size) {
      const int t = tok_pick(rng);
      if (std::find(toks.begin(), toks.end(), t) == toks.end()) toks.push_back(t);
    }
    centers.push_back(std::move(toks));
  }

  std::uniform_int_distribution<int> center_pick(0, s.centers - 1);
  std::uniform_int_distribution<int> swap_count(0, s.swaps_max);
  Dataset ds;
  ds.kind = PayloadKind::TokenSet;
  for (long long j = 0; j < spec.count; ++j) {
    const int comp = component_of[static_cast<std::size_t>(j)];
    int base = center_pick(rng);
    if (!spec.node_components.empty()) {
      const int share = std::max(1, s.centers / static_cast<int>(spec.components.size()));
      base = comp * share + base % share;
      base = std::min(base, s.centers - 1);
    }
    std::vector<int> toks = centers[static_cast<std::size_t>(base)];
    const int swaps = swap_count(rng);
    for (int t = 0; t < swaps; ++t) {
      std::uniform_int_distribution<std::size_t> pos(0, toks.size() - 1);
      const int replacement = tok_pick(rng);
      if (std::find(toks.begin(), toks.end(), replacement) == toks.end()) {
        toks[pos(rng)] = replacement;
      }
    }
    std::vector<std::string> names;
    names.reserve(toks.size());
    for (int t : toks) names.push_back(token(t));
    ds.objects.push_back({static_cast<std::uint64_t>(j), make_token_set(std::move(names))});
  }
  return ds;
}

}  // namespace

GeneratedData generate(const GeneratorSpec& spec) {
  validate(spec);
  auto rng = phase_rng(spec.seed, "gen");
  const std::size_t choices =
      spec.kind == PayloadKind::Vector ? spec.components.size()
                                       : std::max<std::size_t>(spec.components.size(), 1);
  GeneratedData out;
  out.component_of = pick_components(spec, rng, choices);
  switch (spec.kind) {
    case PayloadKind::Vector:
      out.dataset = generate_vectors(spec, out.component_of, rng);
      break;
    case PayloadKind::String:
      out.dataset = generate_strings(spec, out.component_of, rng);
      break;
    case PayloadKind::TokenSet:
      out.dataset = generate_sets(spec, out.component_of, rng);
      break;
  }
  out.component_counts.assign(choices, 0);
  for (int c : out.component_of) {
    ++out.component_counts[static_cast<std::size_t>(c)];
  }
  return out;
}

MarginalCdf mixture_marginal_cdf(const GeneratorSpec& spec,
                                 const std::vector<long long>& component_counts) {
  if (spec.kind != PayloadKind::Vector) {
    throw std::invalid_argument("mixture reference is defined for vector payloads");
  }
  if (component_counts.size() != spec.components.size()) {
    throw std::invalid_argument("component count mismatch");
  }
  long long total = 0;
  for (long long c : component_counts) total += c;
  std::vector<EfdModel> models;
  std::vector<double> weights;
  for (std::size_t i = 0; i < spec.components.size(); ++i) {
    models.push_back(spec.components[i].model());
    weights.push_back(static_cast<double>(component_counts[i]) /
                      static_cast<double>(total));
  }
  return [models = std::move(models), weights = std::move(weights)](Eigen::Index d,
                                                                    double x) {
    double p = 0.0;
    for (std::size_t i = 0; i < models.size(); ++i) {
      p += weights[i] * models[i].cdf(d, x);
    }
    return p;
  };
}

}  // namespace simjoin
