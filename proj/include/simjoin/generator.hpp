#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "simjoin/distribution.hpp"
#include "simjoin/metrics.hpp"
#include "simjoin/sampling.hpp"

namespace simjoin {

struct MixtureComponent {
  Family family = Family::IndependentNormal;
  Eigen::ArrayXd param1;
  Eigen::ArrayXd param2;
  double weight = 1.0;

  EfdModel model() const { return EfdModel{family, param1, param2}; }
};

// Knobs for string payloads: objects are random edits of a pool of centers.
struct StringSpec {
  int centers = 40;
  int center_len_min = 10;
  int center_len_max = 14;
  int mutations_max = 4;
  std::string alphabet = "abcdefghijklmnopqrstuvwxyz";
};

// Knobs for token-set payloads: objects are centers with tokens swapped out.
struct SetSpec {
  int universe = 200;
  int centers = 40;
  int set_size = 12;
  int swaps_max = 4;
};

struct GeneratorSpec {
  PayloadKind kind = PayloadKind::Vector;
  long long count = 1000;
  int dim = 2;
  std::uint64_t seed = 0;
  std::vector<MixtureComponent> components;
  // Optional skew: component index per node; objects are assigned to
  // components so that round-robin sharding by id reproduces per-node
  // distributions. Empty means weight-proportional mixing.
  std::vector<int> node_components;
  StringSpec string_spec;
  SetSpec set_spec;
};

struct GeneratedData {
  Dataset dataset;
  std::vector<long long> component_counts;
  std::vector<int> component_of;  // per object
};

GeneratedData generate(const GeneratorSpec& spec);

// Marginal CDF of the realized mixture, for sampling-error evaluation
// against the generating distribution. Weights are the realized component
// proportions.
MarginalCdf mixture_marginal_cdf(const GeneratorSpec& spec,
                                 const std::vector<long long>& component_counts);

}  // namespace simjoin
