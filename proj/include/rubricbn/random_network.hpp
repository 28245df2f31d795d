#pragma once

#include "rubricbn/network.hpp"

#include <random>

namespace rubricbn {

struct RandomNetworkOptions {
  std::size_t variables = 8;
  std::size_t max_parents = 3;
  std::size_t max_cardinality = 2;
  // Each CPT row is one-hot instead of strictly positive.
  bool deterministic = false;
};

// Random DAG over variables named v0, v1, ... whose parents are drawn from
// lower-numbered variables. Rows of non-deterministic CPTs are strictly
// positive, so any evidence has nonzero probability.
Network random_network(std::mt19937_64& rng, const RandomNetworkOptions& options);

// Observes between 0 and max_observed distinct variables, never `exclude`.
Evidence random_evidence(const Network& n, std::mt19937_64& rng, std::size_t max_observed, VariableId exclude);

}  // namespace rubricbn
