#include "rubricbn/random_network.hpp"

#include <algorithm>

namespace rubricbn {

Network random_network(std::mt19937_64& rng, const RandomNetworkOptions& options) {
  Network n;
  std::uniform_int_distribution<std::size_t> card_dist(2, std::max<std::size_t>(2, options.max_cardinality));
  for (std::size_t i = 0; i < options.variables; ++i) n.add_variable("v" + std::to_string(i), card_dist(rng));

  std::uniform_real_distribution<double> weight(0.05, 1.0);
  for (std::size_t i = 0; i < options.variables; ++i) {
    const VariableId child{static_cast<std::uint32_t>(i)};
    std::vector<VariableId> candidates;
    for (std::size_t j = 0; j < i; ++j) candidates.push_back(VariableId{static_cast<std::uint32_t>(j)});
    std::shuffle(candidates.begin(), candidates.end(), rng);
    std::uniform_int_distribution<std::size_t> count_dist(0, std::min(options.max_parents, candidates.size()));
    std::vector<VariableId> parents(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(count_dist(rng)));
    std::sort(parents.begin(), parents.end());

    std::vector<VariableId> scope = parents;
    scope.push_back(child);
    std::vector<std::size_t> cards;
    std::size_t rows = 1;
    for (VariableId p : parents) {
      cards.push_back(n.cardinality(p));
      rows *= cards.back();
    }
    const std::size_t k = n.cardinality(child);
    cards.push_back(k);

    Eigen::ArrayXd values(static_cast<Eigen::Index>(rows * k));
    std::uniform_int_distribution<std::size_t> pick(0, k - 1);
    for (std::size_t r = 0; r < rows; ++r) {
      auto row = values.segment(static_cast<Eigen::Index>(r * k), static_cast<Eigen::Index>(k));
      if (options.deterministic) {
        row.setZero();
        row[static_cast<Eigen::Index>(pick(rng))] = 1.0;
      } else {
        for (Eigen::Index s = 0; s < row.size(); ++s) row[s] = weight(rng);
        row /= row.sum();
      }
    }
    n.set_cpt(Cpt(child, parents, Factor(std::move(scope), std::move(cards), std::move(values))));
  }
  return n;
}

Evidence random_evidence(const Network& n, std::mt19937_64& rng, std::size_t max_observed, VariableId exclude) {
  std::vector<VariableId> pool;
  for (const auto& v : n.variables()) {
    if (v.id != exclude) pool.push_back(v.id);
  }
  std::shuffle(pool.begin(), pool.end(), rng);
  std::uniform_int_distribution<std::size_t> count_dist(0, std::min(max_observed, pool.size()));
  const std::size_t count = count_dist(rng);
  Evidence e;
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> state(0, n.cardinality(pool[i]) - 1);
    e.set(pool[i], state(rng));
  }
  return e;
}

}  // namespace rubricbn
