#pragma once

#include "rubricbn/network.hpp"

#include <map>
#include <optional>
#include <vector>

namespace rubricbn {

// Noisy-OR over binary parents. inhibitions[p] is the probability that a
// present parent p fails to switch the child on. leak_inhibition, when set,
// folds an always-on leak parent into the table so that
// P(child = 0 | all parents off) = leak_inhibition.
struct NoisyOrSpec {
  std::vector<VariableId> parents;
  std::map<VariableId, double> inhibitions;
  std::optional<double> leak_inhibition;
};

// Implication X_superior => X_inferior enforced through an always-observed
// binary node. p_star is P(node = 1) for the three permitted parent states.
struct ConstraintSpec {
  VariableId superior;
  VariableId inferior;
  double p_star = 1.0;
};

// P(child = 0 | x) = leak * prod_i (x_i ? lambda_i : 1).
Cpt noisy_or_cpt(const NoisyOrSpec& spec, VariableId child);

// child = 1 iff every parent = 1.
Cpt and_cpt(const std::vector<VariableId>& parents, VariableId child);

// child = 1 iff some parent = 1. Reference gate for the noisy-OR decomposition.
Cpt or_cpt(const std::vector<VariableId>& parents, VariableId child);

// Parents are (superior, inferior). P(node = 1 | 1, 0) = 0, otherwise p_star.
Cpt constraint_cpt(const ConstraintSpec& spec, VariableId node);

// Parentless binary CPT [1 - p_true, p_true].
Cpt prior_cpt(VariableId var, double p_true);

// Builds the explicit-inhibitor form of a noisy-OR inside `n`: one inhibitor
// node per parent with P(inhibitor = 1 | parent = 1) = 1 - lambda and
// P(inhibitor = 1 | parent = 0) = 0, an always-on leak root with its own
// inhibitor when spec.leak_inhibition is set, and `child` as a deterministic
// OR of the inhibitors. Returns the ids of the added inhibitor nodes.
std::vector<VariableId> add_noisy_or_decomposition(Network& n, const NoisyOrSpec& spec, VariableId child);

}  // namespace rubricbn
