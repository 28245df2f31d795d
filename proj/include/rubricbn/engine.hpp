#pragma once

#include "rubricbn/network.hpp"

#include <Eigen/Core>

#include <vector>

namespace rubricbn {

struct Query {
  VariableId target;
  Evidence evidence;
};

// Order in which hidden variables are summed out. For a query it covers
// exactly the variables that are neither the target nor evidenced.
struct EliminationOrder {
  std::vector<VariableId> order;
};

// Normalizers below this are treated as zero-probability evidence.
inline constexpr double kInconsistentEvidenceThreshold = 1e-300;

// Joint states above this make enumerate_joint refuse to run.
inline constexpr std::size_t kEnumerationStateLimit = std::size_t{1} << 24;

// P(target | evidence) by variable elimination. Variables that are not
// ancestors of the target or of an evidenced variable are dropped before
// elimination (they sum to one). Throws InconsistentEvidenceError when the
// evidence has zero probability.
Eigen::VectorXd posterior(const Network& n, const Query& q);

// Same, eliminating in the caller's order. Entries for pruned variables are
// skipped. Throws StructuralError if `order` is not a permutation of the
// query's hidden variables.
Eigen::VectorXd posterior(const Network& n, const Query& q, const EliminationOrder& order);

// Normalized joint posterior over `targets` (in that scope order).
Factor joint_posterior(const Network& n, const std::vector<VariableId>& targets, const Evidence& evidence);

// Min-degree order over all hidden variables of the unpruned network. The
// interaction graph links variables sharing a CPT after evidence reduction;
// ties go to the smallest id.
EliminationOrder choose_order(const Network& n, const Query& q);

// Largest factor scope (counting the eliminated variable) formed while
// running `order` on the unpruned network.
std::size_t elimination_width(const Network& n, const Query& q, const EliminationOrder& order);

// Reference posterior obtained by summing the full joint over every
// completion of the evidence. Throws StateSpaceError above
// kEnumerationStateLimit joint states.
Eigen::VectorXd enumerate_joint(const Network& n, const Query& q);

}  // namespace rubricbn
