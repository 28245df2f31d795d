#pragma once

#include "rubricbn/factor.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace rubricbn {

// Conditional probability table P(child | parents). The table's scope is
// (parents..., child) so each run of |child| consecutive entries is one
// conditional distribution.
class Cpt {
 public:
  Cpt(VariableId child, std::vector<VariableId> parents, Factor table);

  VariableId child() const { return child_; }
  const std::vector<VariableId>& parents() const { return parents_; }
  const Factor& table() const { return table_; }

  // P(child = child_state | parents = parent_states).
  double probability(std::span<const std::size_t> parent_states, std::size_t child_state) const;

 private:
  VariableId child_;
  std::vector<VariableId> parents_;
  Factor table_;
};

// Tolerance applied to input CPTs.
inline constexpr double kCptNormalizationTolerance = 1e-12;
// Tolerance applied to quantities produced by arithmetic (posteriors, joints).
inline constexpr double kArithmeticTolerance = 1e-9;

// Discrete Bayesian network. Built incrementally, then used read-only; every
// query function takes it by const reference.
class Network {
 public:
  // Adds a variable with the next free id.
  VariableId add_variable(std::string name, std::size_t cardinality = 2);
  // Adds a variable with a caller-chosen id.
  void add_variable(Variable variable);
  // Installs or replaces the CPT of cpt.child().
  void set_cpt(Cpt cpt);

  const std::vector<Variable>& variables() const { return variables_; }
  std::size_t size() const { return variables_.size(); }
  bool contains(VariableId id) const { return index_.contains(id); }
  const Variable& variable(VariableId id) const;
  std::size_t cardinality(VariableId id) const { return variable(id).cardinality; }
  std::optional<VariableId> find(std::string_view name) const;
  VariableId id_of(std::string_view name) const;

  const Cpt* cpt(VariableId id) const;
  // CPTs in variable insertion order.
  std::vector<const Cpt*> cpts() const;
  std::vector<VariableId> children(VariableId id) const;
  std::size_t edge_count() const;

 private:
  std::vector<Variable> variables_;
  std::vector<std::optional<Cpt>> cpts_;
  std::unordered_map<VariableId, std::size_t> index_;
  std::unordered_map<std::string, VariableId> names_;
  std::uint32_t next_id_ = 0;
};

struct ValidationIssue {
  enum class Kind { kCycle, kNormalization, kDanglingReference, kMissingCpt, kCardinality };
  Kind kind;
  std::string message;
};

struct ValidationReport {
  std::vector<ValidationIssue> issues;

  bool ok() const { return issues.empty(); }
  bool has(ValidationIssue::Kind kind) const;
  std::string summary() const;
};

ValidationReport validate_network(const Network& n, double tolerance = kCptNormalizationTolerance);

// Throws StructuralError carrying the report summary if validation fails.
void require_valid(const Network& n);

// Throws StructuralError for unknown variables or out-of-range states.
void validate_evidence(const Network& n, const Evidence& e);

// Topological order of all variables (parents before children). Throws
// StructuralError on cycles or dangling parents.
std::vector<VariableId> topological_order(const Network& n);

// JSON document:
//   {"variables":[{"id","name","cardinality"}],
//    "cpts":[{"child","parents":[...],"values":[...]}]}
// "values" follow the Cpt table order: parents in listed order, then the
// child, last variable fastest.
nlohmann::json network_to_json(const Network& n);
Network network_from_json(const nlohmann::json& doc);

}  // namespace rubricbn
