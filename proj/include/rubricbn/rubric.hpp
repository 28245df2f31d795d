#pragma once

#include "rubricbn/network.hpp"

#include <json.hpp>

#include <compare>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace rubricbn {

// Rubric cell, 1-based: row = competence component, col = proficiency level.
struct Cell {
  int row = 1;
  int col = 1;

  friend constexpr auto operator<=>(Cell, Cell) = default;
};

// "rc", e.g. "23" for row 2, column 3.
std::string cell_key(Cell c);
Cell parse_cell_key(const std::string& key);

// Rubric order: a is strictly above b.
// (r,c) > (r',c') iff (c > c' and r >= r') or (c == c' and r > r').
bool dominates(Cell a, Cell b);

// Answer node (r,c) draws on every skill at or beyond it in both dimensions.
bool is_target_parent(Cell skill, Cell answer);

struct Implication {
  Cell superior;
  Cell inferior;

  friend bool operator==(const Implication&, const Implication&) = default;
};

struct SupplementarySkill {
  std::string id;
  int group = 1;
};

struct TaskSpec {
  std::string id;
  // answer cell -> target cell -> lambda.
  std::map<Cell, std::map<Cell, double>> target_inhibitions;
  // supplementary skill -> answer cell -> lambda.
  std::map<std::string, std::map<Cell, double>> supplementary_inhibitions;
  std::set<std::string> applicable;
  double leak_inhibition = 0.9;
};

struct RubricSpec {
  std::vector<std::string> components;  // rows, lowest first
  std::vector<std::string> levels;      // columns, lowest first
  std::vector<Implication> implications;
  std::vector<SupplementarySkill> supplementary;
  // group -> component rows whose answers require that group.
  std::map<int, std::set<int>> group_rows;
  std::vector<TaskSpec> tasks;

  int rows() const { return static_cast<int>(components.size()); }
  int cols() const { return static_cast<int>(levels.size()); }
  // Row-major, (1,1) first.
  std::vector<Cell> cells() const;
  bool contains(Cell c) const { return c.row >= 1 && c.row <= rows() && c.col >= 1 && c.col <= cols(); }
  // "<component>-<level>", e.g. "1D-VS".
  std::string cell_label(Cell c) const;
  std::optional<Cell> find_label(const std::string& label) const;

  const TaskSpec& task(const std::string& id) const;
  const SupplementarySkill& skill(const std::string& id) const;
  // Groups required by answers in `row`, ascending.
  std::vector<int> required_groups(int row) const;
  // Applicable skills of `task` that belong to `group`, in declaration order.
  std::vector<std::string> group_members(const TaskSpec& task, int group) const;

  // Throws StructuralError / ParameterError naming the offending entry.
  void validate() const;
};

// Every horizontally or vertically adjacent pair, right/down cell superior.
std::vector<Implication> consecutive_implications(int rows, int cols);

struct UniformParameters {
  double lambda = 0.2;
  double leak_inhibition = 0.9;
};

struct ModelConfig {
  bool constraints_enabled = false;
  bool supplementary_enabled = false;
  // When set, replaces every target and supplementary lambda and the leak.
  std::optional<UniformParameters> uniform;
  double default_prior = 0.5;
  std::map<Cell, double> priors;
  double supplementary_prior = 0.5;
  double p_star = 1.0;
  // Direct supplementary observation nodes: add the task leak as a parent.
  bool supplementary_observation_leak = false;
  // Direct supplementary observation nodes: fixed lambda instead of the
  // lambda of the first answer cell (row-major) where the skill is relevant.
  std::optional<double> supplementary_observation_lambda;

  void validate(const RubricSpec& spec) const;
};

enum class NodeRole { kSkill, kSupplementary, kLeak, kConstraint, kTargetGroup, kSupplementaryGroup, kAnd, kAnswer,
                      kSupplementaryAnswer };

std::string to_string(NodeRole role);

struct CompiledNetwork {
  Network network;
  RubricSpec spec;
  ModelConfig config;

  std::map<Cell, VariableId> skills;
  std::map<std::string, VariableId> supplementary;
  VariableId leak;
  std::vector<std::pair<Implication, VariableId>> constraints;
  // task -> answer cell -> Y node.
  std::map<std::string, std::map<Cell, VariableId>> answers;
  // task -> skill -> direct observation node.
  std::map<std::string, std::map<std::string, VariableId>> supplementary_answers;
  // Every node by semantic name (X11, S3, leak, D_21_11, Y_T3_11, G_T3_11_X,
  // G_T3_11_g2, AND_T3_11, YS_T3_S3).
  std::map<std::string, VariableId> index;
  std::map<VariableId, NodeRole> roles;

  VariableId id(const std::string& name) const;
  std::size_t count(NodeRole role) const;

  // Leak root on, every constraint node on.
  Evidence baseline_evidence() const;
};

CompiledNetwork compile(const RubricSpec& spec, const ModelConfig& cfg);

// Observed answer states keyed by cell; absent cells stay unobserved.
using AnswerObservations = std::map<Cell, std::size_t>;
// Observed direct supplementary states keyed by skill id.
using SupplementaryObservations = std::map<std::string, std::size_t>;

// 1 on every cell at or below `achieved`, 0 on every cell above it,
// incomparable cells unobserved.
AnswerObservations encode_success_unconstrained(const RubricSpec& spec, Cell achieved);
// 1 on `achieved`, 0 on its right and lower neighbours where they exist.
AnswerObservations encode_success_constrained(const RubricSpec& spec, Cell achieved);
// Constrained: 0 on (1,1) only. Unconstrained: 0 on every cell.
AnswerObservations encode_failure(const RubricSpec& spec, bool constrained);
// 1 for applicable skills in `used`, 0 for the other applicable skills.
// Throws DataError if `used` names a skill that is not applicable.
SupplementaryObservations encode_supplementary(const TaskSpec& task, const std::set<std::string>& used);

// Evidence for one task's observations in a compiled network. Supplementary
// observations are ignored when the network has no supplementary layer.
Evidence task_evidence(const CompiledNetwork& cn, const std::string& task, const AnswerObservations& answers,
                       const SupplementaryObservations& supplementary);

// JSON rubric document. See README for the format. Errors are DataError
// with the offending field named.
RubricSpec rubric_from_json(const nlohmann::json& doc);
nlohmann::json rubric_to_json(const RubricSpec& spec);

}  // namespace rubricbn
