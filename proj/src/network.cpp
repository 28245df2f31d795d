#include "rubricbn/network.hpp"

#include "rubricbn/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace rubricbn {

Cpt::Cpt(VariableId child, std::vector<VariableId> parents, Factor table)
    : child_(child), parents_(std::move(parents)), table_(std::move(table)) {
  if (std::find(parents_.begin(), parents_.end(), child_) != parents_.end()) {
    throw StructuralError("directed cycle: variable " + to_string(child_) + " is its own parent");
  }
  if (table_.scope().size() != parents_.size() + 1) {
    throw StructuralError("CPT of variable " + to_string(child_) + " has a table over " +
                          std::to_string(table_.scope().size()) + " variables, expected " +
                          std::to_string(parents_.size() + 1));
  }
  for (std::size_t k = 0; k < parents_.size(); ++k) {
    if (table_.scope()[k] != parents_[k]) {
      throw StructuralError("CPT of variable " + to_string(child_) + ": table scope does not follow parent order");
    }
  }
  if (table_.scope().back() != child_) {
    throw StructuralError("CPT of variable " + to_string(child_) + ": child must be the last table variable");
  }
}

double Cpt::probability(std::span<const std::size_t> parent_states, std::size_t child_state) const {
  std::vector<std::size_t> states(parent_states.begin(), parent_states.end());
  states.push_back(child_state);
  return table_.at(states);
}

VariableId Network::add_variable(std::string name, std::size_t cardinality) {
  Variable v{VariableId{next_id_}, std::move(name), cardinality};
  add_variable(std::move(v));
  return VariableId{next_id_ - 1};
}

void Network::add_variable(Variable variable) {
  if (variable.cardinality < 2) {
    throw StructuralError("variable '" + variable.name + "' must have at least 2 states");
  }
  if (index_.contains(variable.id)) {
    throw StructuralError("duplicate variable id " + to_string(variable.id));
  }
  if (names_.contains(variable.name)) {
    throw StructuralError("duplicate variable name '" + variable.name + "'");
  }
  index_.emplace(variable.id, variables_.size());
  names_.emplace(variable.name, variable.id);
  next_id_ = std::max(next_id_, variable.id.value + 1);
  variables_.push_back(std::move(variable));
  cpts_.emplace_back();
}

void Network::set_cpt(Cpt cpt) {
  auto it = index_.find(cpt.child());
  if (it == index_.end()) {
    throw StructuralError("CPT for unknown variable " + to_string(cpt.child()));
  }
  if (cpt.table().cardinalities().back() != variables_[it->second].cardinality) {
    throw StructuralError("CPT for '" + variables_[it->second].name + "' has the wrong child cardinality");
  }
  cpts_[it->second] = std::move(cpt);
}

const Variable& Network::variable(VariableId id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw StructuralError("unknown variable id " + to_string(id));
  return variables_[it->second];
}

std::optional<VariableId> Network::find(std::string_view name) const {
  auto it = names_.find(std::string(name));
  if (it == names_.end()) return std::nullopt;
  return it->second;
}

VariableId Network::id_of(std::string_view name) const {
  auto id = find(name);
  if (!id) throw StructuralError("unknown variable '" + std::string(name) + "'");
  return *id;
}

const Cpt* Network::cpt(VariableId id) const {
  auto it = index_.find(id);
  if (it == index_.end() || !cpts_[it->second]) return nullptr;
  return &*cpts_[it->second];
}

std::vector<const Cpt*> Network::cpts() const {
  std::vector<const Cpt*> out;
  out.reserve(cpts_.size());
  for (const auto& c : cpts_) {
    if (c) out.push_back(&*c);
  }
  return out;
}

std::vector<VariableId> Network::children(VariableId id) const {
  std::vector<VariableId> out;
  for (const auto& c : cpts_) {
    if (c && std::find(c->parents().begin(), c->parents().end(), id) != c->parents().end()) {
      out.push_back(c->child());
    }
  }
  return out;
}

std::size_t Network::edge_count() const {
  std::size_t n = 0;
  for (const auto& c : cpts_) {
    if (c) n += c->parents().size();
  }
  return n;
}

bool ValidationReport::has(ValidationIssue::Kind kind) const {
  return std::any_of(issues.begin(), issues.end(), [kind](const ValidationIssue& i) { return i.kind == kind; });
}

std::string ValidationReport::summary() const {
  std::ostringstream out;
  for (std::size_t i = 0; i < issues.size(); ++i) {
    if (i) out << "; ";
    out << issues[i].message;
  }
  return out.str();
}

namespace {

std::string describe_states(const Network& n, const std::vector<VariableId>& vars, std::span<const std::size_t> states) {
  std::ostringstream out;
  out << "(";
  for (std::size_t k = 0; k < vars.size(); ++k) {
    if (k) out << ", ";
    out << (n.contains(vars[k]) ? n.variable(vars[k]).name : to_string(vars[k])) << "=" << states[k];
  }
  out << ")";
  return out.str();
}

// Returns the variables on some cycle, or empty when the graph is acyclic.
// Dangling parents are ignored here.
std::vector<VariableId> find_cycle(const Network& n) {
  enum class Mark { kNone, kActive, kDone };
  std::unordered_map<VariableId, Mark> mark;
  std::vector<VariableId> stack;
  std::vector<VariableId> cycle;

  std::function<bool(VariableId)> visit = [&](VariableId v) {
    mark[v] = Mark::kActive;
    stack.push_back(v);
    if (const Cpt* c = n.cpt(v)) {
      for (VariableId p : c->parents()) {
        if (!n.contains(p)) continue;
        if (mark[p] == Mark::kActive) {
          auto it = std::find(stack.begin(), stack.end(), p);
          cycle.assign(it, stack.end());
          return true;
        }
        if (mark[p] == Mark::kNone && visit(p)) return true;
      }
    }
    stack.pop_back();
    mark[v] = Mark::kDone;
    return false;
  };
  for (const auto& var : n.variables()) {
    if (mark[var.id] == Mark::kNone && visit(var.id)) return cycle;
  }
  return {};
}

}  // namespace

ValidationReport validate_network(const Network& n, double tolerance) {
  using Kind = ValidationIssue::Kind;
  ValidationReport report;
  bool structurally_sound = true;

  for (const auto& var : n.variables()) {
    const Cpt* c = n.cpt(var.id);
    if (!c) {
      report.issues.push_back({Kind::kMissingCpt, "variable '" + var.name + "' has no CPT"});
      continue;
    }
    for (std::size_t k = 0; k < c->parents().size(); ++k) {
      const VariableId p = c->parents()[k];
      if (!n.contains(p)) {
        report.issues.push_back({Kind::kDanglingReference,
                                 "CPT of '" + var.name + "' references unknown parent " + to_string(p)});
        structurally_sound = false;
      } else if (n.cardinality(p) != c->table().cardinalities()[k]) {
        report.issues.push_back({Kind::kCardinality, "CPT of '" + var.name + "' disagrees with the cardinality of '" +
                                                         n.variable(p).name + "'"});
        structurally_sound = false;
      }
    }
  }

  if (auto cycle = find_cycle(n); !cycle.empty()) {
    std::string path;
    for (VariableId v : cycle) path += n.variable(v).name + " <- ";
    path += n.variable(cycle.front()).name;
    report.issues.push_back({Kind::kCycle, "directed cycle: " + path});
  }

  if (!structurally_sound) return report;

  for (const Cpt* c : n.cpts()) {
    const Factor& t = c->table();
    const std::size_t child_card = t.cardinalities().back();
    std::vector<std::size_t> parent_cards(t.cardinalities().begin(), t.cardinalities().end() - 1);
    std::size_t row = 0;
    for_each_state(parent_cards, [&](std::span<const std::size_t> states) {
      double sum = 0.0;
      for (std::size_t s = 0; s < child_card; ++s) sum += t.values()[static_cast<Eigen::Index>(row * child_card + s)];
      if (std::abs(sum - 1.0) > tolerance) {
        std::ostringstream msg;
        msg << "CPT of '" << n.variable(c->child()).name << "' sums to " << sum << " for parent state "
            << describe_states(n, c->parents(), states);
        report.issues.push_back({Kind::kNormalization, msg.str()});
      }
      ++row;
    });
  }
  return report;
}

void require_valid(const Network& n) {
  auto report = validate_network(n);
  if (!report.ok()) throw StructuralError("invalid network: " + report.summary());
}

void validate_evidence(const Network& n, const Evidence& e) {
  for (const auto& [var, state] : e) {
    if (!n.contains(var)) throw StructuralError("evidence on unknown variable " + to_string(var));
    if (state >= n.cardinality(var)) {
      throw StructuralError("evidence state " + std::to_string(state) + " out of range for '" +
                            n.variable(var).name + "'");
    }
  }
}

std::vector<VariableId> topological_order(const Network& n) {
  std::unordered_map<VariableId, std::size_t> pending;
  std::unordered_map<VariableId, std::vector<VariableId>> kids;
  for (const auto& var : n.variables()) {
    const Cpt* c = n.cpt(var.id);
    pending[var.id] = c ? c->parents().size() : 0;
    if (!c) continue;
    for (VariableId p : c->parents()) {
      if (!n.contains(p)) throw StructuralError("dangling parent " + to_string(p) + " of '" + var.name + "'");
      kids[p].push_back(var.id);
    }
  }
  std::vector<VariableId> order;
  order.reserve(n.size());
  for (const auto& var : n.variables()) {
    if (pending[var.id] == 0) order.push_back(var.id);
  }
  for (std::size_t head = 0; head < order.size(); ++head) {
    for (VariableId k : kids[order[head]]) {
      if (--pending[k] == 0) order.push_back(k);
    }
  }
  if (order.size() != n.size()) throw StructuralError("network contains a directed cycle");
  return order;
}

nlohmann::json network_to_json(const Network& n) {
  nlohmann::json doc;
  doc["variables"] = nlohmann::json::array();
  doc["cpts"] = nlohmann::json::array();
  for (const auto& var : n.variables()) {
    doc["variables"].push_back({{"id", var.id.value}, {"name", var.name}, {"cardinality", var.cardinality}});
  }
  for (const Cpt* c : n.cpts()) {
    nlohmann::json parents = nlohmann::json::array();
    for (VariableId p : c->parents()) parents.push_back(p.value);
    std::vector<double> values(c->table().values().begin(), c->table().values().end());
    doc["cpts"].push_back({{"child", c->child().value}, {"parents", parents}, {"values", values}});
  }
  return doc;
}

Network network_from_json(const nlohmann::json& doc) {
  Network n;
  try {
    for (const auto& v : doc.at("variables")) {
      n.add_variable(Variable{VariableId{v.at("id").get<std::uint32_t>()}, v.at("name").get<std::string>(),
                              v.value("cardinality", std::size_t{2})});
    }
    for (const auto& c : doc.at("cpts")) {
      const VariableId child{c.at("child").get<std::uint32_t>()};
      std::vector<VariableId> parents;
      std::vector<VariableId> scope;
      std::vector<std::size_t> cards;
      for (const auto& p : c.at("parents")) {
        const VariableId pid{p.get<std::uint32_t>()};
        if (pid == child) {
          throw StructuralError("directed cycle: variable '" + n.variable(child).name + "' is its own parent");
        }
        parents.push_back(pid);
        scope.push_back(pid);
        cards.push_back(n.cardinality(pid));
      }
      scope.push_back(child);
      cards.push_back(n.cardinality(child));
      const auto raw = c.at("values").get<std::vector<double>>();
      Eigen::ArrayXd values = Eigen::Map<const Eigen::ArrayXd>(raw.data(), static_cast<Eigen::Index>(raw.size()));
      n.set_cpt(Cpt(child, std::move(parents), Factor(std::move(scope), std::move(cards), std::move(values))));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed network document: ") + e.what());
  }
  return n;
}

}  // namespace rubricbn
