#include "rubricbn/engine.hpp"

#include "rubricbn/errors.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <unordered_set>

namespace rubricbn {

namespace {

using VarSet = std::set<VariableId>;

void check_targets(const Network& n, const std::vector<VariableId>& targets, const Evidence& evidence) {
  validate_evidence(n, evidence);
  if (targets.empty()) throw StructuralError("query has no target variable");
  VarSet seen;
  for (VariableId t : targets) {
    if (!n.contains(t)) throw StructuralError("query target " + to_string(t) + " is not in the network");
    if (evidence.contains(t)) throw StructuralError("query target '" + n.variable(t).name + "' is also evidenced");
    if (!seen.insert(t).second) throw StructuralError("query target '" + n.variable(t).name + "' listed twice");
  }
}

const Cpt& cpt_of(const Network& n, VariableId v) {
  const Cpt* c = n.cpt(v);
  if (!c) throw StructuralError("variable '" + n.variable(v).name + "' has no CPT");
  return *c;
}

// Ancestral closure of the seeds: the only variables whose CPTs can affect
// a query over the seeds.
VarSet ancestral_set(const Network& n, const std::vector<VariableId>& seeds) {
  VarSet out;
  std::vector<VariableId> stack(seeds.begin(), seeds.end());
  while (!stack.empty()) {
    const VariableId v = stack.back();
    stack.pop_back();
    if (!out.insert(v).second) continue;
    for (VariableId p : cpt_of(n, v).parents()) {
      if (!out.contains(p)) stack.push_back(p);
    }
  }
  return out;
}

struct Problem {
  std::vector<Factor> factors;
  VarSet hidden;
};

Problem build_problem(const Network& n, const VarSet& vars, const std::vector<VariableId>& targets,
                      const Evidence& evidence) {
  Problem p;
  p.factors.reserve(vars.size());
  for (VariableId v : vars) {
    p.factors.push_back(factor_reduce(cpt_of(n, v).table(), evidence));
    if (!evidence.contains(v) && std::find(targets.begin(), targets.end(), v) == targets.end()) {
      p.hidden.insert(v);
    }
  }
  return p;
}

VarSet all_variables(const Network& n) {
  VarSet out;
  for (const auto& v : n.variables()) out.insert(v.id);
  return out;
}

std::vector<VariableId> min_degree_order(const std::vector<Factor>& factors, const VarSet& hidden) {
  std::map<VariableId, VarSet> adj;
  for (VariableId h : hidden) adj[h];
  for (const Factor& f : factors) {
    for (VariableId a : f.scope()) {
      auto& na = adj[a];
      for (VariableId b : f.scope()) {
        if (a != b) na.insert(b);
      }
    }
  }
  std::vector<VariableId> order;
  order.reserve(hidden.size());
  VarSet remaining = hidden;
  while (!remaining.empty()) {
    VariableId best = *remaining.begin();
    std::size_t best_degree = adj[best].size();
    for (VariableId v : remaining) {
      if (adj[v].size() < best_degree) {
        best = v;
        best_degree = adj[v].size();
      }
    }
    const VarSet neighbours = adj[best];
    for (VariableId a : neighbours) {
      auto& na = adj[a];
      na.erase(best);
      for (VariableId b : neighbours) {
        if (a != b) na.insert(b);
      }
    }
    adj.erase(best);
    remaining.erase(best);
    order.push_back(best);
  }
  return order;
}

void eliminate(std::vector<Factor>& pool, VariableId var) {
  Factor product;
  bool touched = false;
  std::vector<Factor> rest;
  rest.reserve(pool.size());
  for (Factor& f : pool) {
    if (f.contains(var)) {
      product = touched ? factor_product(product, f) : std::move(f);
      touched = true;
    } else {
      rest.push_back(std::move(f));
    }
  }
  if (touched) rest.push_back(factor_marginalize(product, var));
  pool = std::move(rest);
}

Factor finish(std::vector<Factor> pool, const std::vector<VariableId>& targets) {
  Factor joint;
  for (const Factor& f : pool) joint = factor_product(joint, f);
  // Targets absent from every factor cannot occur: each target keeps its own CPT.
  joint = joint.aligned_to(targets);
  const double z = joint.total();
  if (!(z >= kInconsistentEvidenceThreshold)) {
    throw InconsistentEvidenceError("evidence has zero probability under the network (normalizer " +
                                    std::to_string(z) + ")");
  }
  return joint.normalized();
}

Eigen::VectorXd as_vector(const Factor& f) { return f.values().matrix(); }

std::vector<VariableId> seeds_of(const std::vector<VariableId>& targets, const Evidence& evidence) {
  std::vector<VariableId> seeds = targets;
  for (const auto& [v, s] : evidence) seeds.push_back(v);
  return seeds;
}

}  // namespace

Factor joint_posterior(const Network& n, const std::vector<VariableId>& targets, const Evidence& evidence) {
  check_targets(n, targets, evidence);
  Problem p = build_problem(n, ancestral_set(n, seeds_of(targets, evidence)), targets, evidence);
  for (VariableId v : min_degree_order(p.factors, p.hidden)) eliminate(p.factors, v);
  return finish(std::move(p.factors), targets);
}

Eigen::VectorXd posterior(const Network& n, const Query& q) {
  return as_vector(joint_posterior(n, {q.target}, q.evidence));
}

Eigen::VectorXd posterior(const Network& n, const Query& q, const EliminationOrder& order) {
  check_targets(n, {q.target}, q.evidence);
  const Problem full = build_problem(n, all_variables(n), {q.target}, q.evidence);
  const VarSet given(order.order.begin(), order.order.end());
  if (given.size() != order.order.size() || given != full.hidden) {
    throw StructuralError("elimination order must list every hidden variable exactly once");
  }
  const VarSet relevant = ancestral_set(n, seeds_of({q.target}, q.evidence));
  Problem p = build_problem(n, relevant, {q.target}, q.evidence);
  for (VariableId v : order.order) {
    if (relevant.contains(v)) eliminate(p.factors, v);
  }
  return as_vector(finish(std::move(p.factors), {q.target}));
}

EliminationOrder choose_order(const Network& n, const Query& q) {
  check_targets(n, {q.target}, q.evidence);
  const Problem p = build_problem(n, all_variables(n), {q.target}, q.evidence);
  return {min_degree_order(p.factors, p.hidden)};
}

std::size_t elimination_width(const Network& n, const Query& q, const EliminationOrder& order) {
  check_targets(n, {q.target}, q.evidence);
  const Problem p = build_problem(n, all_variables(n), {q.target}, q.evidence);
  std::vector<VarSet> scopes;
  for (const Factor& f : p.factors) scopes.emplace_back(f.scope().begin(), f.scope().end());
  std::size_t width = 0;
  for (VariableId v : order.order) {
    VarSet merged;
    std::vector<VarSet> rest;
    for (auto& s : scopes) {
      if (s.contains(v)) {
        merged.insert(s.begin(), s.end());
      } else {
        rest.push_back(std::move(s));
      }
    }
    width = std::max(width, merged.size());
    merged.erase(v);
    rest.push_back(std::move(merged));
    scopes = std::move(rest);
  }
  return width;
}

Eigen::VectorXd enumerate_joint(const Network& n, const Query& q) {
  check_targets(n, {q.target}, q.evidence);
  const std::vector<VariableId> order = topological_order(n);
  std::vector<std::size_t> cards;
  std::size_t states = 1;
  for (VariableId v : order) {
    cards.push_back(n.cardinality(v));
    if (states > kEnumerationStateLimit / cards.back()) {
      throw StateSpaceError("joint state space exceeds the enumeration limit of 2^24 states");
    }
    states *= cards.back();
  }

  std::unordered_map<VariableId, std::size_t> position;
  for (std::size_t k = 0; k < order.size(); ++k) position[order[k]] = k;

  struct Term {
    const Factor* table;
    std::vector<std::size_t> slots;  // positions of (parents..., child) in `order`
  };
  std::vector<Term> terms;
  for (VariableId v : order) {
    const Cpt& c = cpt_of(n, v);
    Term t{&c.table(), {}};
    for (VariableId p : c.parents()) t.slots.push_back(position.at(p));
    t.slots.push_back(position.at(v));
    terms.push_back(std::move(t));
  }
  std::vector<std::pair<std::size_t, std::size_t>> observed;
  for (const auto& [v, s] : q.evidence) observed.emplace_back(position.at(v), s);
  const std::size_t target_slot = position.at(q.target);

  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n.cardinality(q.target)));
  std::vector<std::size_t> local;
  for_each_state(cards, [&](std::span<const std::size_t> joint) {
    for (const auto& [slot, s] : observed) {
      if (joint[slot] != s) return;
    }
    double p = 1.0;
    for (const Term& t : terms) {
      local.clear();
      for (std::size_t slot : t.slots) local.push_back(joint[slot]);
      p *= t.table->at(local);
      if (p == 0.0) return;
    }
    out[static_cast<Eigen::Index>(joint[target_slot])] += p;
  });
  const double z = out.sum();
  if (!(z >= kInconsistentEvidenceThreshold)) {
    throw InconsistentEvidenceError("evidence has zero probability under the network");
  }
  return out / z;
}

}  // namespace rubricbn
