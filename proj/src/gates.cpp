#include "rubricbn/gates.hpp"

#include "rubricbn/errors.hpp"

#include <set>

namespace rubricbn {

namespace {

void require_probability(double p, const std::string& what) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw ParameterError(what + " must lie in [0, 1], got " + std::to_string(p));
  }
}

std::vector<std::size_t> binary_cards(std::size_t n) { return std::vector<std::size_t>(n, 2); }

// Builds a binary CPT from P(child = 1 | parent states).
template <typename PTrue>
Cpt binary_cpt(const std::vector<VariableId>& parents, VariableId child, PTrue&& p_true) {
  std::vector<VariableId> scope = parents;
  scope.push_back(child);
  const std::vector<std::size_t> parent_cards = binary_cards(parents.size());
  Eigen::ArrayXd values(static_cast<Eigen::Index>(std::size_t{2} << parents.size()));
  Eigen::Index row = 0;
  for_each_state(parent_cards, [&](std::span<const std::size_t> states) {
    const double p = p_true(states);
    values[row++] = 1.0 - p;
    values[row++] = p;
  });
  return Cpt(child, parents, Factor(std::move(scope), binary_cards(parents.size() + 1), std::move(values)));
}

void require_distinct(const std::vector<VariableId>& parents, VariableId child) {
  std::set<VariableId> seen;
  for (VariableId p : parents) {
    if (p == child) throw StructuralError("gate child " + to_string(child) + " listed among its parents");
    if (!seen.insert(p).second) throw StructuralError("gate parent " + to_string(p) + " listed twice");
  }
}

}  // namespace

Cpt noisy_or_cpt(const NoisyOrSpec& spec, VariableId child) {
  require_distinct(spec.parents, child);
  if (spec.inhibitions.size() != spec.parents.size()) {
    throw ParameterError("noisy-OR needs exactly one inhibition per parent");
  }
  std::vector<double> lambda;
  lambda.reserve(spec.parents.size());
  for (VariableId p : spec.parents) {
    auto it = spec.inhibitions.find(p);
    if (it == spec.inhibitions.end()) {
      throw ParameterError("noisy-OR parent " + to_string(p) + " has no inhibition");
    }
    require_probability(it->second, "inhibition of parent " + to_string(p));
    lambda.push_back(it->second);
  }
  const double leak = spec.leak_inhibition.value_or(1.0);
  require_probability(leak, "leak inhibition");

  return binary_cpt(spec.parents, child, [&](std::span<const std::size_t> states) {
    double p_off = leak;
    for (std::size_t i = 0; i < states.size(); ++i) {
      if (states[i] == 1) p_off *= lambda[i];
    }
    return 1.0 - p_off;
  });
}

Cpt and_cpt(const std::vector<VariableId>& parents, VariableId child) {
  if (parents.empty()) throw ParameterError("AND gate needs at least one parent");
  require_distinct(parents, child);
  return binary_cpt(parents, child, [](std::span<const std::size_t> states) {
    for (std::size_t s : states) {
      if (s == 0) return 0.0;
    }
    return 1.0;
  });
}

Cpt or_cpt(const std::vector<VariableId>& parents, VariableId child) {
  if (parents.empty()) throw ParameterError("OR gate needs at least one parent");
  require_distinct(parents, child);
  return binary_cpt(parents, child, [](std::span<const std::size_t> states) {
    for (std::size_t s : states) {
      if (s == 1) return 1.0;
    }
    return 0.0;
  });
}

Cpt constraint_cpt(const ConstraintSpec& spec, VariableId node) {
  if (!(spec.p_star > 0.0 && spec.p_star <= 1.0)) {
    throw ParameterError("constraint p_star must lie in (0, 1], got " + std::to_string(spec.p_star));
  }
  if (spec.superior == spec.inferior) throw StructuralError("constraint links a skill to itself");
  require_distinct({spec.superior, spec.inferior}, node);
  return binary_cpt({spec.superior, spec.inferior}, node, [&](std::span<const std::size_t> s) {
    return (s[0] == 1 && s[1] == 0) ? 0.0 : spec.p_star;
  });
}

Cpt prior_cpt(VariableId var, double p_true) {
  require_probability(p_true, "prior probability");
  return binary_cpt({}, var, [p_true](std::span<const std::size_t>) { return p_true; });
}

std::vector<VariableId> add_noisy_or_decomposition(Network& n, const NoisyOrSpec& spec, VariableId child) {
  require_distinct(spec.parents, child);
  const std::string base = n.variable(child).name;
  std::vector<VariableId> inhibitors;

  auto add_inhibitor = [&](VariableId parent, double lambda, const std::string& label) {
    require_probability(lambda, "inhibition of " + label);
    const VariableId node = n.add_variable(base + "'" + label);
    n.set_cpt(binary_cpt({parent}, node, [lambda](std::span<const std::size_t> s) {
      return s[0] == 1 ? 1.0 - lambda : 0.0;
    }));
    inhibitors.push_back(node);
  };

  for (VariableId p : spec.parents) {
    auto it = spec.inhibitions.find(p);
    if (it == spec.inhibitions.end()) throw ParameterError("noisy-OR parent " + to_string(p) + " has no inhibition");
    add_inhibitor(p, it->second, n.variable(p).name);
  }
  if (spec.leak_inhibition) {
    const VariableId leak = n.add_variable(base + "'leak_root");
    n.set_cpt(prior_cpt(leak, 1.0));
    add_inhibitor(leak, *spec.leak_inhibition, "leak");
  }
  if (inhibitors.empty()) {
    // No inputs at all: the child can never switch on.
    n.set_cpt(prior_cpt(child, 0.0));
  } else {
    n.set_cpt(or_cpt(inhibitors, child));
  }
  return inhibitors;
}

}  // namespace rubricbn
