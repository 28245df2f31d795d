#pragma once

#include <Eigen/Core>

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace rubricbn {

struct VariableId {
  std::uint32_t value = 0;

  friend constexpr auto operator<=>(VariableId, VariableId) = default;
};

std::string to_string(VariableId id);

struct Variable {
  VariableId id;
  std::string name;
  std::size_t cardinality = 2;
};

// Observed states, keyed by variable. A variable appears at most once by
// construction; state-range checks need the network (see validate_evidence).
class Evidence {
 public:
  Evidence() = default;
  Evidence(std::initializer_list<std::pair<const VariableId, std::size_t>> init) : assignments_(init) {}

  void set(VariableId var, std::size_t state) { assignments_[var] = state; }
  void erase(VariableId var) { assignments_.erase(var); }
  bool contains(VariableId var) const { return assignments_.contains(var); }
  std::optional<std::size_t> state(VariableId var) const;
  std::size_t size() const { return assignments_.size(); }
  bool empty() const { return assignments_.empty(); }

  // Union of two evidence sets; entries of `other` win on conflict.
  Evidence merged(const Evidence& other) const;

  const std::map<VariableId, std::size_t>& assignments() const { return assignments_; }
  auto begin() const { return assignments_.begin(); }
  auto end() const { return assignments_.end(); }

 private:
  std::map<VariableId, std::size_t> assignments_;
};

// Dense nonnegative table over an ordered scope.
//
// Entries are enumerated row-major: the last scope variable changes fastest.
// For scope (A, B) with |A| = 2 and |B| = 3 the layout is
//   [a0b0, a0b1, a0b2, a1b0, a1b1, a1b2].
// A factor with an empty scope is a scalar holding one entry.
class Factor {
 public:
  // The scalar identity factor [1.0].
  Factor();
  Factor(std::vector<VariableId> scope, std::vector<std::size_t> cardinalities, Eigen::ArrayXd values);

  static Factor scalar(double value);

  const std::vector<VariableId>& scope() const { return scope_; }
  const std::vector<std::size_t>& cardinalities() const { return cardinalities_; }
  const Eigen::ArrayXd& values() const { return values_; }
  std::size_t size() const { return static_cast<std::size_t>(values_.size()); }
  bool is_scalar() const { return scope_.empty(); }

  std::optional<std::size_t> position(VariableId var) const;
  bool contains(VariableId var) const { return position(var).has_value(); }
  std::size_t cardinality(VariableId var) const;

  // Flat index of a joint state given as one state per scope variable.
  std::size_t index_of(std::span<const std::size_t> states) const;
  double at(std::span<const std::size_t> states) const { return values_[static_cast<Eigen::Index>(index_of(states))]; }
  double at(std::initializer_list<std::size_t> states) const {
    return at(std::span<const std::size_t>(states.begin(), states.size()));
  }

  // Same function, scope permuted to `order` (which must be a permutation of scope()).
  Factor aligned_to(const std::vector<VariableId>& order) const;

  double total() const { return values_.sum(); }
  Factor normalized() const;

 private:
  std::vector<VariableId> scope_;
  std::vector<std::size_t> cardinalities_;
  Eigen::ArrayXd values_;
};

// Pointwise product over the union scope: a's variables first, then the
// variables of b not already in a, each block in its original order.
Factor factor_product(const Factor& a, const Factor& b);

// Sums `var` out of `f`. Throws StructuralError if var is not in scope.
Factor factor_marginalize(const Factor& f, VariableId var);

// Restricts f to the states in `e`; evidenced variables leave the scope.
// Evidence on variables outside the scope is ignored.
Factor factor_reduce(const Factor& f, const Evidence& e);

// Entry-wise comparison after aligning b to a's scope order. False when the
// scopes differ as sets.
bool approx_equal(const Factor& a, const Factor& b, double tol);

// Calls visit(states) for every joint state of `cardinalities` in row-major order.
void for_each_state(std::span<const std::size_t> cardinalities,
                    const std::function<void(std::span<const std::size_t>)>& visit);

}  // namespace rubricbn

template <>
struct std::hash<rubricbn::VariableId> {
  std::size_t operator()(rubricbn::VariableId id) const noexcept { return std::hash<std::uint32_t>{}(id.value); }
};
