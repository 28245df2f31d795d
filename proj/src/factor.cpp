#include "rubricbn/factor.hpp"

#include "rubricbn/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <unordered_set>

namespace rubricbn {

namespace {

std::vector<std::size_t> row_major_strides(const std::vector<std::size_t>& cards) {
  std::vector<std::size_t> strides(cards.size(), 1);
  for (std::size_t k = cards.size(); k-- > 1;) {
    strides[k - 1] = strides[k] * cards[k];
  }
  return strides;
}

std::size_t product_of(const std::vector<std::size_t>& cards) {
  return std::accumulate(cards.begin(), cards.end(), std::size_t{1}, std::multiplies<>());
}

// Walks the joint states of `cards` in row-major order while maintaining a
// flat offset into each source table, given that table's per-variable stride
// (zero when the source does not depend on the variable).
template <std::size_t N, typename Body>
void odometer(const std::vector<std::size_t>& cards,
              const std::array<std::vector<std::size_t>, N>& strides,
              std::array<std::size_t, N> offsets,
              Body&& body) {
  const std::size_t total = product_of(cards);
  const std::size_t k_vars = cards.size();
  std::vector<std::size_t> state(k_vars, 0);
  for (std::size_t i = 0; i < total; ++i) {
    body(i, offsets);
    for (std::size_t k = k_vars; k-- > 0;) {
      ++state[k];
      for (std::size_t s = 0; s < N; ++s) offsets[s] += strides[s][k];
      if (state[k] < cards[k]) break;
      for (std::size_t s = 0; s < N; ++s) offsets[s] -= cards[k] * strides[s][k];
      state[k] = 0;
    }
  }
}

}  // namespace

std::string to_string(VariableId id) { return std::to_string(id.value); }

std::optional<std::size_t> Evidence::state(VariableId var) const {
  auto it = assignments_.find(var);
  if (it == assignments_.end()) return std::nullopt;
  return it->second;
}

Evidence Evidence::merged(const Evidence& other) const {
  Evidence out = *this;
  for (const auto& [var, s] : other) out.set(var, s);
  return out;
}

Factor::Factor() : values_(Eigen::ArrayXd::Ones(1)) {}

Factor::Factor(std::vector<VariableId> scope, std::vector<std::size_t> cardinalities, Eigen::ArrayXd values)
    : scope_(std::move(scope)), cardinalities_(std::move(cardinalities)), values_(std::move(values)) {
  if (scope_.size() != cardinalities_.size()) {
    throw StructuralError("factor scope has " + std::to_string(scope_.size()) + " variables but " +
                          std::to_string(cardinalities_.size()) + " cardinalities");
  }
  std::unordered_set<VariableId> seen;
  for (std::size_t k = 0; k < scope_.size(); ++k) {
    if (!seen.insert(scope_[k]).second) {
      throw StructuralError("variable " + to_string(scope_[k]) + " appears twice in a factor scope");
    }
    if (cardinalities_[k] == 0) {
      throw StructuralError("variable " + to_string(scope_[k]) + " has cardinality 0");
    }
  }
  if (static_cast<std::size_t>(values_.size()) != product_of(cardinalities_)) {
    throw StructuralError("factor has " + std::to_string(values_.size()) + " entries, expected " +
                          std::to_string(product_of(cardinalities_)));
  }
  if (!values_.isFinite().all() || (values_ < 0.0).any()) {
    throw ParameterError("factor entries must be finite and nonnegative");
  }
}

Factor Factor::scalar(double value) {
  Eigen::ArrayXd v(1);
  v[0] = value;
  return Factor({}, {}, std::move(v));
}

std::optional<std::size_t> Factor::position(VariableId var) const {
  auto it = std::find(scope_.begin(), scope_.end(), var);
  if (it == scope_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - scope_.begin());
}

std::size_t Factor::cardinality(VariableId var) const {
  auto pos = position(var);
  if (!pos) throw StructuralError("variable " + to_string(var) + " is not in the factor scope");
  return cardinalities_[*pos];
}

std::size_t Factor::index_of(std::span<const std::size_t> states) const {
  if (states.size() != scope_.size()) {
    throw StructuralError("state tuple has " + std::to_string(states.size()) + " entries, scope has " +
                          std::to_string(scope_.size()));
  }
  std::size_t index = 0;
  for (std::size_t k = 0; k < states.size(); ++k) {
    if (states[k] >= cardinalities_[k]) {
      throw StructuralError("state " + std::to_string(states[k]) + " out of range for variable " +
                            to_string(scope_[k]));
    }
    index = index * cardinalities_[k] + states[k];
  }
  return index;
}

Factor Factor::aligned_to(const std::vector<VariableId>& order) const {
  if (order.size() != scope_.size()) {
    throw StructuralError("alignment order is not a permutation of the factor scope");
  }
  if (order == scope_) return *this;
  const auto src_strides = row_major_strides(cardinalities_);
  std::vector<std::size_t> cards(order.size());
  std::array<std::vector<std::size_t>, 1> strides{std::vector<std::size_t>(order.size())};
  for (std::size_t k = 0; k < order.size(); ++k) {
    auto pos = position(order[k]);
    if (!pos) throw StructuralError("alignment order is not a permutation of the factor scope");
    cards[k] = cardinalities_[*pos];
    strides[0][k] = src_strides[*pos];
  }
  Eigen::ArrayXd out(values_.size());
  odometer<1>(cards, strides, {0}, [&](std::size_t i, const std::array<std::size_t, 1>& off) {
    out[static_cast<Eigen::Index>(i)] = values_[static_cast<Eigen::Index>(off[0])];
  });
  return Factor(order, std::move(cards), std::move(out));
}

Factor Factor::normalized() const {
  const double z = total();
  if (!(z > 0.0)) throw ParameterError("cannot normalize a factor with zero total mass");
  return Factor(scope_, cardinalities_, values_ / z);
}

Factor factor_product(const Factor& a, const Factor& b) {
  if (b.is_scalar()) return Factor(a.scope(), a.cardinalities(), a.values() * b.values()[0]);
  if (a.is_scalar()) return Factor(b.scope(), b.cardinalities(), b.values() * a.values()[0]);

  std::vector<VariableId> scope = a.scope();
  std::vector<std::size_t> cards = a.cardinalities();
  for (std::size_t k = 0; k < b.scope().size(); ++k) {
    const VariableId var = b.scope()[k];
    if (auto pos = a.position(var)) {
      if (a.cardinalities()[*pos] != b.cardinalities()[k]) {
        throw StructuralError("cardinality mismatch on shared variable " + to_string(var) + ": " +
                              std::to_string(a.cardinalities()[*pos]) + " vs " +
                              std::to_string(b.cardinalities()[k]));
      }
    } else {
      scope.push_back(var);
      cards.push_back(b.cardinalities()[k]);
    }
  }

  const auto a_strides = row_major_strides(a.cardinalities());
  const auto b_strides = row_major_strides(b.cardinalities());
  std::array<std::vector<std::size_t>, 2> strides{std::vector<std::size_t>(scope.size(), 0),
                                                  std::vector<std::size_t>(scope.size(), 0)};
  for (std::size_t k = 0; k < scope.size(); ++k) {
    if (auto pa = a.position(scope[k])) strides[0][k] = a_strides[*pa];
    if (auto pb = b.position(scope[k])) strides[1][k] = b_strides[*pb];
  }

  Eigen::ArrayXd out(static_cast<Eigen::Index>(product_of(cards)));
  const double* av = a.values().data();
  const double* bv = b.values().data();
  odometer<2>(cards, strides, {0, 0}, [&](std::size_t i, const std::array<std::size_t, 2>& off) {
    out[static_cast<Eigen::Index>(i)] = av[off[0]] * bv[off[1]];
  });
  return Factor(std::move(scope), std::move(cards), std::move(out));
}

Factor factor_marginalize(const Factor& f, VariableId var) {
  auto pos = f.position(var);
  if (!pos) throw StructuralError("cannot marginalize variable " + to_string(var) + ": not in scope");

  const auto& cards = f.cardinalities();
  std::size_t outer = 1;
  for (std::size_t k = 0; k < *pos; ++k) outer *= cards[k];
  const std::size_t card = cards[*pos];
  std::size_t inner = 1;
  for (std::size_t k = *pos + 1; k < cards.size(); ++k) inner *= cards[k];

  std::vector<VariableId> scope = f.scope();
  std::vector<std::size_t> out_cards = cards;
  scope.erase(scope.begin() + static_cast<std::ptrdiff_t>(*pos));
  out_cards.erase(out_cards.begin() + static_cast<std::ptrdiff_t>(*pos));

  Eigen::ArrayXd out = Eigen::ArrayXd::Zero(static_cast<Eigen::Index>(outer * inner));
  const double* src = f.values().data();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t s = 0; s < card; ++s) {
      const double* row = src + (o * card + s) * inner;
      for (std::size_t in = 0; in < inner; ++in) out[static_cast<Eigen::Index>(o * inner + in)] += row[in];
    }
  }
  return Factor(std::move(scope), std::move(out_cards), std::move(out));
}

Factor factor_reduce(const Factor& f, const Evidence& e) {
  const auto src_strides = row_major_strides(f.cardinalities());
  std::vector<VariableId> scope;
  std::vector<std::size_t> cards;
  std::array<std::vector<std::size_t>, 1> strides;
  std::size_t base = 0;
  bool any = false;
  for (std::size_t k = 0; k < f.scope().size(); ++k) {
    if (auto s = e.state(f.scope()[k])) {
      if (*s >= f.cardinalities()[k]) {
        throw StructuralError("evidence state " + std::to_string(*s) + " out of range for variable " +
                              to_string(f.scope()[k]));
      }
      base += *s * src_strides[k];
      any = true;
    } else {
      scope.push_back(f.scope()[k]);
      cards.push_back(f.cardinalities()[k]);
      strides[0].push_back(src_strides[k]);
    }
  }
  if (!any) return f;

  Eigen::ArrayXd out(static_cast<Eigen::Index>(product_of(cards)));
  odometer<1>(cards, strides, {base}, [&](std::size_t i, const std::array<std::size_t, 1>& off) {
    out[static_cast<Eigen::Index>(i)] = f.values()[static_cast<Eigen::Index>(off[0])];
  });
  return Factor(std::move(scope), std::move(cards), std::move(out));
}

bool approx_equal(const Factor& a, const Factor& b, double tol) {
  if (a.scope().size() != b.scope().size()) return false;
  for (VariableId v : a.scope()) {
    if (!b.contains(v) || a.cardinality(v) != b.cardinality(v)) return false;
  }
  const Factor bb = b.aligned_to(a.scope());
  return ((a.values() - bb.values()).abs() <= tol).all();
}

void for_each_state(std::span<const std::size_t> cardinalities,
                    const std::function<void(std::span<const std::size_t>)>& visit) {
  std::vector<std::size_t> state(cardinalities.size(), 0);
  for (std::size_t c : cardinalities) {
    if (c == 0) return;
  }
  while (true) {
    visit(state);
    std::size_t k = state.size();
    while (k > 0) {
      --k;
      if (++state[k] < cardinalities[k]) break;
      state[k] = 0;
      if (k == 0) return;
    }
    if (state.empty()) return;
  }
}

}  // namespace rubricbn
