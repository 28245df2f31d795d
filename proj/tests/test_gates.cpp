#include "oracles.hpp"

#include "rubricbn/engine.hpp"
#include "rubricbn/errors.hpp"
#include "rubricbn/gates.hpp"

#include <doctest.h>

#include <random>

using namespace rubricbn;

namespace {

struct Gate {
  Network net;
  std::vector<VariableId> parents;
  VariableId child;
};

// Parents as roots with the given priors; the child is left without a CPT.
Gate roots(const std::vector<double>& priors) {
  Gate g;
  for (std::size_t i = 0; i < priors.size(); ++i) {
    g.parents.push_back(g.net.add_variable("X" + std::to_string(i)));
    g.net.set_cpt(prior_cpt(g.parents.back(), priors[i]));
  }
  g.child = g.net.add_variable("Y");
  return g;
}

NoisyOrSpec spec_for(const std::vector<VariableId>& parents, const std::vector<double>& lambda,
                     std::optional<double> leak) {
  NoisyOrSpec s{parents, {}, leak};
  for (std::size_t i = 0; i < parents.size(); ++i) s.inhibitions[parents[i]] = lambda[i];
  return s;
}

double p_off(const Cpt& c, const std::vector<std::size_t>& parent_states) { return c.probability(parent_states, 0); }

}  // namespace

TEST_CASE("noisy-OR without leak is off when no parent is on") {
  const Gate g = roots({0.5, 0.5});
  const Cpt c = noisy_or_cpt(spec_for(g.parents, {0.2, 0.3}, std::nullopt), g.child);
  CHECK(c.probability(std::vector<std::size_t>{0, 0}, 1) == 0.0);
}

TEST_CASE("noisy-OR single active parent is inhibited with its lambda") {
  const Gate g = roots({0.5});
  const Cpt c = noisy_or_cpt(spec_for(g.parents, {0.2}, std::nullopt), g.child);
  CHECK(p_off(c, {1}) == doctest::Approx(0.2).epsilon(1e-15));
}

TEST_CASE("noisy-OR leak alone gives a guess probability of one minus the leak inhibition") {
  const Gate g = roots({0.5, 0.5});
  const Cpt c = noisy_or_cpt(spec_for(g.parents, {0.2, 0.3}, 0.9), g.child);
  CHECK(c.probability(std::vector<std::size_t>{0, 0}, 1) == 1.0 - 0.9);
}

TEST_CASE("noisy-OR inhibitions multiply across active parents and the leak") {
  const Gate g = roots({0.5, 0.5});
  const Cpt c = noisy_or_cpt(spec_for(g.parents, {0.2, 0.3}, 0.9), g.child);
  CHECK(p_off(c, {1, 1}) == doctest::Approx(0.054).epsilon(1e-15));
  CHECK(p_off(c, {1, 1}) == doctest::Approx(oracle::inhibitor_enumeration_off({0.2, 0.3}, 0.9, {1, 1})));
}

TEST_CASE("noisy-OR CPT matches the gate formula on every parent state") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t k = std::uniform_int_distribution<std::size_t>(0, 6)(rng);
    const Gate g = roots(std::vector<double>(k, 0.5));
    std::vector<double> lambda(k);
    for (double& l : lambda) l = u(rng);
    const double leak = u(rng);
    const Cpt c = noisy_or_cpt(spec_for(g.parents, lambda, leak), g.child);
    for (std::size_t i = 0; i < (std::size_t{1} << k); ++i) {
      const auto s = oracle::decode(i, std::vector<std::size_t>(k, 2));
      const std::vector<int> x(s.begin(), s.end());
      CHECK(p_off(c, s) == doctest::Approx(oracle::noisy_or_off(lambda, leak, x)).epsilon(1e-14));
      CHECK(p_off(c, s) == doctest::Approx(oracle::inhibitor_enumeration_off(lambda, leak, x)).epsilon(1e-12));
    }
  }
}

TEST_CASE("noisy-OR with all inhibitions zero and no leak is the deterministic OR") {
  for (std::size_t k = 1; k <= 5; ++k) {
    const Gate g = roots(std::vector<double>(k, 0.5));
    const Cpt noisy = noisy_or_cpt(spec_for(g.parents, std::vector<double>(k, 0.0), std::nullopt), g.child);
    const Cpt det = or_cpt(g.parents, g.child);
    CHECK((noisy.table().values() == det.table().values()).all());
  }
}

TEST_CASE("an inhibition of one removes the parent's influence") {
  std::mt19937_64 rng(37);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const double l0 = u(rng), leak = u(rng), prior_other = u(rng);
    double reference = -1.0;
    for (double prior : {0.0, 0.2, 0.5, 0.9, 1.0}) {
      Gate g = roots({prior, prior_other});
      g.net.set_cpt(noisy_or_cpt(spec_for(g.parents, {1.0, l0}, leak), g.child));
      const double p = posterior(g.net, Query{g.child, {}})[1];
      if (reference < 0) reference = p;
      CHECK(p == doctest::Approx(reference).epsilon(1e-12));
    }
  }
}

TEST_CASE("noisy-OR matches its explicit inhibitor decomposition for any parent priors") {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t k = std::uniform_int_distribution<std::size_t>(1, 6)(rng);
    std::vector<double> priors(k), lambda(k);
    for (double& p : priors) p = u(rng);
    for (double& l : lambda) l = u(rng);
    const std::optional<double> leak = trial % 2 ? std::optional<double>(u(rng)) : std::nullopt;

    Gate direct = roots(priors);
    direct.net.set_cpt(noisy_or_cpt(spec_for(direct.parents, lambda, leak), direct.child));
    Gate split = roots(priors);
    const auto inhibitors = add_noisy_or_decomposition(split.net, spec_for(split.parents, lambda, leak), split.child);
    CHECK(inhibitors.size() == k + (leak ? 1 : 0));
    REQUIRE(validate_network(split.net).ok());

    const auto a = posterior(direct.net, Query{direct.child, {}});
    const auto b = enumerate_joint(split.net, Query{split.child, {}});
    CHECK(std::abs(a[1] - b[1]) <= 1e-9);
  }
}

TEST_CASE("noisy-OR rejects out-of-range or missing inhibitions") {
  const Gate g = roots({0.5, 0.5});
  CHECK_THROWS_AS(noisy_or_cpt(spec_for(g.parents, {0.2, 1.3}, std::nullopt), g.child), ParameterError);
  CHECK_THROWS_AS(noisy_or_cpt(spec_for(g.parents, {0.2, -0.1}, std::nullopt), g.child), ParameterError);
  CHECK_THROWS_AS(noisy_or_cpt(spec_for(g.parents, {0.2, 0.3}, 1.5), g.child), ParameterError);
  NoisyOrSpec missing{g.parents, {{g.parents[0], 0.2}}, std::nullopt};
  CHECK_THROWS_AS(noisy_or_cpt(missing, g.child), ParameterError);
}

TEST_CASE("AND gate is deterministic") {
  const Gate g = roots({0.5, 0.5});
  const Cpt c = and_cpt(g.parents, g.child);
  CHECK(c.probability(std::vector<std::size_t>{1, 1}, 1) == 1.0);
  CHECK(c.probability(std::vector<std::size_t>{0, 1}, 1) == 0.0);
  CHECK(c.probability(std::vector<std::size_t>{1, 0}, 1) == 0.0);
  CHECK(c.probability(std::vector<std::size_t>{0, 0}, 1) == 0.0);
  CHECK_THROWS_AS(and_cpt({}, g.child), ParameterError);
}

TEST_CASE("single-parent AND is the identity CPT") {
  const Gate g = roots({0.5});
  const Cpt c = and_cpt(g.parents, g.child);
  CHECK(c.probability(std::vector<std::size_t>{0}, 0) == 1.0);
  CHECK(c.probability(std::vector<std::size_t>{1}, 1) == 1.0);
}

TEST_CASE("constraint node zeroes the superior-without-inferior cell") {
  const Gate g = roots({0.5, 0.5});
  for (double p_star : {1.0, 0.4}) {
    const Cpt c = constraint_cpt({g.parents[0], g.parents[1], p_star}, g.child);
    CHECK(c.probability(std::vector<std::size_t>{1, 0}, 1) == 0.0);
    CHECK(c.probability(std::vector<std::size_t>{0, 0}, 1) == p_star);
    CHECK(c.probability(std::vector<std::size_t>{0, 1}, 1) == p_star);
    CHECK(c.probability(std::vector<std::size_t>{1, 1}, 1) == p_star);
  }
  CHECK_THROWS_AS(constraint_cpt({g.parents[0], g.parents[1], 0.0}, g.child), ParameterError);
  CHECK_THROWS_AS(constraint_cpt({g.parents[0], g.parents[1], 1.1}, g.child), ParameterError);
}

TEST_CASE("conditioning a constraint on D=1 with uniform priors gives 1/3 and 2/3") {
  for (double p_star : {1.0, 0.7, 0.05}) {
    Gate g = roots({0.5, 0.5});
    g.net.set_cpt(constraint_cpt({g.parents[0], g.parents[1], p_star}, g.child));
    const Evidence d{{g.child, 1}};
    // The three permitted joint states carry equal mass.
    const double sup = posterior(g.net, Query{g.parents[0], d})[1];
    const double inf = posterior(g.net, Query{g.parents[1], d})[1];
    CHECK(sup == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(inf == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    const Factor joint = joint_posterior(g.net, g.parents, d);
    CHECK(joint.at({1, 0}) == 0.0);
  }
}

TEST_CASE("constraint forbids superior-without-inferior under any further evidence") {
  std::mt19937_64 rng(43);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  for (int trial = 0; trial < 50; ++trial) {
    Gate g = roots({u(rng), u(rng)});
    g.net.set_cpt(constraint_cpt({g.parents[0], g.parents[1], 1.0}, g.child));
    const VariableId y = g.net.add_variable("obs");
    g.net.set_cpt(noisy_or_cpt(spec_for(g.parents, {u(rng), u(rng)}, u(rng)), y));
    const Evidence e{{g.child, 1}, {y, static_cast<std::size_t>(trial % 2)}};
    CHECK(joint_posterior(g.net, g.parents, e).at({1, 0}) == 0.0);
  }
}

TEST_CASE("prior CPT") {
  const VariableId v{0};
  CHECK((prior_cpt(v, 0.5).table().values() == Eigen::ArrayXd::Constant(2, 0.5)).all());
  CHECK(prior_cpt(v, 1.0).probability({}, 1) == 1.0);
  CHECK(prior_cpt(v, 0.0).probability({}, 0) == 1.0);
  CHECK_THROWS_AS(prior_cpt(v, 1.01), ParameterError);
  CHECK_THROWS_AS(prior_cpt(v, -0.01), ParameterError);
}
