#include "oracles.hpp"

#include "rubricbn/cat.hpp"
#include "rubricbn/engine.hpp"
#include "rubricbn/errors.hpp"
#include "rubricbn/gates.hpp"
#include "rubricbn/rubric.hpp"

#include <doctest.h>

#include <random>

using namespace rubricbn;

namespace {

std::vector<VariableId> parents_of(const CompiledNetwork& cn, VariableId v) { return cn.network.cpt(v)->parents(); }

std::set<std::string> names(const CompiledNetwork& cn, const std::vector<VariableId>& ids) {
  std::set<std::string> out;
  for (VariableId id : ids) out.insert(cn.network.variable(id).name);
  return out;
}

RubricSpec single_cell(double lambda, double leak) {
  RubricSpec s;
  s.components = {"only"};
  s.levels = {"level"};
  TaskSpec t;
  t.id = "T";
  t.target_inhibitions[Cell{1, 1}][Cell{1, 1}] = lambda;
  t.leak_inhibition = leak;
  s.tasks = {t};
  return s;
}

std::size_t cell_index(Cell c) { return static_cast<std::size_t>(3 * (c.row - 1) + (c.col - 1)); }

}  // namespace

TEST_CASE("dominance agrees with the rubric order on every pair of cells") {
  const RubricSpec spec = builtin_cat_spec();
  for (Cell a : spec.cells()) {
    for (Cell b : spec.cells()) {
      CHECK(dominates(a, b) == oracle::dominates({a.row, a.col}, {b.row, b.col}));
    }
  }
  CHECK_FALSE(dominates(Cell{1, 3}, Cell{2, 2}));
  CHECK_FALSE(dominates(Cell{2, 2}, Cell{1, 3}));
  CHECK_FALSE(dominates(Cell{3, 1}, Cell{2, 2}));
}

TEST_CASE("cell keys round-trip and reject malformed text") {
  CHECK(parse_cell_key("23") == Cell{2, 3});
  CHECK(cell_key(Cell{3, 1}) == "31");
  CHECK_THROWS_AS(parse_cell_key("2"), DataError);
  CHECK_THROWS_AS(parse_cell_key("0a"), DataError);
}

TEST_CASE("the consecutive rule yields six horizontal and six vertical pairs") {
  const auto imps = consecutive_implications(3, 3);
  CHECK(imps.size() == 12);
  for (const auto& imp : imps) {
    const int dr = imp.superior.row - imp.inferior.row, dc = imp.superior.col - imp.inferior.col;
    CHECK(((dr == 1 && dc == 0) || (dr == 0 && dc == 1)));
  }
}

TEST_CASE("builtin CAT rubric shape") {
  const RubricSpec spec = builtin_cat_spec();
  CHECK(spec.cells().size() == 9);
  CHECK(spec.supplementary.size() == 10);
  CHECK(spec.tasks.size() == 12);
  CHECK(spec.implications.size() == 12);
  CHECK(spec.cell_label(Cell{2, 2}) == "1D-VS");
  CHECK(spec.find_label("2D-V") == Cell{3, 3});
  const auto& t3 = spec.task("T3").applicable;
  CHECK(t3 == std::set<std::string>{"S1", "S2", "S3", "S5", "S8", "S9", "S10"});
  CHECK(spec.required_groups(3) == std::vector<int>{1, 2, 3});
  CHECK(spec.required_groups(1) == std::vector<int>{1});
  CHECK(spec.skill("S1").group == 1);
  CHECK(spec.skill("S7").group == 2);
  CHECK(spec.skill("S10").group == 3);
}

TEST_CASE("model B has 118 variables and the bottom-left answer has ten parents") {
  const CompiledNetwork cn = compile(cat_parameters(Variant::kB), cat_model_config(Variant::kB));
  CHECK(cn.network.size() == 118);
  CHECK(cn.count(NodeRole::kSkill) == 9);
  CHECK(cn.count(NodeRole::kLeak) == 1);
  CHECK(cn.count(NodeRole::kAnswer) == 108);
  CHECK(parents_of(cn, cn.id("Y_T1_11")).size() == 10);
  CHECK(parents_of(cn, cn.id("Y_T7_33")).size() == 2);
}

TEST_CASE("model BC adds twelve constraint nodes") {
  const CompiledNetwork cn = compile(cat_parameters(Variant::kBC), cat_model_config(Variant::kBC));
  CHECK(cn.count(NodeRole::kConstraint) == 12);
  CHECK(cn.network.size() == 130);
  CHECK(cn.baseline_evidence().size() == 13);
}

TEST_CASE("answer nodes draw exactly on the targets at or beyond their cell") {
  for (Variant v : kAllVariants) {
    CAPTURE(to_string(v));
    const CompiledNetwork cn = compile(cat_parameters(v), cat_model_config(v));
    for (const auto& [task, cells] : cn.answers) {
      for (const auto& [a, y] : cells) {
        std::set<std::string> expected;
        for (Cell p : cn.spec.cells()) {
          if (p.row >= a.row && p.col >= a.col) expected.insert("X" + cell_key(p));
        }
        const VariableId side = uses_supplementary(v) ? cn.id("G_" + task + "_" + cell_key(a) + "_X") : y;
        std::set<std::string> got = names(cn, parents_of(cn, side));
        got.erase("leak");
        CHECK(got == expected);
      }
    }
  }
}

TEST_CASE("BCS answers combine a target group and the required supplementary groups") {
  const CompiledNetwork cn = compile(cat_parameters(Variant::kBCS), cat_model_config(Variant::kBCS));
  CHECK(names(cn, parents_of(cn, cn.id("Y_T3_31"))) == std::set<std::string>{"AND_T3_31", "leak"});
  CHECK(names(cn, parents_of(cn, cn.id("AND_T3_31"))) ==
        std::set<std::string>{"G_T3_31_X", "G_T3_31_g1", "G_T3_31_g2", "G_T3_31_g3"});
  CHECK(names(cn, parents_of(cn, cn.id("AND_T3_11"))) == std::set<std::string>{"G_T3_11_X", "G_T3_11_g1"});
  CHECK(names(cn, parents_of(cn, cn.id("G_T3_21_g2"))) == std::set<std::string>{"S2", "S3", "S5"});
  CHECK(names(cn, parents_of(cn, cn.id("YS_T3_S3"))) == std::set<std::string>{"S3"});
  CHECK_FALSE(cn.index.contains("YS_T3_S4"));
  CHECK(cn.supplementary_answers.at("T3").size() == 7);
}

TEST_CASE("a single-cell rubric compiles its answer straight to the noisy-OR table") {
  const CompiledNetwork cn = compile(single_cell(0.3, 0.85), ModelConfig{});
  CHECK(cn.network.size() == 3);
  const VariableId x = cn.id("X11"), y = cn.id("Y_T_11");
  const Cpt direct = noisy_or_cpt({{x, cn.leak}, {{x, 0.3}, {cn.leak, 0.85}}, std::nullopt}, y);
  CHECK(approx_equal(cn.network.cpt(y)->table(), direct.table(), 0.0));
}

TEST_CASE("a missing inhibition names the task, answer and target") {
  RubricSpec s = cat_parameters(Variant::kB);
  for (auto& t : s.tasks) {
    if (t.id == "T5") t.target_inhibitions[Cell{2, 2}].erase(Cell{3, 3});
  }
  try {
    compile(s, cat_model_config(Variant::kB));
    FAIL("expected ParameterError");
  } catch (const ParameterError& e) {
    const std::string what = e.what();
    CHECK(what.find("T5") != std::string::npos);
    CHECK(what.find("22") != std::string::npos);
    CHECK(what.find("33") != std::string::npos);
  }
}

TEST_CASE("unconstrained success encoding follows the dominance rule") {
  const RubricSpec spec = builtin_cat_spec();
  const AnswerObservations mid = encode_success_unconstrained(spec, Cell{2, 2});
  CHECK(mid == AnswerObservations{{{1, 1}, 1}, {{1, 2}, 1}, {{2, 1}, 1}, {{2, 2}, 1}, {{2, 3}, 0}, {{3, 2}, 0}, {{3, 3}, 0}});
  CHECK(encode_success_unconstrained(spec, Cell{3, 3}).size() == 9);
  for (const auto& [c, s] : encode_success_unconstrained(spec, Cell{3, 3})) CHECK(s == 1);
  const AnswerObservations low = encode_success_unconstrained(spec, Cell{1, 1});
  CHECK(low.size() == 9);
  CHECK(low.at(Cell{1, 1}) == 1);
  for (const auto& [c, s] : low) {
    if (c != Cell{1, 1}) CHECK(s == 0);
  }
}

TEST_CASE("unconstrained encoding is consistent with dominance for every achieved cell") {
  const RubricSpec spec = builtin_cat_spec();
  for (Cell star : spec.cells()) {
    const auto obs = encode_success_unconstrained(spec, star);
    for (Cell c : spec.cells()) {
      const bool below = c == star || oracle::dominates({star.row, star.col}, {c.row, c.col});
      const bool above = oracle::dominates({c.row, c.col}, {star.row, star.col});
      if (below) {
        CHECK(obs.at(c) == 1);
      } else if (above) {
        CHECK(obs.at(c) == 0);
      } else {
        CHECK_FALSE(obs.contains(c));
      }
    }
  }
}

TEST_CASE("constrained success encoding observes the cell and its two successors") {
  const RubricSpec spec = builtin_cat_spec();
  CHECK(encode_success_constrained(spec, Cell{2, 2}) == AnswerObservations{{{2, 2}, 1}, {{2, 3}, 0}, {{3, 2}, 0}});
  CHECK(encode_success_constrained(spec, Cell{3, 3}) == AnswerObservations{{{3, 3}, 1}});
  CHECK(encode_success_constrained(spec, Cell{1, 3}) == AnswerObservations{{{1, 3}, 1}, {{2, 3}, 0}});
  for (Cell c : spec.cells()) {
    const auto obs = encode_success_constrained(spec, c);
    CHECK_FALSE((obs.contains(Cell{1, 1}) && obs.at(Cell{1, 1}) == 0));
  }
}

TEST_CASE("failure encodings") {
  const RubricSpec spec = builtin_cat_spec();
  CHECK(encode_failure(spec, true) == AnswerObservations{{{1, 1}, 0}});
  const auto all = encode_failure(spec, false);
  CHECK(all.size() == 9);
  for (const auto& [c, s] : all) CHECK(s == 0);
}

TEST_CASE("supplementary encoding marks used skills and zeroes the rest") {
  const RubricSpec spec = builtin_cat_spec();
  const auto t3 = encode_supplementary(spec.task("T3"), {"S3", "S10"});
  CHECK(t3.size() == 7);
  CHECK(t3.at("S3") == 1);
  CHECK(t3.at("S10") == 1);
  CHECK(t3.at("S1") == 0);
  CHECK(t3.at("S9") == 0);
  const auto none = encode_supplementary(spec.task("T10"), {});
  CHECK(none.size() == 4);
  for (const auto& [s, v] : none) CHECK(v == 0);
  CHECK_THROWS_AS(encode_supplementary(spec.task("T3"), {"S4"}), DataError);
}

TEST_CASE("clamped constraints reproduce the down-set priors") {
  const auto expected = oracle::down_set_marginals();
  CHECK(oracle::grid_down_sets().size() == 20);
  CHECK(expected[0] == doctest::Approx(19.0 / 20.0));
  CHECK(expected[8] == doctest::Approx(1.0 / 20.0));
  const double paper[9] = {0.95, 0.8, 0.5, 0.8, 0.5, 0.2, 0.5, 0.2, 0.05};
  for (Variant v : {Variant::kBC, Variant::kBCS, Variant::kECS}) {
    CAPTURE(to_string(v));
    const CompiledNetwork cn = compile(cat_parameters(v), cat_model_config(v));
    for (const auto& [cell, x] : cn.skills) {
      const double p = posterior(cn.network, Query{x, cn.baseline_evidence()})[1];
      CHECK(std::abs(p - expected[cell_index(cell)]) <= 1e-6);
      CHECK(std::abs(p - paper[cell_index(cell)]) <= 1e-6);
    }
  }
}

TEST_CASE("constraint pairs stay ordered under random answer evidence") {
  std::mt19937_64 rng(77);
  for (Variant v : {Variant::kBC, Variant::kBCS}) {
    CAPTURE(to_string(v));
    const CompiledNetwork cn = compile(cat_parameters(v), cat_model_config(v));
    std::vector<VariableId> observable;
    for (const auto& [id, role] : cn.roles) {
      if (role == NodeRole::kAnswer || role == NodeRole::kSupplementaryAnswer) observable.push_back(id);
    }
    std::vector<VariableId> targets;
    for (const auto& [cell, x] : cn.skills) targets.push_back(x);
    for (int trial = 0; trial < 10; ++trial) {
      Evidence e = cn.baseline_evidence();
      std::shuffle(observable.begin(), observable.end(), rng);
      const std::size_t k = std::uniform_int_distribution<std::size_t>(1, 12)(rng);
      for (std::size_t i = 0; i < k; ++i) e.set(observable[i], rng() % 2);
      const Factor joint = joint_posterior(cn.network, targets, e);
      for (const auto& [imp, d] : cn.constraints) {
        const VariableId sup_id = cn.skills.at(imp.superior), inf_id = cn.skills.at(imp.inferior);
        Factor pair = joint;
        for (VariableId t : targets) {
          if (t != sup_id && t != inf_id) pair = factor_marginalize(pair, t);
        }
        pair = pair.aligned_to({sup_id, inf_id});
        const double sup = pair.at({1, 0}) + pair.at({1, 1});
        const double inf = pair.at({0, 1}) + pair.at({1, 1});
        CHECK(sup <= inf + 1e-9);
        CHECK(std::abs(pair.at({1, 0})) <= 1e-12);
      }
    }
  }
}

TEST_CASE("with skills present and zero group inhibition, BCS answers reduce to BC answers") {
  RubricSpec spec = cat_parameters(Variant::kBCS);
  for (auto& t : spec.tasks) {
    for (auto& [skill, row] : t.supplementary_inhibitions) {
      for (auto& [cell, l] : row) l = 0.0;
    }
  }
  const CompiledNetwork bcs = compile(spec, cat_model_config(Variant::kBCS));
  const CompiledNetwork bc = compile(spec, cat_model_config(Variant::kBC));
  for (const char* answer : {"Y_T3_33", "Y_T3_22", "Y_T10_21"}) {
    CAPTURE(answer);
    const Cpt& reference = *bc.network.cpt(bc.id(answer));
    const auto& parents = reference.parents();
    for (std::size_t mask = 0; mask < (std::size_t{1} << (parents.size() - 1)); ++mask) {
      Evidence e{{bcs.leak, 1}};
      for (const auto& [s, id] : bcs.supplementary) e.set(id, 1);
      std::vector<std::size_t> states;
      for (std::size_t i = 0; i + 1 < parents.size(); ++i) {
        const std::size_t bit = (mask >> i) & 1U;
        e.set(bcs.id(bc.network.variable(parents[i]).name), bit);
        states.push_back(bit);
      }
      states.push_back(1);
      const double p = posterior(bcs.network, Query{bcs.id(answer), e})[1];
      CHECK(std::abs(p - reference.probability(states, 1)) <= 1e-12);
    }
  }
}

TEST_CASE("compilation serializes to identical bytes") {
  for (Variant v : kAllVariants) {
    const std::string a = network_to_json(compile(cat_parameters(v), cat_model_config(v)).network).dump();
    const std::string b = network_to_json(compile(cat_parameters(v), cat_model_config(v)).network).dump();
    CHECK(a == b);
  }
}

TEST_CASE("rubric JSON round-trips") {
  for (Variant v : kAllVariants) {
    const RubricSpec spec = cat_parameters(v);
    const nlohmann::json doc = rubric_to_json(spec);
    CHECK(rubric_to_json(rubric_from_json(doc)) == doc);
    const std::string a = network_to_json(compile(spec, cat_model_config(v)).network).dump();
    const std::string b = network_to_json(compile(rubric_from_json(doc), cat_model_config(v)).network).dump();
    CHECK(a == b);
  }
}

TEST_CASE("rubric JSON shorthands expand to the full tables") {
  const nlohmann::json doc = nlohmann::json::parse(R"({
    "components": ["a", "b"], "levels": ["x", "y"], "implications": "consecutive",
    "supplementary": [{"id": "S1", "group": 1}], "group_rows": {"1": [1, 2]},
    "tasks": [{"id": "T", "applicable": ["S1"], "lambda_targets": 0.3, "lambda_supp": 0.4, "lambda_leak": 0.8}]
  })");
  const RubricSpec spec = rubric_from_json(doc);
  CHECK(spec.implications.size() == 4);
  const TaskSpec& t = spec.task("T");
  CHECK(t.target_inhibitions.at(Cell{1, 1}).size() == 4);
  CHECK(t.target_inhibitions.at(Cell{2, 2}).size() == 1);
  CHECK(t.target_inhibitions.at(Cell{1, 2}).at(Cell{2, 2}) == 0.3);
  CHECK(t.supplementary_inhibitions.at("S1").size() == 4);
  CHECK(t.leak_inhibition == 0.8);
}

TEST_CASE("an out-of-range inhibition in JSON names the task and cell") {
  nlohmann::json doc = rubric_to_json(builtin_cat_spec());
  for (auto& t : doc["tasks"]) {
    if (t["id"] == "T3") t["lambda_targets"]["22"]["23"] = 1.3;
  }
  try {
    rubric_from_json(doc);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    const std::string what = e.what();
    CHECK(what.find("T3") != std::string::npos);
    CHECK(what.find("[22][23]") != std::string::npos);
    CHECK(what.find("1.3") != std::string::npos);
  }
}

TEST_CASE("structural rubric errors are rejected") {
  RubricSpec cyclic = builtin_cat_spec();
  cyclic.implications.push_back({Cell{1, 1}, Cell{3, 3}});
  CHECK_THROWS_AS(compile(cyclic, cat_model_config(Variant::kBC)), StructuralError);

  RubricSpec dangling = builtin_cat_spec();
  dangling.implications.push_back({Cell{4, 1}, Cell{3, 1}});
  CHECK_THROWS_AS(dangling.validate(), StructuralError);

  RubricSpec no_skills = single_cell(0.2, 0.9);
  ModelConfig cfg;
  cfg.supplementary_enabled = true;
  CHECK_THROWS(compile(no_skills, cfg));
}
