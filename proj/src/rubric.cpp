#include "rubricbn/rubric.hpp"

#include "rubricbn/errors.hpp"
#include "rubricbn/gates.hpp"

#include <algorithm>
#include <functional>
#include <sstream>

namespace rubricbn {

namespace {

std::string fmt(double v) {
  std::ostringstream out;
  out << v;
  return out.str();
}

void require_lambda(double v, const std::string& where) {
  if (!(v >= 0.0 && v <= 1.0)) throw ParameterError(where + ": inhibition " + fmt(v) + " outside [0, 1]");
}

}  // namespace

std::string cell_key(Cell c) { return std::to_string(c.row) + std::to_string(c.col); }

Cell parse_cell_key(const std::string& key) {
  if (key.size() != 2 || key[0] < '1' || key[0] > '9' || key[1] < '1' || key[1] > '9') {
    throw DataError("bad cell key '" + key + "': expected two digits <row><column>");
  }
  return Cell{key[0] - '0', key[1] - '0'};
}

bool dominates(Cell a, Cell b) { return (a.col > b.col && a.row >= b.row) || (a.col == b.col && a.row > b.row); }

bool is_target_parent(Cell skill, Cell answer) { return skill.row >= answer.row && skill.col >= answer.col; }

std::vector<Cell> RubricSpec::cells() const {
  std::vector<Cell> out;
  for (int r = 1; r <= rows(); ++r) {
    for (int c = 1; c <= cols(); ++c) out.push_back(Cell{r, c});
  }
  return out;
}

std::string RubricSpec::cell_label(Cell c) const {
  if (!contains(c)) throw StructuralError("cell " + cell_key(c) + " is outside the rubric");
  return components[static_cast<std::size_t>(c.row - 1)] + "-" + levels[static_cast<std::size_t>(c.col - 1)];
}

std::optional<Cell> RubricSpec::find_label(const std::string& label) const {
  for (Cell c : cells()) {
    if (cell_label(c) == label) return c;
  }
  return std::nullopt;
}

const TaskSpec& RubricSpec::task(const std::string& id) const {
  for (const auto& t : tasks) {
    if (t.id == id) return t;
  }
  throw DataError("unknown task '" + id + "'");
}

const SupplementarySkill& RubricSpec::skill(const std::string& id) const {
  for (const auto& s : supplementary) {
    if (s.id == id) return s;
  }
  throw DataError("unknown supplementary skill '" + id + "'");
}

std::vector<int> RubricSpec::required_groups(int row) const {
  std::vector<int> out;
  for (const auto& [g, rs] : group_rows) {
    if (rs.contains(row)) out.push_back(g);
  }
  return out;
}

std::vector<std::string> RubricSpec::group_members(const TaskSpec& task, int group) const {
  std::vector<std::string> out;
  for (const auto& s : supplementary) {
    if (s.group == group && task.applicable.contains(s.id)) out.push_back(s.id);
  }
  return out;
}

void RubricSpec::validate() const {
  if (components.empty() || levels.empty()) throw StructuralError("rubric needs at least one component and one level");
  if (rows() > 9 || cols() > 9) throw StructuralError("rubric dimensions above 9 are not supported");

  std::map<Cell, std::vector<Cell>> above;  // inferior -> superiors
  for (const auto& imp : implications) {
    if (!contains(imp.superior) || !contains(imp.inferior)) {
      throw StructuralError("implication " + cell_key(imp.superior) + " => " + cell_key(imp.inferior) +
                            " references a cell outside the rubric");
    }
    if (imp.superior == imp.inferior) throw StructuralError("implication on cell " + cell_key(imp.superior) + " is a loop");
    above[imp.inferior].push_back(imp.superior);
  }
  std::map<Cell, int> mark;
  std::function<void(Cell)> visit = [&](Cell c) {
    mark[c] = 1;
    for (Cell s : above[c]) {
      if (mark[s] == 1) throw StructuralError("implications form a cycle through cell " + cell_key(s));
      if (mark[s] == 0) visit(s);
    }
    mark[c] = 2;
  };
  for (Cell c : cells()) {
    if (mark[c] == 0) visit(c);
  }

  std::set<std::string> skill_ids;
  for (const auto& s : supplementary) {
    if (!skill_ids.insert(s.id).second) throw StructuralError("supplementary skill '" + s.id + "' declared twice");
    if (!group_rows.contains(s.group)) {
      throw StructuralError("supplementary skill '" + s.id + "' belongs to undeclared group " + std::to_string(s.group));
    }
  }
  for (const auto& [g, rs] : group_rows) {
    for (int r : rs) {
      if (r < 1 || r > rows()) throw StructuralError("group " + std::to_string(g) + " requires unknown row " + std::to_string(r));
    }
  }

  std::set<std::string> task_ids;
  for (const auto& t : tasks) {
    if (!task_ids.insert(t.id).second) throw StructuralError("task '" + t.id + "' declared twice");
    require_lambda(t.leak_inhibition, "task " + t.id + " leak");
    for (const auto& s : t.applicable) {
      if (!skill_ids.contains(s)) throw StructuralError("task " + t.id + " lists unknown skill '" + s + "'");
    }
    for (const auto& [answer, row] : t.target_inhibitions) {
      if (!contains(answer)) throw StructuralError("task " + t.id + " has inhibitions for unknown answer cell " + cell_key(answer));
      for (const auto& [target, lambda] : row) {
        const std::string where = "task " + t.id + ", answer " + cell_key(answer) + ", target " + cell_key(target);
        if (!contains(target) || !is_target_parent(target, answer)) {
          throw StructuralError(where + ": target is not a parent of this answer");
        }
        require_lambda(lambda, where);
      }
    }
    for (const auto& [skill, row] : t.supplementary_inhibitions) {
      if (!t.applicable.contains(skill)) {
        throw StructuralError("task " + t.id + " has inhibitions for non-applicable skill '" + skill + "'");
      }
      for (const auto& [answer, lambda] : row) {
        const std::string where = "task " + t.id + ", answer " + cell_key(answer) + ", skill " + skill;
        if (!contains(answer)) throw StructuralError(where + ": unknown answer cell");
        require_lambda(lambda, where);
      }
    }
  }
}

std::vector<Implication> consecutive_implications(int rows, int cols) {
  std::vector<Implication> out;
  for (int r = 1; r <= rows; ++r) {
    for (int c = 1; c < cols; ++c) out.push_back({Cell{r, c + 1}, Cell{r, c}});
  }
  for (int r = 1; r < rows; ++r) {
    for (int c = 1; c <= cols; ++c) out.push_back({Cell{r + 1, c}, Cell{r, c}});
  }
  return out;
}

void ModelConfig::validate(const RubricSpec& spec) const {
  auto prob = [](double p, const std::string& what) {
    if (!(p >= 0.0 && p <= 1.0)) throw ParameterError(what + " " + fmt(p) + " outside [0, 1]");
  };
  prob(default_prior, "default prior");
  prob(supplementary_prior, "supplementary prior");
  for (const auto& [c, p] : priors) {
    if (!spec.contains(c)) throw StructuralError("prior given for unknown cell " + cell_key(c));
    prob(p, "prior of X" + cell_key(c));
  }
  if (!(p_star > 0.0 && p_star <= 1.0)) throw ParameterError("p_star " + fmt(p_star) + " outside (0, 1]");
  if (uniform) {
    prob(uniform->lambda, "uniform inhibition");
    prob(uniform->leak_inhibition, "uniform leak inhibition");
  }
  if (supplementary_observation_lambda) prob(*supplementary_observation_lambda, "supplementary observation inhibition");
  if (supplementary_enabled && spec.supplementary.empty()) {
    throw StructuralError("supplementary layer requested but the rubric declares no supplementary skills");
  }
}

std::string to_string(NodeRole role) {
  switch (role) {
    case NodeRole::kSkill: return "skills";
    case NodeRole::kSupplementary: return "supplementary";
    case NodeRole::kLeak: return "leak";
    case NodeRole::kConstraint: return "constraints";
    case NodeRole::kTargetGroup: return "target_groups";
    case NodeRole::kSupplementaryGroup: return "supplementary_groups";
    case NodeRole::kAnd: return "and_gates";
    case NodeRole::kAnswer: return "answers";
    case NodeRole::kSupplementaryAnswer: return "supplementary_answers";
  }
  return "unknown";
}

VariableId CompiledNetwork::id(const std::string& name) const {
  auto it = index.find(name);
  if (it == index.end()) throw StructuralError("compiled network has no node '" + name + "'");
  return it->second;
}

std::size_t CompiledNetwork::count(NodeRole role) const {
  return static_cast<std::size_t>(std::count_if(roles.begin(), roles.end(), [role](const auto& kv) { return kv.second == role; }));
}

Evidence CompiledNetwork::baseline_evidence() const {
  Evidence e;
  e.set(leak, 1);
  for (const auto& [imp, d] : constraints) e.set(d, 1);
  return e;
}

CompiledNetwork compile(const RubricSpec& spec, const ModelConfig& cfg) {
  spec.validate();
  cfg.validate(spec);

  CompiledNetwork cn;
  cn.spec = spec;
  cn.config = cfg;
  Network& n = cn.network;

  auto add = [&](const std::string& name, NodeRole role) {
    const VariableId id = n.add_variable(name);
    cn.index.emplace(name, id);
    cn.roles.emplace(id, role);
    return id;
  };

  for (Cell c : spec.cells()) {
    const VariableId x = add("X" + cell_key(c), NodeRole::kSkill);
    auto it = cfg.priors.find(c);
    n.set_cpt(prior_cpt(x, it == cfg.priors.end() ? cfg.default_prior : it->second));
    cn.skills.emplace(c, x);
  }
  if (cfg.supplementary_enabled) {
    for (const auto& s : spec.supplementary) {
      const VariableId v = add(s.id, NodeRole::kSupplementary);
      n.set_cpt(prior_cpt(v, cfg.supplementary_prior));
      cn.supplementary.emplace(s.id, v);
    }
  }
  cn.leak = add("leak", NodeRole::kLeak);
  n.set_cpt(prior_cpt(cn.leak, 1.0));

  if (cfg.constraints_enabled) {
    for (const auto& imp : spec.implications) {
      const VariableId d = add("D_" + cell_key(imp.superior) + "_" + cell_key(imp.inferior), NodeRole::kConstraint);
      n.set_cpt(constraint_cpt({cn.skills.at(imp.superior), cn.skills.at(imp.inferior), cfg.p_star}, d));
      cn.constraints.emplace_back(imp, d);
    }
  }

  for (const auto& task : spec.tasks) {
    const double leak_lambda = cfg.uniform ? cfg.uniform->leak_inhibition : task.leak_inhibition;
    auto target_lambda = [&](Cell answer, Cell target) {
      if (cfg.uniform) return cfg.uniform->lambda;
      auto row = task.target_inhibitions.find(answer);
      if (row != task.target_inhibitions.end()) {
        auto it = row->second.find(target);
        if (it != row->second.end()) return it->second;
      }
      throw ParameterError("task " + task.id + ", answer " + cell_key(answer) + ": no inhibition for target " +
                           cell_key(target));
    };
    auto supp_lambda = [&](Cell answer, const std::string& skill) {
      if (cfg.uniform) return cfg.uniform->lambda;
      auto row = task.supplementary_inhibitions.find(skill);
      if (row != task.supplementary_inhibitions.end()) {
        auto it = row->second.find(answer);
        if (it != row->second.end()) return it->second;
      }
      throw ParameterError("task " + task.id + ", answer " + cell_key(answer) + ": no inhibition for skill " + skill);
    };

    auto& answer_nodes = cn.answers[task.id];
    for (Cell a : spec.cells()) {
      const std::string tag = task.id + "_" + cell_key(a);
      NoisyOrSpec targets;
      for (Cell p : spec.cells()) {
        if (!is_target_parent(p, a)) continue;
        targets.parents.push_back(cn.skills.at(p));
        targets.inhibitions[cn.skills.at(p)] = target_lambda(a, p);
      }

      if (!cfg.supplementary_enabled) {
        targets.parents.push_back(cn.leak);
        targets.inhibitions[cn.leak] = leak_lambda;
        const VariableId y = add("Y_" + tag, NodeRole::kAnswer);
        n.set_cpt(noisy_or_cpt(targets, y));
        answer_nodes.emplace(a, y);
        continue;
      }

      std::vector<VariableId> conjuncts;
      const VariableId gx = add("G_" + tag + "_X", NodeRole::kTargetGroup);
      n.set_cpt(noisy_or_cpt(targets, gx));
      conjuncts.push_back(gx);
      for (int g : spec.required_groups(a.row)) {
        NoisyOrSpec group;
        for (const auto& s : spec.group_members(task, g)) {
          group.parents.push_back(cn.supplementary.at(s));
          group.inhibitions[cn.supplementary.at(s)] = supp_lambda(a, s);
        }
        // A required group with no usable skill can never switch on.
        const VariableId gg = add("G_" + tag + "_g" + std::to_string(g), NodeRole::kSupplementaryGroup);
        n.set_cpt(noisy_or_cpt(group, gg));
        conjuncts.push_back(gg);
      }
      const VariableId both = add("AND_" + tag, NodeRole::kAnd);
      n.set_cpt(and_cpt(conjuncts, both));
      const VariableId y = add("Y_" + tag, NodeRole::kAnswer);
      n.set_cpt(noisy_or_cpt({{both, cn.leak}, {{both, 0.0}, {cn.leak, leak_lambda}}, std::nullopt}, y));
      answer_nodes.emplace(a, y);
    }

    if (!cfg.supplementary_enabled) continue;
    auto& direct = cn.supplementary_answers[task.id];
    for (const auto& s : spec.supplementary) {
      if (!task.applicable.contains(s.id)) continue;
      double lambda = 0.0;
      if (cfg.supplementary_observation_lambda) {
        lambda = *cfg.supplementary_observation_lambda;
      } else if (cfg.uniform) {
        lambda = cfg.uniform->lambda;
      } else {
        std::optional<double> first;
        auto row = task.supplementary_inhibitions.find(s.id);
        if (row != task.supplementary_inhibitions.end()) {
          for (Cell a : spec.cells()) {
            if (auto it = row->second.find(a); it != row->second.end()) {
              first = it->second;
              break;
            }
          }
        }
        if (!first) throw ParameterError("task " + task.id + ": skill " + s.id + " has no inhibition on any answer");
        lambda = *first;
      }
      NoisyOrSpec obs{{cn.supplementary.at(s.id)}, {{cn.supplementary.at(s.id), lambda}}, std::nullopt};
      if (cfg.supplementary_observation_leak) {
        obs.parents.push_back(cn.leak);
        obs.inhibitions[cn.leak] = leak_lambda;
      }
      const VariableId ys = add("YS_" + task.id + "_" + s.id, NodeRole::kSupplementaryAnswer);
      n.set_cpt(noisy_or_cpt(obs, ys));
      direct.emplace(s.id, ys);
    }
  }

  require_valid(n);
  return cn;
}

AnswerObservations encode_success_unconstrained(const RubricSpec& spec, Cell achieved) {
  if (!spec.contains(achieved)) throw DataError("achieved cell " + cell_key(achieved) + " is outside the rubric");
  AnswerObservations out;
  for (Cell c : spec.cells()) {
    if (c == achieved || dominates(achieved, c)) {
      out[c] = 1;
    } else if (dominates(c, achieved)) {
      out[c] = 0;
    }
  }
  return out;
}

AnswerObservations encode_success_constrained(const RubricSpec& spec, Cell achieved) {
  if (!spec.contains(achieved)) throw DataError("achieved cell " + cell_key(achieved) + " is outside the rubric");
  AnswerObservations out{{achieved, 1}};
  if (achieved.col < spec.cols()) out[Cell{achieved.row, achieved.col + 1}] = 0;
  if (achieved.row < spec.rows()) out[Cell{achieved.row + 1, achieved.col}] = 0;
  return out;
}

AnswerObservations encode_failure(const RubricSpec& spec, bool constrained) {
  if (constrained) return {{Cell{1, 1}, 0}};
  AnswerObservations out;
  for (Cell c : spec.cells()) out[c] = 0;
  return out;
}

SupplementaryObservations encode_supplementary(const TaskSpec& task, const std::set<std::string>& used) {
  for (const auto& s : used) {
    if (!task.applicable.contains(s)) throw DataError("task " + task.id + ": skill " + s + " is not applicable");
  }
  SupplementaryObservations out;
  for (const auto& s : task.applicable) out[s] = used.contains(s) ? 1 : 0;
  return out;
}

Evidence task_evidence(const CompiledNetwork& cn, const std::string& task, const AnswerObservations& answers,
                       const SupplementaryObservations& supplementary) {
  auto t = cn.answers.find(task);
  if (t == cn.answers.end()) throw DataError("unknown task '" + task + "'");
  Evidence e;
  for (const auto& [cell, state] : answers) {
    auto it = t->second.find(cell);
    if (it == t->second.end()) throw DataError("task " + task + " has no answer cell " + cell_key(cell));
    if (state > 1) throw DataError("answer states are 0 or 1");
    e.set(it->second, state);
  }
  if (!cn.config.supplementary_enabled) return e;
  const auto& direct = cn.supplementary_answers.at(task);
  for (const auto& [skill, state] : supplementary) {
    auto it = direct.find(skill);
    if (it == direct.end()) throw DataError("task " + task + ": skill " + skill + " is not applicable");
    if (state > 1) throw DataError("supplementary observations are 0 or 1");
    e.set(it->second, state);
  }
  return e;
}

namespace {

Cell cell_from_json(const nlohmann::json& j, const std::string& where) {
  if (j.is_string()) return parse_cell_key(j.get<std::string>());
  if (j.is_array() && j.size() == 2) return Cell{j[0].get<int>(), j[1].get<int>()};
  throw DataError(where + ": a cell is a two-digit string \"rc\" or a pair [r, c]");
}

double lambda_from_json(const nlohmann::json& j, const std::string& where) {
  if (!j.is_number()) throw DataError(where + ": inhibition must be a number");
  const double v = j.get<double>();
  if (!(v >= 0.0 && v <= 1.0)) throw DataError(where + ": inhibition " + fmt(v) + " outside [0, 1]");
  return v;
}

}  // namespace

RubricSpec rubric_from_json(const nlohmann::json& doc) {
  RubricSpec spec;
  try {
    spec.components = doc.at("components").get<std::vector<std::string>>();
    spec.levels = doc.at("levels").get<std::vector<std::string>>();

    const auto& imps = doc.value("implications", nlohmann::json::array());
    if (imps.is_string()) {
      if (imps.get<std::string>() != "consecutive") throw DataError("implications: unknown shorthand '" + imps.get<std::string>() + "'");
      spec.implications = consecutive_implications(spec.rows(), spec.cols());
    } else {
      for (std::size_t i = 0; i < imps.size(); ++i) {
        const std::string where = "implications[" + std::to_string(i) + "]";
        if (!imps[i].is_array() || imps[i].size() != 2) throw DataError(where + ": expected [superior, inferior]");
        spec.implications.push_back({cell_from_json(imps[i][0], where), cell_from_json(imps[i][1], where)});
      }
    }

    for (const auto& s : doc.value("supplementary", nlohmann::json::array())) {
      spec.supplementary.push_back({s.at("id").get<std::string>(), s.at("group").get<int>()});
    }
    const nlohmann::json group_rows = doc.value("group_rows", nlohmann::json::object());
    for (const auto& [g, rows] : group_rows.items()) {
      spec.group_rows[std::stoi(g)] = rows.get<std::set<int>>();
    }

    for (const auto& t : doc.at("tasks")) {
      TaskSpec task;
      task.id = t.at("id").get<std::string>();
      task.leak_inhibition = lambda_from_json(t.value("lambda_leak", nlohmann::json(0.9)), "task " + task.id + " lambda_leak");
      task.applicable = t.value("applicable", std::set<std::string>{});
      const std::vector<Cell> cells = spec.cells();

      // Scalar: one value everywhere. Object: per answer cell, each either
      // a scalar for all its targets or an object keyed by target cell.
      const auto& lt = t.value("lambda_targets", nlohmann::json());
      auto put_target_row = [&](Cell a, const nlohmann::json& v) {
        const std::string where = "task " + task.id + " lambda_targets[" + cell_key(a) + "]";
        if (v.is_object()) {
          for (const auto& [k, x] : v.items()) {
            task.target_inhibitions[a][parse_cell_key(k)] = lambda_from_json(x, where + "[" + k + "]");
          }
        } else {
          const double l = lambda_from_json(v, where);
          for (Cell p : cells) {
            if (is_target_parent(p, a)) task.target_inhibitions[a][p] = l;
          }
        }
      };
      if (lt.is_object()) {
        for (const auto& [k, v] : lt.items()) put_target_row(parse_cell_key(k), v);
      } else if (!lt.is_null()) {
        for (Cell a : cells) put_target_row(a, lt);
      }

      // Per skill: a scalar for every answer whose row requires the skill's
      // group, or an object keyed by answer cell.
      const auto& ls = t.value("lambda_supp", nlohmann::json());
      auto put_skill = [&](const std::string& skill, const nlohmann::json& v) {
        const std::string where = "task " + task.id + " lambda_supp[" + skill + "]";
        if (v.is_object()) {
          for (const auto& [k, x] : v.items()) {
            task.supplementary_inhibitions[skill][parse_cell_key(k)] = lambda_from_json(x, where + "[" + k + "]");
          }
          return;
        }
        const double l = lambda_from_json(v, where);
        const int group = spec.skill(skill).group;
        for (Cell a : cells) {
          auto it = spec.group_rows.find(group);
          if (it != spec.group_rows.end() && it->second.contains(a.row)) task.supplementary_inhibitions[skill][a] = l;
        }
      };
      if (ls.is_object()) {
        for (const auto& [k, v] : ls.items()) put_skill(k, v);
      } else if (!ls.is_null()) {
        for (const auto& s : task.applicable) put_skill(s, ls);
      }
      spec.tasks.push_back(std::move(task));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed rubric document: ") + e.what());
  } catch (const std::invalid_argument&) {
    throw DataError("malformed rubric document: group ids must be integers");
  }
  try {
    spec.validate();
  } catch (const Error& e) {
    throw DataError(std::string("invalid rubric: ") + e.what());
  }
  return spec;
}

nlohmann::json rubric_to_json(const RubricSpec& spec) {
  nlohmann::json doc;
  doc["components"] = spec.components;
  doc["levels"] = spec.levels;
  doc["implications"] = nlohmann::json::array();
  for (const auto& imp : spec.implications) {
    doc["implications"].push_back({cell_key(imp.superior), cell_key(imp.inferior)});
  }
  doc["supplementary"] = nlohmann::json::array();
  for (const auto& s : spec.supplementary) doc["supplementary"].push_back({{"id", s.id}, {"group", s.group}});
  doc["group_rows"] = nlohmann::json::object();
  for (const auto& [g, rows] : spec.group_rows) doc["group_rows"][std::to_string(g)] = rows;
  doc["tasks"] = nlohmann::json::array();
  for (const auto& t : spec.tasks) {
    nlohmann::json task;
    task["id"] = t.id;
    task["lambda_leak"] = t.leak_inhibition;
    std::vector<std::string> applicable;
    for (const auto& s : spec.supplementary) {
      if (t.applicable.contains(s.id)) applicable.push_back(s.id);
    }
    task["applicable"] = applicable;
    task["lambda_targets"] = nlohmann::json::object();
    for (const auto& [a, row] : t.target_inhibitions) {
      for (const auto& [p, l] : row) task["lambda_targets"][cell_key(a)][cell_key(p)] = l;
    }
    task["lambda_supp"] = nlohmann::json::object();
    for (const auto& [s, row] : t.supplementary_inhibitions) {
      for (const auto& [a, l] : row) task["lambda_supp"][s][cell_key(a)] = l;
    }
    doc["tasks"].push_back(std::move(task));
  }
  return doc;
}

}  // namespace rubricbn
