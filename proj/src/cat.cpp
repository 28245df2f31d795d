#include "rubricbn/cat.hpp"

#include "rubricbn/engine.hpp"
#include "rubricbn/errors.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

namespace rubricbn {

namespace {

std::string fixed(double v, int digits = 6) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(digits) << v;
  return out.str();
}

std::string trim(std::string s) {
  auto not_space = [](unsigned char ch) { return !std::isspace(ch); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(s);
  while (std::getline(in, field, sep)) out.push_back(trim(field));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

// Applicability of supplementary skills per task. T3 is exact. Every other
// task lists S1, every skill a bundled pupil used on it, and a default member
// (S3 for group 2, S10 for group 3) when no used skill covers a group.
const std::vector<std::pair<std::string, std::set<std::string>>>& cat_applicability() {
  static const std::vector<std::pair<std::string, std::set<std::string>>> table = {
      {"T1", {"S1", "S2", "S10"}},
      {"T2", {"S1", "S2", "S6", "S10"}},
      {"T3", {"S1", "S2", "S3", "S5", "S8", "S9", "S10"}},
      {"T4", {"S1", "S3", "S10"}},
      {"T5", {"S1", "S3", "S4", "S10"}},
      {"T6", {"S1", "S3", "S6", "S10"}},
      {"T7", {"S1", "S5", "S8", "S10"}},
      {"T8", {"S1", "S5", "S10"}},
      {"T9", {"S1", "S3", "S10"}},
      {"T10", {"S1", "S4", "S5", "S10"}},
      {"T11", {"S1", "S3", "S10"}},
      {"T12", {"S1", "S5", "S10"}},
  };
  return table;
}

// Fills every required (answer, target) and (answer, applicable skill)
// inhibition of `task` with `lambda`.
void fill_uniform(const RubricSpec& spec, TaskSpec& task, double lambda) {
  task.target_inhibitions.clear();
  task.supplementary_inhibitions.clear();
  for (Cell a : spec.cells()) {
    for (Cell p : spec.cells()) {
      if (is_target_parent(p, a)) task.target_inhibitions[a][p] = lambda;
    }
    for (int g : spec.required_groups(a.row)) {
      for (const auto& s : spec.group_members(task, g)) task.supplementary_inhibitions[s][a] = lambda;
    }
  }
}

}  // namespace

std::string to_string(Variant v) {
  switch (v) {
    case Variant::kB: return "B";
    case Variant::kBC: return "BC";
    case Variant::kBCS: return "BCS";
    case Variant::kECS: return "ECS";
  }
  return "?";
}

Variant parse_variant(const std::string& text) {
  std::string up;
  for (char ch : text) up.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(ch))));
  for (Variant v : kAllVariants) {
    if (to_string(v) == up) return v;
  }
  throw DataError("unknown variant '" + text + "' (expected b, bc, bcs or ecs)");
}

bool uses_constraints(Variant v) { return v != Variant::kB; }
bool uses_supplementary(Variant v) { return v == Variant::kBCS || v == Variant::kECS; }

void StudentRecord::validate(const RubricSpec& spec) const {
  std::set<std::string> seen;
  for (const auto& o : outcomes) {
    const TaskSpec& task = spec.task(o.task);
    if (!seen.insert(o.task).second) throw DataError("student " + id + ": task " + o.task + " appears twice");
    if (!o.result && !o.supplementary.empty()) {
      throw DataError("student " + id + ", task " + o.task + ": a failed task carries no supplementary skills");
    }
    if (o.result && !spec.contains(*o.result)) throw DataError("student " + id + ", task " + o.task + ": bad result cell");
    for (const auto& s : o.supplementary) {
      if (!task.applicable.contains(s)) {
        throw DataError("student " + id + ", task " + o.task + ": skill " + s + " is not applicable");
      }
    }
  }
  if (seen.size() != spec.tasks.size()) {
    throw DataError("student " + id + " has " + std::to_string(seen.size()) + " outcomes, expected " +
                    std::to_string(spec.tasks.size()));
  }
}

RubricSpec builtin_cat_spec() {
  RubricSpec spec;
  spec.components = {"0D", "1D", "2D"};
  spec.levels = {"VSF", "VS", "V"};
  spec.implications = consecutive_implications(3, 3);
  for (int i = 1; i <= 10; ++i) {
    spec.supplementary.push_back({"S" + std::to_string(i), i == 1 ? 1 : (i <= 7 ? 2 : 3)});
  }
  spec.group_rows = {{1, {1, 2, 3}}, {2, {2, 3}}, {3, {3}}};
  for (const auto& [id, applicable] : cat_applicability()) {
    TaskSpec task;
    task.id = id;
    task.applicable = applicable;
    task.leak_inhibition = kCatLeakInhibition;
    fill_uniform(spec, task, kCatLambda);
    spec.tasks.push_back(std::move(task));
  }
  return spec;
}

TaskSpec ecs_t3_lambdas() {
  // Grey level of each answer row in the published T3 zoom (rows Y11..Y33);
  // level k maps to 0.10 + 0.05 * (10 - k) on the eleven-step scale.
  static const int shade[3][3] = {{8, 7, 6}, {7, 6, 5}, {6, 5, 4}};
  const RubricSpec spec = builtin_cat_spec();
  TaskSpec task = spec.task("T3");
  task.target_inhibitions.clear();
  task.supplementary_inhibitions.clear();
  for (Cell a : spec.cells()) {
    const int level = shade[a.row - 1][a.col - 1];
    // Rounded to the scale so 0.25 is exactly the decimal 0.25.
    const double lambda = std::round((0.10 + 0.05 * (10 - level)) * 100.0) / 100.0;
    for (Cell p : spec.cells()) {
      if (is_target_parent(p, a)) task.target_inhibitions[a][p] = lambda;
    }
    for (int g : spec.required_groups(a.row)) {
      for (const auto& s : spec.group_members(task, g)) task.supplementary_inhibitions[s][a] = lambda;
    }
  }
  return task;
}

RubricSpec cat_parameters(Variant v, const nlohmann::json* task_overrides) {
  RubricSpec spec = builtin_cat_spec();
  if (v != Variant::kECS) {
    if (task_overrides) throw DataError("lambda overrides apply to the ECS variant only");
    return spec;
  }
  for (auto& t : spec.tasks) {
    if (t.id == "T3") t = ecs_t3_lambdas();
  }
  if (!task_overrides) return spec;

  nlohmann::json doc = rubric_to_json(spec);
  try {
    for (const auto& o : task_overrides->at("tasks")) {
      const std::string id = o.at("id").get<std::string>();
      auto it = std::find_if(doc["tasks"].begin(), doc["tasks"].end(), [&](const auto& t) { return t["id"] == id; });
      if (it == doc["tasks"].end()) throw DataError("lambda override for unknown task '" + id + "'");
      for (const char* key : {"lambda_targets", "lambda_supp", "lambda_leak", "applicable"}) {
        if (o.contains(key)) (*it)[key] = o[key];
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed lambda override document: ") + e.what());
  }
  return rubric_from_json(doc);
}

ModelConfig cat_model_config(Variant v, const AssessOptions& options) {
  ModelConfig cfg;
  cfg.constraints_enabled = uses_constraints(v);
  cfg.supplementary_enabled = uses_supplementary(v);
  cfg.default_prior = kCatPrior;
  cfg.supplementary_prior = kCatPrior;
  cfg.supplementary_observation_leak = options.supplementary_observation_leak;
  cfg.supplementary_observation_lambda = options.supplementary_observation_lambda;
  return cfg;
}

CatAssessor::CatAssessor(Variant v, RubricSpec spec, AssessOptions options)
    : variant_(v), options_(std::move(options)), compiled_(compile(spec, cat_model_config(v, options_))) {}

CatAssessor::CatAssessor(Variant v, AssessOptions options) : CatAssessor(v, cat_parameters(v), std::move(options)) {}

bool CatAssessor::constrained_encoding() const {
  return options_.constrained_encoding.value_or(variant_ != Variant::kB);
}

Evidence CatAssessor::task_part(const CatOutcome& o) const {
  const RubricSpec& spec = compiled_.spec;
  const bool constrained = constrained_encoding();
  AnswerObservations answers;
  if (o.result) {
    answers = constrained ? encode_success_constrained(spec, *o.result) : encode_success_unconstrained(spec, *o.result);
  } else {
    answers = encode_failure(spec, constrained);
  }
  SupplementaryObservations supp;
  if (compiled_.config.supplementary_enabled && (o.result || options_.fail_supplementary_observed)) {
    supp = encode_supplementary(spec.task(o.task), o.supplementary);
  }
  return task_evidence(compiled_, o.task, answers, supp);
}

Evidence CatAssessor::evidence(const StudentRecord& record) const {
  record.validate(compiled_.spec);
  Evidence e = compiled_.baseline_evidence();
  for (const auto& o : record.outcomes) e = e.merged(task_part(o));
  return e;
}

CompetenceProfile CatAssessor::assess(const StudentRecord& record) const {
  const Evidence e = evidence(record);
  const Network& n = compiled_.network;
  CompetenceProfile p;
  p.student = record.id;
  p.variant = variant_;
  try {
    for (const auto& [cell, x] : compiled_.skills) p.targets[cell] = posterior(n, Query{x, e})[1];
    for (const auto& [skill, s] : compiled_.supplementary) p.supplementary[skill] = posterior(n, Query{s, e})[1];
  } catch (const InconsistentEvidenceError&) {
    Evidence partial = compiled_.baseline_evidence();
    for (const auto& o : record.outcomes) {
      partial = partial.merged(task_part(o));
      try {
        posterior(n, Query{compiled_.skills.begin()->second, partial});
      } catch (const InconsistentEvidenceError&) {
        throw InconsistentEvidenceError("student " + record.id + ": observations become impossible at task " + o.task +
                                        " under variant " + to_string(variant_));
      }
    }
    throw;
  }
  std::tie(p.bn_raw, p.bn_rescaled) = bn_cat_score(p);
  p.cat_score = cat_score(record);
  return p;
}

double cat_score(const StudentRecord& record) {
  if (record.outcomes.empty()) throw DataError("student " + record.id + " has no outcomes");
  double total = 0.0;
  for (const auto& o : record.outcomes) total += o.result ? (o.result->row - 1) + (o.result->col - 1) : -1;
  return total / static_cast<double>(record.outcomes.size());
}

std::pair<double, double> bn_cat_score(const CompetenceProfile& profile) {
  double raw = 0.0;
  for (const auto& [cell, p] : profile.targets) raw += p;
  return {raw, raw * kCatRescale};
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw DataError("correlation needs equally long score lists");
  if (a.size() < 2) throw DataError("correlation needs at least two pairs");
  const Eigen::Map<const Eigen::ArrayXd> x(a.data(), static_cast<Eigen::Index>(a.size()));
  const Eigen::Map<const Eigen::ArrayXd> y(b.data(), static_cast<Eigen::Index>(b.size()));
  const Eigen::ArrayXd dx = x - x.mean();
  const Eigen::ArrayXd dy = y - y.mean();
  const double sxx = dx.square().sum();
  const double syy = dy.square().sum();
  if (sxx == 0.0 || syy == 0.0) throw DataError("correlation undefined: a score list has zero variance");
  return std::clamp((dx * dy).sum() / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<StudentRecord> read_answers_csv(std::istream& in, const RubricSpec& spec) {
  std::string line;
  std::size_t line_no = 0;
  auto next = [&]() {
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!trim(line).empty()) return true;
    }
    return false;
  };
  if (!next()) throw DataError("answers CSV is empty");
  const auto header = split(line, ',');
  if (header.size() < 3 || header[0] != "student_id" || header[1] != "task_id" || header[2] != "result" ||
      (header.size() == 4 && header[3] != "supplementary") || header.size() > 4) {
    throw DataError("answers CSV line 1: expected header student_id,task_id,result,supplementary");
  }

  std::vector<StudentRecord> records;
  std::map<std::string, std::size_t> where;
  while (next()) {
    const std::string ctx = "answers CSV line " + std::to_string(line_no);
    auto fields = split(line, ',');
    if (fields.size() == 3) fields.emplace_back();
    if (fields.size() != 4) throw DataError(ctx + ": expected 4 fields, got " + std::to_string(fields.size()));
    CatOutcome o;
    o.task = fields[1];
    try {
      spec.task(o.task);
    } catch (const DataError&) {
      throw DataError(ctx + ": unknown task '" + o.task + "'");
    }
    if (fields[2] != "fail") {
      o.result = spec.find_label(fields[2]);
      if (!o.result) throw DataError(ctx + ": unknown result '" + fields[2] + "'");
    }
    for (const auto& s : split(fields[3], ';')) {
      if (!s.empty()) o.supplementary.insert(s);
    }
    auto [it, fresh] = where.emplace(fields[0], records.size());
    if (fresh) records.push_back(StudentRecord{fields[0], {}});
    records[it->second].outcomes.push_back(std::move(o));
  }

  std::map<std::string, std::size_t> task_rank;
  for (std::size_t i = 0; i < spec.tasks.size(); ++i) task_rank[spec.tasks[i].id] = i;
  for (auto& r : records) {
    std::stable_sort(r.outcomes.begin(), r.outcomes.end(),
                     [&](const CatOutcome& a, const CatOutcome& b) { return task_rank[a.task] < task_rank[b.task]; });
    r.validate(spec);
  }
  return records;
}

void write_answers_csv(std::ostream& out, const std::vector<StudentRecord>& records, const RubricSpec& spec) {
  out << "student_id,task_id,result,supplementary\n";
  for (const auto& r : records) {
    for (const auto& o : r.outcomes) {
      out << r.id << ',' << o.task << ',' << (o.result ? spec.cell_label(*o.result) : "fail") << ',';
      bool first = true;
      for (const auto& s : spec.supplementary) {
        if (!o.supplementary.contains(s.id)) continue;
        out << (first ? "" : ";") << s.id;
        first = false;
      }
      out << '\n';
    }
  }
}

void write_posteriors_csv(std::ostream& out, const std::vector<CompetenceProfile>& profiles) {
  out << "student_id,variant,node,probability\n";
  for (const auto& p : profiles) {
    for (const auto& [cell, v] : p.targets) {
      out << p.student << ',' << to_string(p.variant) << ",X" << cell_key(cell) << ',' << fixed(v) << '\n';
    }
    // S1..S10 in numeric order.
    std::vector<std::pair<std::string, double>> supp(p.supplementary.begin(), p.supplementary.end());
    std::stable_sort(supp.begin(), supp.end(), [](const auto& a, const auto& b) {
      return a.first.size() != b.first.size() ? a.first.size() < b.first.size() : a.first < b.first;
    });
    for (const auto& [skill, v] : supp) {
      out << p.student << ',' << to_string(p.variant) << ',' << skill << ',' << fixed(v) << '\n';
    }
  }
}

void write_scores_csv(std::ostream& out, const std::vector<CompetenceProfile>& profiles) {
  out << "student_id,cat_score,bn_raw,bn_rescaled,variant\n";
  for (const auto& p : profiles) {
    out << p.student << ',' << fixed(p.cat_score) << ',' << fixed(p.bn_raw) << ',' << fixed(p.bn_rescaled) << ','
        << to_string(p.variant) << '\n';
  }
}

nlohmann::json correlation_report(const std::vector<CompetenceProfile>& profiles) {
  nlohmann::json report = nlohmann::json::object();
  for (Variant v : kAllVariants) {
    std::vector<double> cat, bn;
    for (const auto& p : profiles) {
      if (p.variant != v) continue;
      cat.push_back(p.cat_score);
      bn.push_back(p.bn_rescaled);
    }
    if (cat.empty()) continue;
    nlohmann::json entry{{"students", cat.size()}};
    try {
      entry["pearson"] = pearson(cat, bn);
    } catch (const DataError& e) {
      entry["pearson"] = nullptr;
      entry["note"] = e.what();
    }
    report[to_string(v)] = entry;
  }
  return report;
}

PublishedResults published_results_from_json(const nlohmann::json& doc) {
  PublishedResults out;
  try {
    out.tolerance = doc.value("tolerance", 0.05);
    for (const auto& [student, v] : doc.at("cat_scores").items()) out.cat_scores[student] = v.get<double>();
    for (const auto& [student, per] : doc.at("bn_scores").items()) {
      for (const auto& [variant, v] : per.items()) out.bn_scores[student][parse_variant(variant)] = v.get<double>();
    }
    auto vectors = [](const nlohmann::json& j, std::size_t len, const char* what,
                      std::map<std::string, std::map<Variant, std::vector<double>>>& dst) {
      for (const auto& [student, per] : j.items()) {
        for (const auto& [variant, v] : per.items()) {
          auto values = v.get<std::vector<double>>();
          if (values.size() != len) {
            throw DataError(std::string("published ") + what + " for student " + student + ", variant " + variant +
                            ": expected " + std::to_string(len) + " values");
          }
          dst[student][parse_variant(variant)] = std::move(values);
        }
      }
    };
    vectors(doc.at("targets"), 9, "targets", out.targets);
    vectors(doc.at("supplementary"), 10, "supplementary", out.supplementary);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed published results document: ") + e.what());
  }
  return out;
}

std::vector<std::pair<std::string, AssessOptions>> encoding_alternatives(Variant v) {
  std::vector<std::pair<std::string, AssessOptions>> out;
  AssessOptions flip;
  flip.constrained_encoding = v == Variant::kB;
  out.emplace_back(v == Variant::kB ? "encoding=constrained" : "encoding=unconstrained", flip);
  if (uses_supplementary(v)) {
    AssessOptions a;
    a.fail_supplementary_observed = false;
    out.emplace_back("fail-supplementary=unobserved", a);
    AssessOptions b;
    b.supplementary_observation_leak = true;
    out.emplace_back("supplementary-observation-leak=on", b);
    AssessOptions c;
    c.supplementary_observation_lambda = 0.6;
    out.emplace_back("supplementary-observation-lambda=0.6", c);
  }
  return out;
}

std::vector<DeviationRow> deviation_table(const std::vector<StudentRecord>& records, Variant v,
                                          const PublishedResults& published,
                                          const std::vector<CompetenceProfile>& profiles) {
  std::vector<DeviationRow> rows;
  const RubricSpec spec = builtin_cat_spec();
  auto node_values = [&](const CompetenceProfile& p) {
    std::vector<std::pair<std::string, double>> out;
    for (Cell c : spec.cells()) out.emplace_back("X" + cell_key(c), p.targets.at(c));
    for (const auto& s : spec.supplementary) {
      if (auto it = p.supplementary.find(s.id); it != p.supplementary.end()) out.emplace_back(s.id, it->second);
    }
    return out;
  };
  auto published_values = [&](const std::string& student) {
    std::map<std::string, double> out;
    if (auto t = published.targets.find(student); t != published.targets.end()) {
      if (auto it = t->second.find(v); it != t->second.end()) {
        const auto cells = spec.cells();
        for (std::size_t i = 0; i < cells.size(); ++i) out["X" + cell_key(cells[i])] = it->second[i];
      }
    }
    if (auto s = published.supplementary.find(student); s != published.supplementary.end()) {
      if (auto it = s->second.find(v); it != s->second.end()) {
        for (std::size_t i = 0; i < spec.supplementary.size(); ++i) out[spec.supplementary[i].id] = it->second[i];
      }
    }
    return out;
  };

  for (const auto& p : profiles) {
    if (p.variant != v) continue;
    const auto ref = published_values(p.student);
    for (const auto& [node, value] : node_values(p)) {
      auto it = ref.find(node);
      if (it == ref.end()) continue;
      DeviationRow row{p.student, v, node, value, it->second, std::abs(value - it->second), false, {}};
      row.within = row.deviation <= published.tolerance + 1e-12;
      rows.push_back(std::move(row));
    }
  }

  const bool any_out = std::any_of(rows.begin(), rows.end(), [](const DeviationRow& r) { return !r.within; });
  if (!any_out) return rows;
  for (const auto& [name, options] : encoding_alternatives(v)) {
    const CatAssessor alt(v, options);
    std::map<std::string, CompetenceProfile> redo;
    for (const auto& r : records) {
      const bool needed = std::any_of(rows.begin(), rows.end(),
                                      [&](const DeviationRow& d) { return !d.within && d.student == r.id; });
      if (!needed) continue;
      try {
        redo.emplace(r.id, alt.assess(r));
      } catch (const InconsistentEvidenceError&) {
        // The alternative cannot explain anything for this student.
      }
    }
    for (auto& row : rows) {
      if (row.within) continue;
      auto it = redo.find(row.student);
      if (it == redo.end()) continue;
      for (const auto& [node, value] : node_values(it->second)) {
        if (node == row.node && std::abs(value - row.published) <= published.tolerance + 1e-12) {
          row.traced_to.push_back(name);
        }
      }
    }
  }
  return rows;
}

void write_deviation_csv(std::ostream& out, const std::vector<DeviationRow>& rows) {
  out << "student_id,variant,node,computed,published,abs_deviation,within_tolerance,traced_to\n";
  for (const auto& r : rows) {
    out << r.student << ',' << to_string(r.variant) << ',' << r.node << ',' << fixed(r.computed, 4) << ','
        << fixed(r.published, 2) << ',' << fixed(r.deviation, 4) << ',' << (r.within ? "yes" : "no") << ',';
    for (std::size_t i = 0; i < r.traced_to.size(); ++i) out << (i ? ";" : "") << r.traced_to[i];
    out << '\n';
  }
}

}  // namespace rubricbn
