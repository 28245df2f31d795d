#pragma once

#include "rubricbn/rubric.hpp"

#include <json.hpp>

#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace rubricbn {

enum class Variant { kB, kBC, kBCS, kECS };

inline constexpr Variant kAllVariants[] = {Variant::kB, Variant::kBC, Variant::kBCS, Variant::kECS};

// "B", "BC", "BCS", "ECS".
std::string to_string(Variant v);
// Case-insensitive.
Variant parse_variant(const std::string& text);
bool uses_constraints(Variant v);
bool uses_supplementary(Variant v);

// Model constants shared by every variant.
inline constexpr double kCatLambda = 0.2;
inline constexpr double kCatLeakInhibition = 0.9;
inline constexpr double kCatPrior = 0.5;
// Rescales a raw BN score (0..9) onto the CAT score range (0..4).
inline constexpr double kCatRescale = 4.0 / 9.0;

// Result of one task. No cell means the task was failed.
struct CatOutcome {
  std::string task;
  std::optional<Cell> result;
  std::set<std::string> supplementary;
};

struct StudentRecord {
  std::string id;
  std::vector<CatOutcome> outcomes;

  // Exactly one outcome per task of `spec`, failures carry no skills, used
  // skills are applicable. Throws DataError.
  void validate(const RubricSpec& spec) const;
};

struct CompetenceProfile {
  std::string student;
  Variant variant = Variant::kB;
  std::map<Cell, double> targets;
  std::map<std::string, double> supplementary;
  double bn_raw = 0.0;
  double bn_rescaled = 0.0;
  double cat_score = 0.0;
};

// The CAT rubric with the baseline constants: every inhibition 0.2, leak 0.9.
RubricSpec builtin_cat_spec();

// Elicited T3 table: one lambda per answer cell, shared by every relevant
// target and supplementary skill.
TaskSpec ecs_t3_lambdas();

// Rubric with the variant's inhibition tables. ECS replaces T3 with
// ecs_t3_lambdas(); `task_overrides` (a {"tasks": [...]} document using the
// rubric task format) then replaces the lambda tables of the tasks it lists.
RubricSpec cat_parameters(Variant v, const nlohmann::json* task_overrides = nullptr);

// Encoding and structure switches whose values the source leaves open.
struct AssessOptions {
  // Default: unconstrained for B, constrained otherwise.
  std::optional<bool> constrained_encoding;
  // Failed tasks observe zeros on every applicable supplementary skill.
  bool fail_supplementary_observed = true;
  bool supplementary_observation_leak = false;
  std::optional<double> supplementary_observation_lambda;
};

ModelConfig cat_model_config(Variant v, const AssessOptions& options = {});

// Compiles one variant once and assesses any number of students with it.
class CatAssessor {
 public:
  CatAssessor(Variant v, RubricSpec spec, AssessOptions options = {});
  explicit CatAssessor(Variant v, AssessOptions options = {});

  Variant variant() const { return variant_; }
  const CompiledNetwork& compiled() const { return compiled_; }
  bool constrained_encoding() const;

  // All evidence for the record: baseline plus every task.
  Evidence evidence(const StudentRecord& record) const;
  // Throws InconsistentEvidenceError naming the first task whose evidence
  // makes the accumulated observations impossible.
  CompetenceProfile assess(const StudentRecord& record) const;

 private:
  Evidence task_part(const CatOutcome& outcome) const;

  Variant variant_;
  AssessOptions options_;
  CompiledNetwork compiled_;
};

// Mean over tasks of (r - 1) + (c - 1), with -1 for a failed task.
double cat_score(const StudentRecord& record);
// raw = sum of target posteriors, rescaled = raw * 4/9.
std::pair<double, double> bn_cat_score(const CompetenceProfile& profile);
// Product-moment correlation. Throws DataError on mismatched or short
// inputs and when either side has zero variance.
double pearson(const std::vector<double>& a, const std::vector<double>& b);

// Answers CSV: student_id,task_id,result,supplementary. Students keep their
// first-appearance order; outcomes are sorted into the rubric's task order.
std::vector<StudentRecord> read_answers_csv(std::istream& in, const RubricSpec& spec);
void write_answers_csv(std::ostream& out, const std::vector<StudentRecord>& records, const RubricSpec& spec);
// student_id,variant,node,probability
void write_posteriors_csv(std::ostream& out, const std::vector<CompetenceProfile>& profiles);
// student_id,cat_score,bn_raw,bn_rescaled,variant
void write_scores_csv(std::ostream& out, const std::vector<CompetenceProfile>& profiles);
// Per-variant Pearson correlation between cat_score and bn_rescaled; null
// where it is undefined (fewer than two students or zero variance).
nlohmann::json correlation_report(const std::vector<CompetenceProfile>& profiles);

// Reference values for the four published pupils.
struct PublishedResults {
  std::map<std::string, double> cat_scores;
  std::map<std::string, std::map<Variant, double>> bn_scores;
  std::map<std::string, std::map<Variant, std::vector<double>>> targets;        // X11..X33
  std::map<std::string, std::map<Variant, std::vector<double>>> supplementary;  // S1..S10
  double tolerance = 0.05;
};

PublishedResults published_results_from_json(const nlohmann::json& doc);

struct DeviationRow {
  std::string student;
  Variant variant = Variant::kB;
  std::string node;
  double computed = 0.0;
  double published = 0.0;
  double deviation = 0.0;
  bool within = false;
  // Alternative switch settings under which this cell falls within tolerance.
  std::vector<std::string> traced_to;
};

// Named alternatives to the default encoding decisions, one switch each.
std::vector<std::pair<std::string, AssessOptions>> encoding_alternatives(Variant v);

// Compares computed profiles with the published posteriors (targets, and
// supplementary skills where modelled). Rows outside tolerance are rerun
// under each encoding alternative to fill `traced_to`.
std::vector<DeviationRow> deviation_table(const std::vector<StudentRecord>& records, Variant v,
                                          const PublishedResults& published,
                                          const std::vector<CompetenceProfile>& profiles);

void write_deviation_csv(std::ostream& out, const std::vector<DeviationRow>& rows);

}  // namespace rubricbn
