#include "rubricbn/cli.hpp"

#include "rubricbn/engine.hpp"
#include "rubricbn/errors.hpp"
#include "rubricbn/gates.hpp"
#include "rubricbn/random_network.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <random>
#include <sstream>

#ifndef RUBRICBN_DATA_DIR
#define RUBRICBN_DATA_DIR "data"
#endif

namespace rubricbn::cli {

namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

nlohmann::json read_json(const fs::path& path) {
  try {
    return nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::string fixed(double v, int digits) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(digits) << v;
  return out.str();
}

std::vector<Variant> variants_of(const CliConfig& cfg) {
  if (!cfg.variants.empty()) return cfg.variants;
  return {std::begin(kAllVariants), std::end(kAllVariants)};
}

std::string lower(Variant v) {
  std::string s = to_string(v);
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

AssessOptions options_of(const CliConfig& cfg) {
  AssessOptions o;
  o.fail_supplementary_observed = !cfg.fail_supplementary_unobserved;
  if (cfg.encoding) o.constrained_encoding = *cfg.encoding == "constrained";
  return o;
}

RubricSpec parameters_for(const CliConfig& cfg, Variant v) {
  if (cfg.ecs_lambda_path && v == Variant::kECS) {
    const nlohmann::json overrides = read_json(*cfg.ecs_lambda_path);
    return cat_parameters(v, &overrides);
  }
  return cat_parameters(v);
}

std::vector<StudentRecord> load_answers(const fs::path& path, const RubricSpec& spec) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return read_answers_csv(in, spec);
}

// Assesses every record; per-student failures are reported and counted.
std::vector<CompetenceProfile> assess_all(const CatAssessor& assessor, const std::vector<StudentRecord>& records,
                                          std::ostream& err, int& failures) {
  std::vector<CompetenceProfile> out;
  for (const auto& r : records) {
    try {
      out.push_back(assessor.assess(r));
    } catch (const Error& e) {
      err << "error: " << e.what() << '\n';
      ++failures;
    }
  }
  return out;
}

void print_summary(const CompiledNetwork& cn, std::ostream& out) {
  out << "variables: " << cn.network.size() << '\n';
  out << "edges: " << cn.network.edge_count() << '\n';
  for (NodeRole role : {NodeRole::kSkill, NodeRole::kSupplementary, NodeRole::kLeak, NodeRole::kConstraint,
                        NodeRole::kTargetGroup, NodeRole::kSupplementaryGroup, NodeRole::kAnd, NodeRole::kAnswer,
                        NodeRole::kSupplementaryAnswer}) {
    out << "  " << to_string(role) << ": " << cn.count(role) << '\n';
  }
}

struct CheckResult {
  std::string name;
  bool pass;
  std::string detail;
};

CheckResult check_oracle(std::uint64_t seed, std::size_t count) {
  std::mt19937_64 rng(seed);
  std::size_t matches = 0;
  double worst = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t size = std::uniform_int_distribution<std::size_t>(2, 16)(rng);
    const Network n = random_network(rng, {.variables = size, .max_parents = 4});
    const VariableId target{static_cast<std::uint32_t>(std::uniform_int_distribution<std::size_t>(0, size - 1)(rng))};
    const Query q{target, random_evidence(n, rng, size / 2, target)};
    const double d = (posterior(n, q) - enumerate_joint(n, q)).cwiseAbs().maxCoeff();
    worst = std::max(worst, d);
    if (d <= 1e-9) ++matches;
  }
  std::ostringstream detail;
  detail << matches << "/" << count << " random networks match enumeration (max deviation " << std::scientific
         << std::setprecision(2) << worst << ")";
  return {"ve-vs-enumeration", matches == count, detail.str()};
}

CheckResult check_priors() {
  const CatAssessor bc(Variant::kBC);
  const auto& cn = bc.compiled();
  const double expected[9] = {0.95, 0.8, 0.5, 0.8, 0.5, 0.2, 0.5, 0.2, 0.05};
  double worst = 0.0;
  std::size_t i = 0;
  for (const auto& [cell, x] : cn.skills) {
    worst = std::max(worst, std::abs(posterior(cn.network, Query{x, cn.baseline_evidence()})[1] - expected[i++]));
  }
  std::ostringstream detail;
  detail << "constrained priors within " << std::scientific << std::setprecision(2) << worst
         << " of (0.95, 0.8, 0.5, 0.8, 0.5, 0.2, 0.5, 0.2, 0.05)";
  return {"prior-propagation", worst <= 1e-6, detail.str()};
}

CheckResult check_gates(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  bool exact = true;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t k = std::uniform_int_distribution<std::size_t>(1, 6)(rng);
    Network a, b;
    std::vector<VariableId> pa, pb;
    NoisyOrSpec sa, sb;
    for (std::size_t i = 0; i < k; ++i) {
      const double prior = u(rng), lambda = u(rng);
      pa.push_back(a.add_variable("X" + std::to_string(i)));
      pb.push_back(b.add_variable("X" + std::to_string(i)));
      a.set_cpt(prior_cpt(pa.back(), prior));
      b.set_cpt(prior_cpt(pb.back(), prior));
      sa.inhibitions[pa.back()] = lambda;
      sb.inhibitions[pb.back()] = lambda;
    }
    sa.parents = pa;
    sb.parents = pb;
    sa.leak_inhibition = sb.leak_inhibition = u(rng);
    const VariableId ya = a.add_variable("Y");
    const VariableId yb = b.add_variable("Y");
    a.set_cpt(noisy_or_cpt(sa, ya));
    add_noisy_or_decomposition(b, sb, yb);
    worst = std::max(worst, std::abs(posterior(a, Query{ya, {}})[1] - enumerate_joint(b, Query{yb, {}})[1]));

    NoisyOrSpec zero{pa, {}, std::nullopt};
    for (VariableId p : pa) zero.inhibitions[p] = 0.0;
    exact = exact && (noisy_or_cpt(zero, ya).table().values() == or_cpt(pa, ya).table().values()).all();
    NoisyOrSpec leak_only{pa, sa.inhibitions, sa.leak_inhibition};
    const std::vector<std::size_t> off(k, 0);
    exact = exact && noisy_or_cpt(leak_only, ya).probability(off, 1) == 1.0 - *sa.leak_inhibition;
  }
  std::ostringstream detail;
  detail << "50 gates: decomposition deviation " << std::scientific << std::setprecision(2) << worst
         << (exact ? ", zero-inhibition OR and leak-only guess exact" : ", exact identities violated");
  return {"gate-identities", worst <= 1e-9 && exact, detail.str()};
}

CheckResult check_networks(const std::optional<std::string>& fault) {
  std::ostringstream detail;
  bool pass = true;
  for (Variant v : kAllVariants) {
    CompiledNetwork cn = compile(cat_parameters(v), cat_model_config(v));
    if (fault && *fault == "broken-cpt" && v == Variant::kB) {
      // Scale one conditional distribution so that it sums to 0.9.
      const VariableId y = cn.id("Y_T1_11");
      const Cpt& c = *cn.network.cpt(y);
      Eigen::ArrayXd values = c.table().values();
      values.head(2) *= 0.9;
      cn.network.set_cpt(Cpt(y, c.parents(), Factor(c.table().scope(), c.table().cardinalities(), values)));
    }
    const auto report = validate_network(cn.network);
    if (!report.ok()) {
      detail << (pass ? "" : "; ") << to_string(v) << ": " << report.summary();
      pass = false;
    }
  }
  if (pass) detail << "compiled B, BC, BCS and ECS networks are well formed";
  return {"network-wellformed", pass, detail.str()};
}

CheckResult check_file(const fs::path& path) {
  const Network n = network_from_json(read_json(path));
  const auto report = validate_network(n);
  return {"network-file", report.ok(), report.ok() ? path.string() + " is well formed" : report.summary()};
}

}  // namespace

fs::path default_data_dir() { return fs::path(RUBRICBN_DATA_DIR); }

void write_file_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + tmp.string() + "'");
    out << content;
    out.flush();
    if (!out) throw DataError("failed writing '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

int cmd_compile(const CliConfig& cfg, std::ostream& out, std::ostream&) {
  std::vector<std::pair<fs::path, std::string>> files;
  for (Variant v : variants_of(cfg)) {
    const RubricSpec spec = cfg.rubric_path ? rubric_from_json(read_json(*cfg.rubric_path)) : parameters_for(cfg, v);
    const CompiledNetwork cn = compile(spec, cat_model_config(v, options_of(cfg)));
    out << "variant " << to_string(v) << '\n';
    print_summary(cn, out);
    files.emplace_back(cfg.output_dir / ("network_" + lower(v) + ".json"), network_to_json(cn.network).dump(1) + "\n");
  }
  for (const auto& [path, content] : files) write_file_atomic(path, content);
  return 0;
}

int cmd_assess(const CliConfig& cfg, std::ostream& out, std::ostream& err) {
  if (!cfg.answers_path) throw DataError("assess needs --answers");
  int failures = 0;
  std::vector<CompetenceProfile> profiles;
  for (Variant v : variants_of(cfg)) {
    const CatAssessor assessor(v, parameters_for(cfg, v), options_of(cfg));
    const auto records = load_answers(*cfg.answers_path, assessor.compiled().spec);
    auto batch = assess_all(assessor, records, err, failures);
    out << "variant " << to_string(v) << ": assessed " << batch.size() << "/" << records.size() << " students\n";
    profiles.insert(profiles.end(), batch.begin(), batch.end());
  }
  std::ostringstream posteriors, scores;
  write_posteriors_csv(posteriors, profiles);
  write_scores_csv(scores, profiles);
  write_file_atomic(cfg.output_dir / "posteriors.csv", posteriors.str());
  write_file_atomic(cfg.output_dir / "scores.csv", scores.str());
  write_file_atomic(cfg.output_dir / "report.json", correlation_report(profiles).dump(2) + "\n");
  return failures == 0 ? 0 : 1;
}

int cmd_score(const CliConfig& cfg, std::ostream& out, std::ostream& err) {
  if (!cfg.answers_path) throw DataError("score needs --answers");
  int failures = 0;
  std::vector<CompetenceProfile> profiles;
  for (Variant v : variants_of(cfg)) {
    const CatAssessor assessor(v, parameters_for(cfg, v), options_of(cfg));
    const auto records = load_answers(*cfg.answers_path, assessor.compiled().spec);
    auto batch = assess_all(assessor, records, err, failures);
    profiles.insert(profiles.end(), batch.begin(), batch.end());
  }
  std::ostringstream scores;
  write_scores_csv(scores, profiles);
  out << scores.str();
  const auto report = correlation_report(profiles);
  for (const auto& [variant, entry] : report.items()) {
    out << "pearson(cat_score, bn_rescaled) " << variant << ": "
        << (entry["pearson"].is_null() ? std::string("undefined") : fixed(entry["pearson"].get<double>(), 4)) << '\n';
  }
  write_file_atomic(cfg.output_dir / "scores.csv", scores.str());
  write_file_atomic(cfg.output_dir / "report.json", report.dump(2) + "\n");
  return failures == 0 ? 0 : 1;
}

int cmd_reproduce(const CliConfig& cfg, std::ostream& out, std::ostream& err) {
  const fs::path data = cfg.data_dir.empty() ? default_data_dir() : cfg.data_dir;
  const PublishedResults published = published_results_from_json(read_json(data / "cat" / "published_results.json"));
  int failures = 0;
  std::vector<std::pair<fs::path, std::string>> files;
  nlohmann::json report = nlohmann::json::object();

  for (Variant v : variants_of(cfg)) {
    const CatAssessor assessor(v, parameters_for(cfg, v), options_of(cfg));
    const auto records = load_answers(data / "cat" / "pupils.csv", assessor.compiled().spec);
    const auto profiles = assess_all(assessor, records, err, failures);

    out << "== variant " << to_string(v);
    if (v == Variant::kECS) out << " (partial: T3 parameters only)";
    out << " ==\n";
    out << "student  cat_score  published  bn_raw  bn_rescaled  published_bn\n";
    nlohmann::json entry;
    if (v == Variant::kECS) entry["note"] = "partial: T3 parameters only";
    for (const auto& p : profiles) {
      const auto cs = published.cat_scores.find(p.student);
      double pub_bn = std::nan("");
      if (auto b = published.bn_scores.find(p.student); b != published.bn_scores.end() && b->second.contains(v)) {
        pub_bn = b->second.at(v);
      }
      out << std::setw(7) << p.student << "  " << std::setw(9) << fixed(p.cat_score, 2) << "  " << std::setw(9)
          << (cs == published.cat_scores.end() ? std::string("-") : fixed(cs->second, 2)) << "  " << std::setw(6)
          << fixed(p.bn_raw, 2) << "  " << std::setw(11) << fixed(p.bn_rescaled, 2) << "  " << std::setw(12)
          << (std::isnan(pub_bn) ? std::string("-") : fixed(pub_bn, 2)) << '\n';
      entry["students"][p.student] = {{"cat_score", p.cat_score}, {"bn_raw", p.bn_raw}, {"bn_rescaled", p.bn_rescaled}};
    }

    const auto rows = deviation_table(records, v, published, profiles);
    std::size_t within = 0;
    double worst = 0.0;
    for (const auto& r : rows) {
      within += r.within ? 1 : 0;
      worst = std::max(worst, r.deviation);
    }
    out << "cells within +/-" << fixed(published.tolerance, 2) << ": " << within << "/" << rows.size()
        << " (max deviation " << fixed(worst, 3) << ")\n";
    for (const auto& r : rows) {
      if (r.within) continue;
      out << "  " << r.student << ' ' << r.node << ": computed " << fixed(r.computed, 3) << ", published "
          << fixed(r.published, 2) << ", deviation " << fixed(r.deviation, 3) << ", traced to: ";
      if (r.traced_to.empty()) out << "none";
      for (std::size_t i = 0; i < r.traced_to.size(); ++i) out << (i ? ", " : "") << r.traced_to[i];
      out << '\n';
    }
    entry["cells"] = rows.size();
    entry["within_tolerance"] = within;
    entry["max_deviation"] = worst;

    std::ostringstream posteriors, scores, deviations;
    write_posteriors_csv(posteriors, profiles);
    write_scores_csv(scores, profiles);
    write_deviation_csv(deviations, rows);
    files.emplace_back(cfg.output_dir / ("reproduce_" + lower(v) + "_posteriors.csv"), posteriors.str());
    files.emplace_back(cfg.output_dir / ("reproduce_" + lower(v) + "_scores.csv"), scores.str());
    files.emplace_back(cfg.output_dir / ("reproduce_" + lower(v) + "_deviations.csv"), deviations.str());
    report[to_string(v)] = entry;
  }
  files.emplace_back(cfg.output_dir / "reproduce_report.json", report.dump(2) + "\n");
  for (const auto& [path, content] : files) write_file_atomic(path, content);
  return failures == 0 ? 0 : 1;
}

int cmd_validate(const CliConfig& cfg, std::ostream& out, std::ostream&) {
  std::vector<CheckResult> results;
  if (cfg.network_path) results.push_back(check_file(*cfg.network_path));
  results.push_back(check_networks(cfg.inject_fault));
  results.push_back(check_priors());
  results.push_back(check_gates(cfg.seed));
  results.push_back(check_oracle(cfg.seed, cfg.random_networks));
  bool ok = true;
  for (const auto& r : results) {
    out << (r.pass ? "PASS " : "FAIL ") << r.name << ": " << r.detail << '\n';
    ok = ok && r.pass;
  }
  return ok ? 0 : 1;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Compile assessment rubrics into noisy-gate Bayesian networks and assess learners"};
  app.require_subcommand(1);
  CliConfig cfg;
  std::string variant_text;
  std::string output_dir = ".";

  auto add_variant = [&](CLI::App* sub, bool required) {
    auto* opt = sub->add_option("--variant", variant_text, "b, bc, bcs, ecs or all");
    if (required) opt->required();
  };
  auto add_switches = [&](CLI::App* sub) {
    sub->add_option("--ecs-lambdas", cfg.ecs_lambda_path, "JSON lambda overrides for ECS tasks")->check(CLI::ExistingFile);
    sub->add_flag("--fail-supplementary-unobserved", cfg.fail_supplementary_unobserved,
                  "leave supplementary answers of failed tasks unobserved");
    sub->add_option("--encoding", cfg.encoding, "override the answer encoding")
        ->check(CLI::IsMember({"unconstrained", "constrained"}));
  };

  auto* compile_cmd = app.add_subcommand("compile", "compile a rubric into a network JSON file");
  compile_cmd->add_option("--rubric", cfg.rubric_path, "rubric JSON (default: built-in CAT rubric)")->check(CLI::ExistingFile);
  add_variant(compile_cmd, true);
  add_switches(compile_cmd);
  compile_cmd->add_option("--out-dir", output_dir, "output directory");

  auto* assess_cmd = app.add_subcommand("assess", "posterior competence profiles for an answers CSV");
  assess_cmd->add_option("--answers", cfg.answers_path, "answers CSV")->required()->check(CLI::ExistingFile);
  add_variant(assess_cmd, true);
  add_switches(assess_cmd);
  assess_cmd->add_option("--out-dir", output_dir, "output directory");

  auto* score_cmd = app.add_subcommand("score", "CAT and BN-based scores with their correlation");
  score_cmd->add_option("--answers", cfg.answers_path, "answers CSV")->required()->check(CLI::ExistingFile);
  add_variant(score_cmd, false);
  add_switches(score_cmd);
  score_cmd->add_option("--out-dir", output_dir, "output directory");

  auto* reproduce_cmd = app.add_subcommand("reproduce", "rerun the four published pupils and diff the results");
  add_variant(reproduce_cmd, true);
  add_switches(reproduce_cmd);
  reproduce_cmd->add_option("--data-dir", cfg.data_dir, "fixture directory")->check(CLI::ExistingDirectory);
  reproduce_cmd->add_option("--out-dir", output_dir, "output directory");

  auto* validate_cmd = app.add_subcommand("validate", "run the oracle and identity checks");
  validate_cmd->add_option("--network", cfg.network_path, "also validate this network JSON")->check(CLI::ExistingFile);
  validate_cmd->add_option("--seed", cfg.seed, "seed for the random suites");
  validate_cmd->add_option("--random-networks", cfg.random_networks, "number of random networks");
  validate_cmd->add_option("--inject-fault", cfg.inject_fault, "corrupt a compiled network on purpose")
      ->check(CLI::IsMember({"broken-cpt"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    cfg.output_dir = output_dir;
    if (!variant_text.empty() && variant_text != "all") cfg.variants = {parse_variant(variant_text)};
    if (*compile_cmd) return cmd_compile(cfg, out, err);
    if (*assess_cmd) return cmd_assess(cfg, out, err);
    if (*score_cmd) return cmd_score(cfg, out, err);
    if (*reproduce_cmd) return cmd_reproduce(cfg, out, err);
    if (*validate_cmd) return cmd_validate(cfg, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}

}  // namespace rubricbn::cli
