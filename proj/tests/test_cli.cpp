#include "rubricbn/cli.hpp"

#include <doctest.h>

#include <fstream>
#include <sstream>

using namespace rubricbn;
namespace fs = std::filesystem;

namespace {

struct Run {
  int status;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "rubricbn");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int status = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {status, out.str(), err.str()};
}

// Fresh directory per call, removed on destruction.
struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) : path(fs::temp_directory_path() / ("rubricbn_cli_" + tag)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str() const { return path.string(); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string answers() { return (cli::default_data_dir() / "cat" / "pupils.csv").string(); }

}  // namespace

TEST_CASE("compile reports the structural counts") {
  TempDir dir("compile");
  const Run b = run({"compile", "--variant", "b", "--out-dir", dir.str()});
  CHECK(b.status == 0);
  CHECK(b.out.find("variables: 118") != std::string::npos);
  CHECK(fs::exists(dir.path / "network_b.json"));

  const Run bc = run({"compile", "--variant", "bc", "--out-dir", dir.str()});
  CHECK(bc.status == 0);
  CHECK(bc.out.find("constraints: 12") != std::string::npos);
}

TEST_CASE("compile rejects a malformed inhibition with its task and cell") {
  TempDir dir("malformed");
  nlohmann::json doc = rubric_to_json(builtin_cat_spec());
  doc["tasks"][2]["lambda_targets"]["21"]["31"] = 1.3;
  const fs::path rubric = dir.path / "rubric.json";
  std::ofstream(rubric) << doc.dump();
  const Run r = run({"compile", "--rubric", rubric.string(), "--variant", "b", "--out-dir", dir.str()});
  CHECK(r.status != 0);
  CHECK(r.err.find("T3") != std::string::npos);
  CHECK(r.err.find("[21][31]") != std::string::npos);
  CHECK_FALSE(fs::exists(dir.path / "network_b.json"));
}

TEST_CASE("compile and assess are idempotent to the byte") {
  TempDir a("idem_a"), b("idem_b");
  for (const TempDir* d : {&a, &b}) {
    CHECK(run({"compile", "--variant", "all", "--out-dir", d->str()}).status == 0);
    CHECK(run({"assess", "--variant", "bc", "--answers", answers(), "--out-dir", d->str()}).status == 0);
  }
  for (const char* f : {"network_b.json", "network_bcs.json", "posteriors.csv", "scores.csv", "report.json"}) {
    CAPTURE(f);
    CHECK(slurp(a.path / f) == slurp(b.path / f));
  }
  for (const auto& entry : fs::directory_iterator(a.path)) CHECK(entry.path().extension() != ".tmp");
}

TEST_CASE("assess writes the three result files") {
  TempDir dir("assess");
  const Run r = run({"assess", "--variant", "bcs", "--answers", answers(), "--out-dir", dir.str()});
  CHECK(r.status == 0);
  const std::string posteriors = slurp(dir.path / "posteriors.csv");
  CHECK(posteriors.rfind("student_id,variant,node,probability\n", 0) == 0);
  CHECK(posteriors.find("21,BCS,S10,") != std::string::npos);
  CHECK(slurp(dir.path / "scores.csv").rfind("student_id,cat_score,bn_raw,bn_rescaled,variant\n", 0) == 0);
  const auto report = nlohmann::json::parse(slurp(dir.path / "report.json"));
  CHECK(report["BCS"]["students"] == 4);
}

TEST_CASE("assess requires a variant and an existing answers file") {
  CHECK(run({"assess", "--answers", answers()}).status != 0);
  CHECK(run({"assess", "--variant", "b", "--answers", "/nonexistent/answers.csv"}).status != 0);
  CHECK(run({"assess", "--variant", "q", "--answers", answers()}).status != 0);
}

TEST_CASE("reproduce under model B matches pupil 33 within tolerance") {
  TempDir dir("repro_b");
  const Run r = run({"reproduce", "--variant", "b", "--out-dir", dir.str()});
  CHECK(r.status == 0);
  std::istringstream rows(slurp(dir.path / "reproduce_b_deviations.csv"));
  std::string line;
  int seen = 0;
  while (std::getline(rows, line)) {
    if (line.rfind("33,", 0) != 0) continue;
    ++seen;
    CHECK(line.find(",yes,") != std::string::npos);
  }
  CHECK(seen == 9);
}

TEST_CASE("reproduce lists the CAT score column") {
  TempDir dir("repro_bc");
  const Run r = run({"reproduce", "--variant", "bc", "--out-dir", dir.str()});
  CHECK(r.status == 0);
  for (const char* row : {"21       3.33       3.30", "33       0.75       0.75", "81       1.75       1.75",
                          "92       2.50       2.50"}) {
    CHECK(r.out.find(row) != std::string::npos);
  }
}

TEST_CASE("reproduce marks the ECS run as partial") {
  TempDir dir("repro_ecs");
  const Run r = run({"reproduce", "--variant", "ecs", "--out-dir", dir.str()});
  CHECK(r.status == 0);
  CHECK(r.out.find("ECS (partial: T3 parameters only)") != std::string::npos);
  const auto report = nlohmann::json::parse(slurp(dir.path / "reproduce_report.json"));
  CHECK(report["ECS"]["note"] == "partial: T3 parameters only");
}

TEST_CASE("validate passes by default and names an injected fault") {
  const Run ok = run({"validate"});
  CHECK(ok.status == 0);
  CHECK(ok.out.find("PASS prior-propagation") != std::string::npos);
  CHECK(ok.out.find("200/200") != std::string::npos);
  CHECK(ok.out.find("FAIL") == std::string::npos);

  const Run broken = run({"validate", "--inject-fault", "broken-cpt", "--random-networks", "10"});
  CHECK(broken.status != 0);
  CHECK(broken.out.find("FAIL network-wellformed") != std::string::npos);
  CHECK(broken.out.find("Y_T1_11") != std::string::npos);
}

TEST_CASE("validate checks a network file") {
  TempDir dir("validate_file");
  CHECK(run({"compile", "--variant", "bc", "--out-dir", dir.str()}).status == 0);
  const Run r = run({"validate", "--network", (dir.path / "network_bc.json").string(), "--random-networks", "5"});
  CHECK(r.status == 0);
  CHECK(r.out.find("PASS network-file") != std::string::npos);
}
