#pragma once

#include "rubricbn/cat.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace rubricbn::cli {

struct CliConfig {
  std::string subcommand;
  std::optional<std::filesystem::path> rubric_path;
  // Empty means every variant.
  std::vector<Variant> variants;
  std::optional<std::filesystem::path> answers_path;
  std::filesystem::path output_dir = ".";
  std::optional<std::filesystem::path> ecs_lambda_path;
  std::optional<std::filesystem::path> network_path;
  std::filesystem::path data_dir;
  bool fail_supplementary_unobserved = false;
  // "unconstrained" or "constrained"; unset keeps each variant's default.
  std::optional<std::string> encoding;
  std::uint64_t seed = 20240501;
  std::size_t random_networks = 200;
  std::optional<std::string> inject_fault;
};

// Directory holding the bundled CAT fixtures.
std::filesystem::path default_data_dir();

// Writes to a sibling temporary file, then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

// Each command returns the process exit status: 0 iff no check or
// assessment error occurred.
int cmd_compile(const CliConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_assess(const CliConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_score(const CliConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_reproduce(const CliConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_validate(const CliConfig& cfg, std::ostream& out, std::ostream& err);

// Parses argv and dispatches.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace rubricbn::cli
