#pragma once

#include <cstdint>
#include <exception>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace qhl {

// Experiment kinds accepted on the command line.
const std::vector<std::string>& experiment_kinds();

struct Artifact {
  std::string name;     // file name inside the output directory
  std::string content;
};

struct RunResult {
  std::vector<Artifact> artifacts;  // manifest.json last
  nlohmann::json manifest;
};

// Runs one experiment entirely in memory. `config` follows the schema of the
// kind (see README); unknown fields are ConfigError("schema"). The outputs
// depend on (config, master_seed) only.
RunResult run_experiment(const std::string& kind, const nlohmann::json& config, std::uint64_t master_seed,
                         int threads);

// Writes every artifact into `dir` (created if missing). On failure the files
// written so far are removed and IoError is thrown.
void write_artifacts(const std::string& dir, const RunResult& result);

// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view data);

// Exit status for an exception: 2 validation, 3 numerical failure, 4 I/O.
int exit_code_for(const std::exception& e);
// {"error": category, "exit_code": n, "message": ..., ["invariant": ...]}.
nlohmann::json error_json(const std::exception& e);

// ml-table body: columns alpha,lambda,t,f,F; f is "inf" at t = 0 when alpha < 1.
std::string ml_table_csv(const std::vector<double>& alphas, const std::vector<double>& lambdas,
                         const std::vector<double>& ts);

const char* version_string();

// Command-line entry point used by tools/qhl.
int cli_main(int argc, char** argv);

}  // namespace qhl
