// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: parses argv into a RunConfig, loads the input,
// applies overrides, runs the requested pipeline, and writes the report.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "bilevel/model.hpp"

namespace bilevel {

enum class Subcommand { kSolve, kRelations, kVerify, kGame, kRobust };
enum class OutputFormat { kJson, kCsv, kText };

// One parsed invocation: the chosen subcommand, its input path, output
// routing, and the model overrides (each unset unless given on the line).
struct RunConfig {
  Subcommand subcommand = Subcommand::kSolve;
  std::string input;
  std::string output;  // empty: stdout
  OutputFormat format = OutputFormat::kJson;
  std::optional<double> grid_step;
  std::optional<std::vector<double>> radii;
  std::optional<double> tolerance;
  std::optional<std::vector<std::string>> concepts;  // empty list = all six
  std::optional<PsiBackend> psi;
  int threads = 0;  // 0: all available cores
};

// Applies the overrides to a loaded instance and re-validates the invariants
// the file loader enforces: positive finite step, grid size cap, every
// radius above the leader resolution with at least one below the domain
// diameter, known concept names, and a declared solution map when the
// symbolic backend is requested. Throws Error("Override") naming the flag.
void apply_overrides(BilevelInstance& inst, const RunConfig& cfg);

// Resolved worker count: cfg.threads, or all available cores when zero.
int resolve_threads(const RunConfig& cfg);

// Runs the configured pipeline and writes the report to stdout or to
// cfg.output (atomically: temp file + rename, so failures leave no partial
// file). Returns the process exit code: 0 success, 1 violations (failed
// verification, disagreeing robust reformulations), 2 input errors.
int execute(const RunConfig& cfg);

// Full entry point used by the binary: argv -> RunConfig -> execute.
// Usage and input errors print to stderr and yield exit code 2.
int run_cli(int argc, const char* const* argv);

}  // namespace bilevel
