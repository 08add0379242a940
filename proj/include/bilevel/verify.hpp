// SPDX-License-Identifier: Apache-2.0
//
// Cross-checks: every proved inclusion between solution concepts is tested
// extensionally on a solved instance, and shipped example reports are
// compared against golden documents. Violations are data, not exceptions:
// the matrix is the primary correctness oracle for the solution engines.
#pragma once

#include <string>
#include <vector>

#include "bilevel/lower.hpp"
#include "bilevel/model.hpp"
#include "bilevel/report.hpp"
#include "bilevel/solutions.hpp"

namespace bilevel {

// One checked inclusion. `hypothesis` reports how the claim's precondition
// was settled: "holds" (decided true), "fails" (decided false; conclusion
// skipped), "user-asserted" (continuity-style assumptions taken on trust),
// or "not-applicable" (nothing to check). `conclusion` is "pass", "fail",
// or "skipped".
struct ClaimResult {
  std::string id;
  std::string hypothesis;
  std::string conclusion;
  std::vector<std::string> witnesses;
  std::vector<std::string> violations;
};

struct ImplicationMatrix {
  std::string name;
  std::vector<double> radii;  // local claims were checked at these radii only
  std::vector<ClaimResult> claims;
  bool any_violation() const;
};

// Requires a report covering all six concepts; recomputes one internally if
// the instance declared a concept filter.
ImplicationMatrix run_matrix(const BilevelInstance& inst,
                             const FamilyResult& family,
                             const SolutionsReport& sol);
ImplicationMatrix run_matrix(const BilevelInstance& inst, int threads = 1);
Json matrix_json(const ImplicationMatrix& m);

struct GoldenMismatch {
  std::string key;       // JSON pointer-style path
  std::string expected;  // canonical rendering from the golden file
  std::string actual;    // canonical rendering of the engine value
};

struct FileOutcome {
  std::string file;  // file name within the directory
  std::string kind;  // "instance" | "game" | "robust"
  int matrix_violations = 0;
  std::string golden;  // "ok" | "mismatch" | "absent"
  std::vector<GoldenMismatch> mismatches;
};

struct VerificationReport {
  std::vector<FileOutcome> files;
  bool ok = true;
};

// Runs the matrix on every instance file and compares each example's report
// against its "<stem>.golden.json" sidecar, in sorted filename order.
VerificationReport verify_directory(const std::string& dir, int threads = 1);
Json verification_json(const VerificationReport& rep);

}  // namespace bilevel
