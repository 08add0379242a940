// Solution concepts over a solved family: which leader points (or
// leader/follower pairs) count as optimal, under six different readings of
// "optimal" for a two-level problem whose lower level may respond with a
// whole set.
//
// Every concept comes in a global form and a local form. Local membership is
// checked against strict balls at the radii from the instance's analysis
// schedule (ascending); an entry records the smallest radius that witnessed
// it. Competitors always range over the leader grid.
#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "bilevel/lower.hpp"
#include "bilevel/model.hpp"
#include "bilevel/setreal.hpp"

namespace bilevel {

// Optimistic/pessimistic argmin sets split by whether the extremum of the
// image is actually attained. q: minimizers of the optimistic value
// inf F(x, psi(x)); t: those whose infimum is attained. q_hat/t_hat: the
// same for the pessimistic value sup F(x, psi(x)).
struct AttainmentSets {
  std::vector<std::size_t> q, t, q_hat, t_hat;
};
AttainmentSets attainment_sets(const FamilyResult& family);

// A local entry for a leader-point concept. `strict` records whether the
// point was strictly better than (for value concepts) or never equivalent
// to (for set-order concepts) every other grid point in its ball.
struct LocalX {
  std::size_t index = 0;
  double radius = 0.0;
  bool strict = false;
};

// A concept whose solutions are leader points, by grid index.
struct XConcept {
  std::vector<std::size_t> global;
  std::vector<LocalX> local;
  std::string note;
};

// A solution that pairs a leader point with follower data: a best response
// for the standard concept, or the certified minimal value (y empty) for
// the set-valued concept.
struct PairMember {
  std::size_t index = 0;
  std::vector<double> y;
  double value = 0.0;
};
struct LocalPair {
  PairMember member;
  double radius = 0.0;
};
struct PairConcept {
  std::vector<PairMember> global;
  std::vector<LocalPair> local;
  std::string note;
};

struct SolutionsReport {
  XConcept real_optimistic;    // argmin of inf F(x, psi(x))
  XConcept real_pessimistic;   // argmin of sup F(x, psi(x))
  XConcept l_minimal;          // minimal images under the lower set order
  XConcept u_minimal;          // minimal images under the upper set order
  PairConcept standard_optimistic;  // minimal pairs over the response graph
  PairConcept vector_optimal;       // (x, z): z minimal across all images

  AttainmentSets attainment;
  Extremum optimistic_value;   // min over x of inf F(x, psi(x))
  Extremum pessimistic_value;  // min over x of sup F(x, psi(x))

  std::vector<std::string> computed;  // concept names actually evaluated
};

// Evaluates the concepts requested by inst.analysis.concepts (all six when
// the list is empty) over a family produced by image_family(inst).
SolutionsReport solve_concepts(const BilevelInstance& inst,
                               const FamilyResult& family);

}  // namespace bilevel
