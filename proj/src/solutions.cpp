#include "bilevel/solutions.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "bilevel/numfmt.hpp"

namespace bilevel {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool wanted(const BilevelInstance& inst, const std::string& name) {
  const std::vector<std::string>& c = inst.analysis.concepts;
  return c.empty() || std::find(c.begin(), c.end(), name) != c.end();
}

// How a competitor at grid index j relates to the incumbent at index i.
enum class Verdict { kBeats, kTies, kFine };

// Shared sweep for leader-point concepts: an index is epsilon-local when no
// grid competitor in the open ball beats it; entries record the smallest
// radius of the schedule that witnessed this, plus whether every competitor
// was strictly worse.
void local_x_sweep(const FamilyResult& fam, const std::vector<double>& radii,
                   const std::function<Verdict(std::size_t, std::size_t)>& vs,
                   std::vector<LocalX>& out) {
  const std::size_t n = fam.grid.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (double eps : radii) {
      bool ok = true, strict = true;
      for (std::size_t j = 0; j < n && ok; ++j) {
        if (j == i) continue;
        if (space_norm(fam.grid[j], fam.grid[i]) >= eps) continue;
        switch (vs(i, j)) {
          case Verdict::kBeats: ok = false; break;
          case Verdict::kTies: strict = false; break;
          case Verdict::kFine: break;
        }
      }
      if (ok) {
        out.push_back({i, eps, strict});
        break;
      }
    }
  }
}

// One pair the standard concept should consider: in grid mode every best
// response, in symbolic mode the closed stretch endpoints (plus an interior
// representative when a constant stretch has no closed end, since then the
// value is attained but only strictly inside).
struct Candidate {
  std::size_t index = 0;
  std::vector<double> y;
  double value = 0.0;
  bool stretch = false;  // stands in for a whole constant stretch
};

double stretch_representative(const MonotonePiece& p) {
  if (p.lo_closed) return p.y_lo;
  if (p.hi_closed) return p.y_hi;
  const bool lf = std::isfinite(p.y_lo), hf = std::isfinite(p.y_hi);
  if (lf && hf) return p.y_lo + (p.y_hi - p.y_lo) / 2;
  if (lf) return p.y_lo + 1;
  if (hf) return p.y_hi - 1;
  return 0.0;
}

std::vector<Candidate> standard_candidates(const BilevelInstance& inst,
                                           const FamilyResult& fam) {
  std::vector<Candidate> out;
  const bool symbolic = inst.analysis.psi == PsiBackend::kSymbolic;
  for (std::size_t i = 0; i < fam.results.size(); ++i) {
    const PsiResult& r = fam.results[i];
    if (!symbolic) {
      for (std::size_t k = 0; k < r.psi_points.size(); ++k)
        out.push_back({i, r.psi_points[k], r.psi_values[k], false});
      continue;
    }
    std::vector<Candidate> mine;
    auto add = [&](double y, double value, bool stretch) {
      for (const Candidate& c : mine)
        if (c.y[0] == y) return;
      mine.push_back({i, {y}, value, stretch});
    };
    for (const MonotonePiece& p : r.pieces) {
      const bool stretch =
          p.shape == MonotonePiece::Shape::kConstant && p.y_lo < p.y_hi;
      if (p.lo_closed) add(p.y_lo, p.value_lo, stretch);
      if (p.hi_closed) add(p.y_hi, p.value_hi, stretch);
      if (stretch && !p.lo_closed && !p.hi_closed)
        add(stretch_representative(p), p.value_lo, true);
    }
    out.insert(out.end(), mine.begin(), mine.end());
  }
  return out;
}

}  // namespace

AttainmentSets attainment_sets(const FamilyResult& family) {
  AttainmentSets out;
  double best_inf = kInf, best_sup = kInf;
  for (const PsiResult& r : family.results) {
    best_inf = std::min(best_inf, r.inf_F.value);
    best_sup = std::min(best_sup, r.sup_F.value);
  }
  for (std::size_t i = 0; i < family.results.size(); ++i) {
    const PsiResult& r = family.results[i];
    if (r.inf_F.value == best_inf) {
      out.q.push_back(i);
      if (r.inf_F.attained) out.t.push_back(i);
    }
    if (r.sup_F.value == best_sup) {
      out.q_hat.push_back(i);
      if (r.sup_F.attained) out.t_hat.push_back(i);
    }
  }
  return out;
}

SolutionsReport solve_concepts(const BilevelInstance& inst,
                               const FamilyResult& fam) {
  SolutionsReport rep;
  const std::size_t n = fam.results.size();
  const std::vector<double>& radii = inst.analysis.radii;
  const bool symbolic = inst.analysis.psi == PsiBackend::kSymbolic;

  rep.attainment = attainment_sets(fam);
  double best_inf = kInf, best_sup = kInf;
  for (const PsiResult& r : fam.results) {
    best_inf = std::min(best_inf, r.inf_F.value);
    best_sup = std::min(best_sup, r.sup_F.value);
  }
  rep.optimistic_value = {best_inf, !rep.attainment.t.empty()};
  rep.pessimistic_value = {best_sup, !rep.attainment.t_hat.empty()};

  auto inf_at = [&](std::size_t i) { return fam.results[i].inf_F.value; };
  auto sup_at = [&](std::size_t i) { return fam.results[i].sup_F.value; };

  if (wanted(inst, "real_optimistic")) {
    rep.computed.push_back("real_optimistic");
    rep.real_optimistic.global = rep.attainment.q;
    local_x_sweep(fam, radii,
                  [&](std::size_t i, std::size_t j) {
                    if (inf_at(j) < inf_at(i)) return Verdict::kBeats;
                    if (inf_at(j) == inf_at(i)) return Verdict::kTies;
                    return Verdict::kFine;
                  },
                  rep.real_optimistic.local);
  }

  if (wanted(inst, "real_pessimistic")) {
    rep.computed.push_back("real_pessimistic");
    rep.real_pessimistic.global = rep.attainment.q_hat;
    local_x_sweep(fam, radii,
                  [&](std::size_t i, std::size_t j) {
                    if (sup_at(j) < sup_at(i)) return Verdict::kBeats;
                    if (sup_at(j) == sup_at(i)) return Verdict::kTies;
                    return Verdict::kFine;
                  },
                  rep.real_pessimistic.local);
  }

  if (wanted(inst, "standard_optimistic")) {
    rep.computed.push_back("standard_optimistic");
    PairConcept& sc = rep.standard_optimistic;
    const std::vector<Candidate> candidates = standard_candidates(inst, fam);
    bool stretchy = false;

    if (!rep.optimistic_value.attained) {
      sc.note = "infimum unattained: no pair achieves the graph infimum " +
                format_shortest(best_inf) +
                ", so the standard problem has no solution";
    } else {
      for (const Candidate& c : candidates) {
        if (c.value != best_inf) continue;
        sc.global.push_back({c.index, c.y, c.value});
        stretchy = stretchy || c.stretch;
      }
    }

    for (const Candidate& c : candidates) {
      for (double eps : radii) {
        bool ok = true;
        for (std::size_t j = 0; j < n && ok; ++j) {
          const double budget = eps - space_norm(fam.grid[j], fam.grid[c.index]);
          if (budget <= 0) continue;
          if (symbolic) {
            const auto w = window_inf(inst, fam.results[j], c.y[0], budget);
            if (w && w->value < c.value) ok = false;
          } else {
            const PsiResult& r = fam.results[j];
            for (std::size_t k = 0; k < r.psi_points.size(); ++k) {
              if (space_norm(r.psi_points[k], c.y) < budget &&
                  r.psi_values[k] < c.value) {
                ok = false;
                break;
              }
            }
          }
        }
        if (ok) {
          sc.local.push_back({{c.index, c.y, c.value}, eps});
          stretchy = stretchy || c.stretch;
          break;
        }
      }
    }
    if (stretchy)
      sc.note = "a whole stretch of best responses ties at the listed value; "
                "one point per stretch is shown";
  }

  // The set-order concepts compare whole images.
  std::vector<RealSet> images;
  if (wanted(inst, "l_minimal") || wanted(inst, "u_minimal")) {
    images.reserve(n);
    for (const PsiResult& r : fam.results) images.push_back(*r.image);
  }

  if (wanted(inst, "l_minimal")) {
    rep.computed.push_back("l_minimal");
    rep.l_minimal.global = minimal_members(
        images, [](const RealSet& a, const RealSet& b) { return leq_l(a, b); });
    local_x_sweep(fam, radii,
                  [&](std::size_t i, std::size_t j) {
                    if (!leq_l(images[j], images[i])) return Verdict::kFine;
                    return leq_l(images[i], images[j]) ? Verdict::kTies
                                                       : Verdict::kBeats;
                  },
                  rep.l_minimal.local);
  }

  if (wanted(inst, "u_minimal")) {
    rep.computed.push_back("u_minimal");
    rep.u_minimal.global = minimal_members(
        images, [](const RealSet& a, const RealSet& b) { return leq_u(a, b); });
    local_x_sweep(fam, radii,
                  [&](std::size_t i, std::size_t j) {
                    if (!leq_u(images[j], images[i])) return Verdict::kFine;
                    return leq_u(images[i], images[j]) ? Verdict::kTies
                                                       : Verdict::kBeats;
                  },
                  rep.u_minimal.local);
  }

  if (wanted(inst, "vector")) {
    rep.computed.push_back("vector");
    PairConcept& vc = rep.vector_optimal;
    if (!rep.optimistic_value.attained) {
      vc.note = "no image attains the family minimum " +
                format_shortest(best_inf) + "; no certified minimal value";
    } else {
      for (std::size_t i : rep.attainment.t)
        vc.global.push_back({i, {}, best_inf});
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (!fam.results[i].inf_F.attained) continue;
      for (double eps : radii) {
        bool ok = true;
        for (std::size_t j = 0; j < n && ok; ++j) {
          if (j == i) continue;
          if (space_norm(fam.grid[j], fam.grid[i]) >= eps) continue;
          if (inf_at(j) < inf_at(i)) ok = false;
        }
        if (ok) {
          vc.local.push_back({{i, {}, inf_at(i)}, eps});
          break;
        }
      }
    }
  }

  return rep;
}

}  // namespace bilevel
