#include "bilevel/lower.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <exception>
#include <limits>
#include <numbers>
#include <thread>
#include <utility>

namespace bilevel {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kSamples = 64;

// ---------------------------------------------------------------------------
// Grid backend

struct GridContext {
  const BilevelInstance* inst = nullptr;
  BoundExpr f, F;
  // Fast path: one follower dimension, no feasibility predicate, and
  // leader-independent bounds. The axis is then shared by every x.
  bool fast = false;
  std::vector<double> axis;
};

GridContext make_grid_context(const BilevelInstance& inst) {
  GridContext ctx;
  ctx.inst = &inst;
  ctx.f = BoundExpr(&inst.lower, inst.env);
  ctx.F = BoundExpr(&inst.upper, inst.env);
  if (inst.follower.size() == 1 && !inst.require) {
    const FollowerDim& d = inst.follower[0];
    bool constant = d.lo.names().empty() && d.hi.names().empty();
    for (const Expr& e : d.mandatory)
      if (!e.names().empty()) constant = false;
    if (constant && d.has_step) {
      std::vector<double> x0;
      for (const LeaderDim& ld : inst.leader) x0.push_back(ld.lo);
      ctx.axis = follower_axis(inst, 0, x0);
      ctx.fast = true;
    }
  }
  return ctx;
}

Interval point_piece(double v, const std::string& at) {
  if (std::isinf(v))
    throw Error("UnboundedValue",
                "leader objective takes an infinite value at " + at);
  return Interval{{v, true}, {v, true}};
}

PsiResult solve_grid_with(const GridContext& ctx, std::span<const double> x,
                          std::vector<double>& fvals) {
  const BilevelInstance& inst = *ctx.inst;
  const std::size_t nl = inst.leader.size();

  PsiResult r;
  r.x.assign(x.begin(), x.end());
  const std::string at = point_label(x);

  std::vector<std::vector<double>> slow_candidates;
  std::size_t count = 0;
  if (ctx.fast) {
    count = ctx.axis.size();
  } else {
    slow_candidates = follower_points(inst, x);
    count = slow_candidates.size();
  }

  std::vector<double> slots(x.begin(), x.end());
  slots.resize(nl + inst.follower.size(), 0.0);
  auto load_candidate = [&](std::size_t i) {
    if (ctx.fast) {
      slots[nl] = ctx.axis[i];
    } else {
      const std::vector<double>& y = slow_candidates[i];
      std::copy(y.begin(), y.end(), slots.begin() + static_cast<long>(nl));
    }
  };

  fvals.resize(count);
  double best = kInf;
  for (std::size_t i = 0; i < count; ++i) {
    load_candidate(i);
    const double v = ctx.f.evaluate(slots);
    fvals[i] = v;
    if (v < best) best = v;
  }
  if (best == -kInf) throw UnboundedLowerError(at);
  r.lower_value = best;

  const double cutoff = best + inst.analysis.tolerance;
  std::vector<Interval> image_pieces, psi_pieces;
  for (std::size_t i = 0; i < count; ++i) {
    if (!(fvals[i] <= cutoff)) continue;
    load_candidate(i);
    if (ctx.fast) {
      r.psi_points.push_back({ctx.axis[i]});
    } else {
      r.psi_points.push_back(slow_candidates[i]);
    }
    const double Fv = ctx.F.evaluate(slots);
    r.psi_values.push_back(Fv);
    image_pieces.push_back(point_piece(Fv, at));
    if (inst.follower.size() == 1)
      psi_pieces.push_back(Interval{{slots[nl], true}, {slots[nl], true}});
  }

  if (inst.follower.size() == 1)
    r.psi = RealSet::canonicalize(std::move(psi_pieces));
  r.image = RealSet::canonicalize(std::move(image_pieces));
  r.inf_F = r.image->inf();
  r.sup_F = r.image->sup();
  return r;
}

// ---------------------------------------------------------------------------
// Symbolic backend

// Sample point j of 1..kSamples strictly inside (a, b), spread to cover
// unbounded pieces as well.
double sample_at(double a, double b, int j) {
  const bool af = std::isfinite(a), bf = std::isfinite(b);
  if (af && bf) return a + (b - a) * (static_cast<double>(j) / (kSamples + 1));
  if (af) return a + std::ldexp(1.0, j - 32);   // a + 2^-31 .. a + 2^32
  if (bf) return b - std::ldexp(1.0, 33 - j);   // b - 2^32 .. b - 2^-31
  return std::tan(std::numbers::pi * (static_cast<double>(j) / (kSamples + 1) - 0.5));
}

// F at a piece end: exact at closed finite ends, a one-sided limit at open
// finite ends, IEEE arithmetic at +-inf (an EvalError there means the limit
// is indeterminate in double precision).
double end_value(const BoundExpr& F, std::vector<double>& slots,
                 std::int32_t y_slot, double y, bool closed, Side open_side,
                 const std::string& at) {
  slots[static_cast<std::size_t>(y_slot)] = y;
  if (std::isinf(y)) {
    try {
      return F.evaluate(slots);
    } catch (const EvalError& e) {
      throw NonMonotonePieceError("indeterminate limit of the leader objective as " +
                                  std::string(y > 0 ? "y -> inf" : "y -> -inf") +
                                  " at " + at + ": " + e.what());
    }
  }
  if (closed) return F.evaluate(slots);
  return F.evaluate_limit(slots, y_slot, open_side);
}

struct Segment {
  double a = 0.0, b = 0.0;
  bool ac = false, bc = false;
};

// Cut [lo, hi] at every threshold it contains: closed singletons at the
// thresholds, open-ended stretches between them.
std::vector<Segment> split_segments(double lo, bool lc, double hi, bool hc,
                                    const std::vector<double>& ts) {
  std::vector<Segment> out;
  double start = lo;
  bool sc = lc;
  for (double t : ts) {
    if (t < start || (t == start && !sc)) continue;
    if (t > hi || (t == hi && !hc)) continue;
    if (t > start) out.push_back({start, t, sc, false});
    out.push_back({t, t, true, true});
    start = t;
    sc = false;
  }
  if (start < hi)
    out.push_back({start, hi, sc, hc});
  else if (start == hi && sc && hc)
    out.push_back({start, hi, true, true});
  return out;
}

Endpoint image_end(double v, bool closed, const std::string& at) {
  if (std::isinf(v)) {
    if (closed)
      throw Error("UnboundedValue",
                  "leader objective takes an infinite value at " + at);
    return {v, false};
  }
  return {v, closed};
}

// Representative member of a canonical interval, for evaluating the
// follower's (constant) optimal value over psi(x).
double representative(const Interval& p) {
  if (p.lo.closed) return p.lo.value;
  if (p.hi.closed) return p.hi.value;
  const bool lf = std::isfinite(p.lo.value), hf = std::isfinite(p.hi.value);
  if (lf && hf) return p.lo.value + (p.hi.value - p.lo.value) / 2;
  if (lf) return p.lo.value + 1;
  if (hf) return p.hi.value - 1;
  return 0.0;
}

}  // namespace

PsiResult solve_psi_grid(const BilevelInstance& inst,
                         std::span<const double> x) {
  GridContext ctx = make_grid_context(inst);
  std::vector<double> fvals;
  return solve_grid_with(ctx, x, fvals);
}

PsiResult solve_psi_symbolic(const BilevelInstance& inst,
                             std::span<const double> x) {
  if (inst.follower.size() != 1)
    throw Error("Unsupported",
                "declared best responses need a one-dimensional follower");
  const std::string at = point_label(x);
  if (inst.psi.empty()) throw NoPsiPieceError(at);

  const std::size_t nl = inst.leader.size();
  std::vector<double> slots(x.begin(), x.end());
  slots.push_back(0.0);  // follower slot; dummy until a piece is evaluated
  const std::int32_t y_slot = static_cast<std::int32_t>(nl);

  // Select the first piece whose condition holds at x.
  const PsiPiece* chosen = nullptr;
  for (const PsiPiece& piece : inst.psi) {
    if (!piece.condition) {
      chosen = &piece;
      break;
    }
    BoundExpr cond(&*piece.condition, inst.env);
    if (cond.evaluate(slots) != 0.0) {
      chosen = &piece;
      break;
    }
  }
  if (chosen == nullptr) throw NoPsiPieceError(at);

  // Evaluate the set description at x.
  std::vector<Interval> psi_pieces;
  for (const PsiSetPiece& sp : chosen->set) {
    BoundExpr lo(&sp.lo, inst.env), hi(&sp.hi, inst.env);
    const double a = lo.evaluate(slots), b = hi.evaluate(slots);
    const bool ac = sp.lo_closed && std::isfinite(a);
    const bool bc = sp.hi_closed && std::isfinite(b);
    if (a > b) continue;
    if (a == b && !(ac && bc)) continue;
    psi_pieces.push_back(Interval{{a, ac}, {b, bc}});
  }
  if (psi_pieces.empty()) throw InfeasibleFollowerError(at);

  PsiResult r;
  r.x.assign(x.begin(), x.end());
  r.psi = RealSet::canonicalize(std::move(psi_pieces));

  // Exact switch points of y -> F(x, y).
  BoundExpr F(&inst.upper, inst.env);
  const std::string& yname = inst.follower[0].name;
  std::vector<double> ts;
  for (const Threshold& th : thresholds(inst.upper)) {
    if (th.var != yname) continue;
    double t;
    try {
      t = F.evaluate_node(th.value_node, slots);
    } catch (const EvalError&) {
      continue;  // undefined switch point: sampling decides below
    }
    if (std::isfinite(t)) ts.push_back(t);
  }
  std::sort(ts.begin(), ts.end());
  ts.erase(std::unique(ts.begin(), ts.end()), ts.end());

  // floor() of anything involving the follower variable jumps at points the
  // threshold scan cannot see; refuse rather than misclassify.
  bool floor_on_y = false;
  for (const Node& n : inst.upper.nodes()) {
    if (n.kind == NodeKind::kFloor && inst.upper.subtree(n.a).uses(yname))
      floor_on_y = true;
  }

  std::vector<Interval> image_pieces;
  for (const Interval& piece : r.psi->pieces()) {
    const std::vector<Segment> segments = split_segments(
        piece.lo.value, piece.lo.closed, piece.hi.value, piece.hi.closed, ts);
    for (const Segment& s : segments) {
      MonotonePiece mp;
      mp.y_lo = s.a;
      mp.y_hi = s.b;
      mp.lo_closed = s.ac;
      mp.hi_closed = s.bc;
      if (s.a == s.b) {
        slots[nl] = s.a;
        const double v = F.evaluate(slots);
        mp.value_lo = mp.value_hi = v;
        mp.shape = MonotonePiece::Shape::kConstant;
        r.pieces.push_back(mp);
        image_pieces.push_back(point_piece(v, at));
        continue;
      }
      if (floor_on_y)
        throw NonMonotonePieceError(
            "leader objective applies floor to the follower variable over " +
            RealSet::interval(s.a, s.ac, s.b, s.bc).to_string() + " at " + at);

      const double va = end_value(F, slots, y_slot, s.a, s.ac, Side::kAbove, at);
      const double vb = end_value(F, slots, y_slot, s.b, s.bc, Side::kBelow, at);
      bool up = false, down = false;
      double prev = va;
      for (int j = 1; j <= kSamples; ++j) {
        slots[nl] = sample_at(s.a, s.b, j);
        const double v = F.evaluate(slots);
        if (v > prev) up = true;
        else if (v < prev) down = true;
        prev = v;
      }
      if (vb > prev) up = true;
      else if (vb < prev) down = true;
      if (up && down)
        throw NonMonotonePieceError(
            "leader objective is not monotone in the follower variable over " +
            RealSet::interval(s.a, s.ac, s.b, s.bc).to_string() + " at " + at);

      mp.value_lo = va;
      mp.value_hi = vb;
      if (va == vb || (!up && !down)) {
        // Same one-sided limits at both ends of a monotone stretch: the
        // stretch is constant.
        mp.shape = MonotonePiece::Shape::kConstant;
        mp.value_hi = mp.value_lo = va;
        r.pieces.push_back(mp);
        image_pieces.push_back(point_piece(va, at));
        continue;
      }
      if (up) {
        mp.shape = MonotonePiece::Shape::kIncreasing;
        image_pieces.push_back(
            Interval{image_end(va, s.ac, at), image_end(vb, s.bc, at)});
      } else {
        mp.shape = MonotonePiece::Shape::kDecreasing;
        image_pieces.push_back(
            Interval{image_end(vb, s.bc, at), image_end(va, s.ac, at)});
      }
      r.pieces.push_back(mp);
    }
  }

  r.image = RealSet::canonicalize(std::move(image_pieces));
  r.inf_F = r.image->inf();
  r.sup_F = r.image->sup();

  // The follower's value is constant over its best responses; evaluate it at
  // one representative member.
  slots[nl] = representative(r.psi->pieces().front());
  BoundExpr f(&inst.lower, inst.env);
  r.lower_value = f.evaluate(slots);
  return r;
}

PsiResult solve_psi(const BilevelInstance& inst, std::span<const double> x) {
  if (inst.analysis.psi == PsiBackend::kSymbolic)
    return solve_psi_symbolic(inst, x);
  return solve_psi_grid(inst, x);
}

FamilyResult image_family(const BilevelInstance& inst, int threads) {
  FamilyResult out;
  out.grid = leader_grid(inst);
  const std::size_t n = out.grid.size();
  out.results.resize(n);

  auto run_range = [&](std::size_t lo, std::size_t hi) {
    if (inst.analysis.psi == PsiBackend::kGrid) {
      const GridContext ctx = make_grid_context(inst);
      std::vector<double> fvals;
      for (std::size_t i = lo; i < hi; ++i)
        out.results[i] = solve_grid_with(ctx, out.grid[i], fvals);
    } else {
      for (std::size_t i = lo; i < hi; ++i)
        out.results[i] = solve_psi_symbolic(inst, out.grid[i]);
    }
  };

  std::size_t workers = threads < 1 ? 1 : static_cast<std::size_t>(threads);
  if (workers > n) workers = n == 0 ? 1 : n;
  if (workers <= 1) {
    run_range(0, n);
    return out;
  }

  // Static partition by index: the per-point work is independent, so the
  // result is identical to the sequential run. On error, surface the
  // failure with the smallest grid index, again matching sequential order.
  std::vector<std::pair<std::size_t, std::exception_ptr>> errors(
      workers, {std::numeric_limits<std::size_t>::max(), nullptr});
  std::vector<std::thread> pool;
  const std::size_t base = n / workers, rem = n % workers;
  std::size_t begin = 0;
  for (std::size_t t = 0; t < workers; ++t) {
    const std::size_t len = base + (t < rem ? 1 : 0);
    const std::size_t lo = begin, hi = begin + len;
    begin = hi;
    pool.emplace_back([&, t, lo, hi] {
      std::size_t i = lo;
      try {
        if (inst.analysis.psi == PsiBackend::kGrid) {
          const GridContext ctx = make_grid_context(inst);
          std::vector<double> fvals;
          for (; i < hi; ++i)
            out.results[i] = solve_grid_with(ctx, out.grid[i], fvals);
        } else {
          for (; i < hi; ++i)
            out.results[i] = solve_psi_symbolic(inst, out.grid[i]);
        }
      } catch (...) {
        errors[t] = {i, std::current_exception()};
      }
    });
  }
  for (std::thread& th : pool) th.join();
  const auto worst = std::min_element(
      errors.begin(), errors.end(),
      [](const auto& a, const auto& b) { return a.first < b.first; });
  if (worst != errors.end() && worst->second)
    std::rethrow_exception(worst->second);
  return out;
}

double eval_upper(const BilevelInstance& inst, std::span<const double> x,
                  double y, Side side) {
  if (inst.follower.size() != 1)
    throw Error("Unsupported",
                "single-point objective queries need a one-dimensional follower");
  BoundExpr F(&inst.upper, inst.env);
  std::vector<double> slots(x.begin(), x.end());
  slots.push_back(y);
  if (side == Side::kExact) return F.evaluate(slots);
  return F.evaluate_limit(slots, static_cast<std::int32_t>(inst.leader.size()),
                          side);
}

std::optional<Extremum> window_inf(const BilevelInstance& inst,
                                   const PsiResult& r, double center,
                                   double radius) {
  if (!(radius > 0)) return std::nullopt;
  const double w_lo = center - radius, w_hi = center + radius;
  std::optional<Extremum> best;
  auto offer = [&](double value, bool attained) {
    if (!best || value < best->value)
      best = Extremum{value, attained};
    else if (value == best->value && attained)
      best->attained = true;
  };
  for (const MonotonePiece& p : r.pieces) {
    const double c = std::max(p.y_lo, w_lo), d = std::min(p.y_hi, w_hi);
    if (c > d) continue;
    const bool c_cl = p.y_lo > w_lo && p.lo_closed;
    const bool d_cl = p.y_hi < w_hi && p.hi_closed;
    if (c == d) {
      if (!(c_cl && d_cl)) continue;
      // A closed singleton: both ends of the piece coincide here.
      offer(c == p.y_lo ? p.value_lo : p.value_hi, true);
      continue;
    }
    switch (p.shape) {
      case MonotonePiece::Shape::kConstant:
        offer(p.value_lo, true);
        break;
      case MonotonePiece::Shape::kIncreasing:
        if (c == p.y_lo)
          offer(p.value_lo, c_cl);
        else
          offer(eval_upper(inst, r.x, c, Side::kAbove), false);
        break;
      case MonotonePiece::Shape::kDecreasing:
        if (d == p.y_hi)
          offer(p.value_hi, d_cl);
        else
          offer(eval_upper(inst, r.x, d, Side::kBelow), false);
        break;
    }
  }
  return best;
}

double space_norm(std::span<const double> a, std::span<const double> b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
  }
  return std::sqrt(sum);
}

}  // namespace bilevel
