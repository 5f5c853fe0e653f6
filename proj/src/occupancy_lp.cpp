#include "allocsim/occupancy_lp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace allocsim {
namespace {

void add_row_sum_terms(const OccupancyLp& lp, std::size_t h, std::size_t s, std::size_t a,
                       double coef, LinearConstraint& row) {
  for (std::size_t sp = 0; sp < lp.shape.num_states; ++sp)
    row.terms.emplace_back(lp.index(h, s, a, sp), coef);
}

// Row  qbar(h,s,a,sp) - ratio * sum_s'' qbar(h,s,a,s'')  (sense)  0.
LinearConstraint ratio_row(const OccupancyLp& lp, std::size_t h, std::size_t s, std::size_t a,
                           std::size_t sp, double ratio, RowSense sense) {
  LinearConstraint row;
  row.sense = sense;
  row.rhs = 0.0;
  row.terms.reserve(lp.shape.num_states);
  for (std::size_t k = 0; k < lp.shape.num_states; ++k) {
    const double coef = (k == sp ? 1.0 : 0.0) - ratio;
    if (coef != 0.0) row.terms.emplace_back(lp.index(h, s, a, k), coef);
  }
  return row;
}

ExtendedOccupancy extract(const OccupancyLp& lp, const std::vector<double>& x,
                          std::size_t offset = 0) {
  ExtendedOccupancy ext(lp.shape);
  auto& out = ext.qbar.flat();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = x[offset + i];
    out[i] = v < kOccupancyCleanTol ? 0.0 : v;
  }
  return ext;
}

Table3 penalized(const EpisodeFunctions& fg, double lambda) {
  Table3 c(fg.f.dims());
  for (std::size_t i = 0; i < c.size(); ++i) c.flat()[i] = fg.f.flat()[i] - lambda * fg.g.flat()[i];
  return c;
}

}  // namespace

void OccupancyLp::set_objective(const Table3& c) {
  program.objective.assign(program.num_vars, 0.0);
  for (std::size_t h = 0; h < shape.horizon; ++h)
    for (std::size_t s = 0; s < shape.num_states; ++s)
      for (std::size_t a = 0; a < shape.num_actions; ++a)
        for (std::size_t sp = 0; sp < shape.num_states; ++sp)
          program.objective[index(h, s, a, sp)] = c(h, s, a);
}

OccupancyLp build_delta_lp(const ConfidenceSet& set, const std::vector<double>& init) {
  const MdpShape& sh = set.shape;
  if (init.size() != sh.num_states)
    throw std::invalid_argument("build_delta_lp: init has wrong size");
  OccupancyLp lp;
  lp.shape = sh;
  lp.program.num_vars = lp.num_cells();
  lp.program.objective.assign(lp.program.num_vars, 0.0);
  auto& rows = lp.program.rows;
  const std::size_t S = sh.num_states, A = sh.num_actions, H = sh.horizon;

  for (std::size_t h = 0; h < H; ++h) {
    LinearConstraint row;
    row.sense = RowSense::kEqual;
    row.rhs = 1.0;
    for (std::size_t s = 0; s < S; ++s)
      for (std::size_t a = 0; a < A; ++a) add_row_sum_terms(lp, h, s, a, 1.0, row);
    rows.push_back(std::move(row));
  }
  for (std::size_t h = 1; h < H; ++h) {
    for (std::size_t s = 0; s < S; ++s) {
      LinearConstraint row;
      row.sense = RowSense::kEqual;
      for (std::size_t a = 0; a < A; ++a) add_row_sum_terms(lp, h, s, a, 1.0, row);
      for (std::size_t sp = 0; sp < S; ++sp)
        for (std::size_t a = 0; a < A; ++a) row.terms.emplace_back(lp.index(h - 1, sp, a, s), -1.0);
      rows.push_back(std::move(row));
    }
  }
  for (std::size_t s = 0; s < S; ++s) {
    LinearConstraint row;
    row.sense = RowSense::kEqual;
    row.rhs = init[s];
    for (std::size_t a = 0; a < A; ++a) add_row_sum_terms(lp, 0, s, a, 1.0, row);
    rows.push_back(std::move(row));
  }
  for (std::size_t h = 0; h + 1 < H; ++h) {
    for (std::size_t s = 0; s < S; ++s) {
      for (std::size_t a = 0; a < A; ++a) {
        for (std::size_t sp = 0; sp < S; ++sp) {
          if (set.eps(h, s, a, sp) == 0.0) {
            rows.push_back(ratio_row(lp, h, s, a, sp, set.pbar(h, s, a, sp), RowSense::kEqual));
            continue;
          }
          const double lo = set.lower(h, s, a, sp);
          const double hi = set.upper(h, s, a, sp);
          if (lo > 0.0) rows.push_back(ratio_row(lp, h, s, a, sp, lo, RowSense::kGreaterEqual));
          if (hi < 1.0) rows.push_back(ratio_row(lp, h, s, a, sp, hi, RowSense::kLessEqual));
        }
      }
    }
  }
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t a = 0; a < A; ++a)
      for (std::size_t sp = 0; sp < S; ++sp)
        rows.push_back(ratio_row(lp, H - 1, s, a, sp, init[sp], RowSense::kEqual));
  return lp;
}

OccupancyLp build_delta_lp(const TransitionKernel& kernel) {
  return build_delta_lp(exact_confidence_set(kernel), kernel.init);
}

LpSolution solve_lp(const OccupancyLp& lp, const LpSolver& solver, double tol) {
  const LpResult res = solver.solve(lp.program);
  LpSolution sol;
  sol.status = res.status;
  sol.iterations = res.iterations;
  if (res.status != LpStatus::kOptimal) return sol;
  sol.qbar = extract(lp, res.x);
  sol.objective = res.objective;
  sol.primal_residual = lp.program.primal_residual(sol.qbar.qbar.flat());
  sol.objective_residual = std::abs(lp.program.evaluate(sol.qbar.qbar.flat()) - res.objective);
  if (sol.primal_residual > tol) sol.status = LpStatus::kNumericalFailure;
  return sol;
}

LpSolution solve_lp(const OccupancyLp& lp, double tol) {
  return solve_lp(lp, DenseSimplex{}, tol);
}

PenalizedArgmax argmax_penalized(const ConfidenceSet& set, const std::vector<double>& init,
                                 const EpisodeFunctions& fg, double lambda,
                                 const LpSolver& solver) {
  if (!(lambda >= 0.0)) throw std::invalid_argument("argmax_penalized: lambda must be >= 0");
  OccupancyLp lp = build_delta_lp(set, init);
  lp.set_objective(penalized(fg, lambda));
  PenalizedArgmax out;
  out.solution = solve_lp(lp, solver);
  if (out.solution.status != LpStatus::kOptimal)
    throw LpFailure(out.solution.status,
                    "argmax_penalized: solver returned " + to_string(out.solution.status));
  out.occupancy = marginal(out.solution.qbar);
  return out;
}

PenalizedArgmax argmax_penalized(const ConfidenceSet& set, const std::vector<double>& init,
                                 const EpisodeFunctions& fg, double lambda) {
  return argmax_penalized(set, init, fg, lambda, DenseSimplex{});
}

void dump_lp(const LinearProgram& lp, std::ostream& out) {
  const auto prec = out.precision(17);
  out << "# allocsim-lp v1\n";
  out << "maximize " << lp.num_vars << "\n";
  out << "obj";
  for (std::size_t j = 0; j < lp.num_vars; ++j)
    if (lp.objective[j] != 0.0) out << ' ' << j << ':' << lp.objective[j];
  out << "\nrows " << lp.rows.size() << "\n";
  for (std::size_t i = 0; i < lp.rows.size(); ++i) {
    const auto& r = lp.rows[i];
    const char sense = r.sense == RowSense::kLessEqual ? 'L' : r.sense == RowSense::kEqual ? 'E' : 'G';
    out << 'r' << i << ' ' << sense << ' ' << r.rhs << " :";
    for (const auto& [j, c] : r.terms) out << ' ' << j << ':' << c;
    out << '\n';
  }
  out << "bounds x >= 0\n";
  out.precision(prec);
}

std::pair<double, Policy> best_deterministic_policy(const TransitionKernel& kernel,
                                                    const Table3& objective) {
  const MdpShape& sh = kernel.shape;
  Policy policy(sh);
  std::vector<double> next_value(sh.num_states, 0.0), value(sh.num_states, 0.0);
  for (std::size_t h = sh.horizon; h-- > 0;) {
    for (std::size_t s = 0; s < sh.num_states; ++s) {
      auto action_value = [&](std::size_t a) {
        double v = objective(h, s, a);
        if (h + 1 < sh.horizon) {
          const auto next = kernel.trans.row(h, s, a);
          for (std::size_t sp = 0; sp < sh.num_states; ++sp) v += next[sp] * next_value[sp];
        }
        return v;
      };
      std::size_t best_a = sh.star_action;
      double best = action_value(best_a);
      for (std::size_t a = 0; a < sh.num_actions; ++a) {
        if (a == sh.star_action) continue;
        const double v = action_value(a);
        if (v > best) {
          best = v;
          best_a = a;
        }
      }
      value[s] = best;
      policy.pi(h, s, best_a) = 1.0;
    }
    std::swap(value, next_value);
  }
  double total = 0.0;
  for (std::size_t s = 0; s < sh.num_states; ++s) total += kernel.init[s] * next_value[s];
  return {total, std::move(policy)};
}

LinearProgram build_hindsight_lp(const TransitionKernel& kernel,
                                 const std::vector<EpisodeFunctions>& episodes, double rho) {
  const OccupancyLp block = build_delta_lp(kernel);
  const std::size_t cells = block.num_cells();
  const std::size_t T = episodes.size();
  LinearProgram lp;
  lp.num_vars = cells * T;
  lp.objective.assign(lp.num_vars, 0.0);
  LinearConstraint budget;
  budget.sense = RowSense::kLessEqual;
  budget.rhs = static_cast<double>(T) * static_cast<double>(kernel.shape.horizon) * rho;
  const MdpShape& sh = kernel.shape;
  for (std::size_t t = 0; t < T; ++t) {
    const std::size_t off = t * cells;
    for (const auto& r : block.program.rows) {
      LinearConstraint row = r;
      for (auto& term : row.terms) term.first += off;
      lp.rows.push_back(std::move(row));
    }
    for (std::size_t h = 0; h < sh.horizon; ++h)
      for (std::size_t s = 0; s < sh.num_states; ++s)
        for (std::size_t a = 0; a < sh.num_actions; ++a)
          for (std::size_t sp = 0; sp < sh.num_states; ++sp) {
            const std::size_t j = off + block.index(h, s, a, sp);
            lp.objective[j] = episodes[t].f(h, s, a);
            if (episodes[t].g(h, s, a) != 0.0) budget.terms.emplace_back(j, episodes[t].g(h, s, a));
          }
  }
  lp.rows.push_back(std::move(budget));
  return lp;
}

namespace {

struct DualPoint {
  double mu = 0.0;
  double reward = 0.0;       // sum_t <f_t, q_t>
  double consumption = 0.0;  // sum_t <g_t, q_t>
  double dual = 0.0;         // reward - mu * consumption + mu * budget
  double slope = 0.0;        // budget - consumption
  std::vector<OccupancyMeasure> occ;
};

DualPoint evaluate_dual(const TransitionKernel& kernel, const std::vector<EpisodeFunctions>& eps,
                        double mu, double budget) {
  DualPoint p;
  p.mu = mu;
  p.occ.reserve(eps.size());
  for (const auto& fg : eps) {
    auto [value, policy] = best_deterministic_policy(kernel, penalized(fg, mu));
    OccupancyMeasure q = marginal(occupancy_from_policy(kernel, policy));
    p.reward += inner(q, fg.f);
    p.consumption += inner(q, fg.g);
    p.occ.push_back(std::move(q));
  }
  p.dual = p.reward - mu * p.consumption + mu * budget;
  p.slope = budget - p.consumption;
  return p;
}

HindsightResult from_point(DualPoint&& p, double budget) {
  HindsightResult r;
  r.value = p.reward;
  r.multiplier = p.mu;
  r.dual_value = p.dual;
  r.budget = budget;
  r.consumption = p.consumption;
  r.occupancies = std::move(p.occ);
  return r;
}

HindsightResult solve_by_decomposition(const TransitionKernel& kernel,
                                       const std::vector<EpisodeFunctions>& eps, double budget) {
  DualPoint left = evaluate_dual(kernel, eps, 0.0, budget);
  if (left.slope >= 0.0) return from_point(std::move(left), budget);

  double mu = 1.0;
  DualPoint right = evaluate_dual(kernel, eps, mu, budget);
  for (int k = 0; right.slope < 0.0; ++k) {
    if (k > 200) throw LpFailure(LpStatus::kNumericalFailure, "hindsight: no feasible multiplier");
    left = std::move(right);
    mu *= 2.0;
    right = evaluate_dual(kernel, eps, mu, budget);
  }
  if (right.slope == 0.0) return from_point(std::move(right), budget);

  // Kelley's cutting plane in one dimension: intersect the supporting lines of
  // the two bracketing points until the intersection is itself on the dual.
  double mu_star = right.mu, dual_star = right.dual;
  for (int iter = 0; iter < 500; ++iter) {
    const double denom = right.slope - left.slope;
    double mx = (left.dual - left.slope * left.mu - right.dual + right.slope * right.mu) / denom;
    mx = std::clamp(mx, left.mu, right.mu);
    const double line = left.dual + left.slope * (mx - left.mu);
    DualPoint x = evaluate_dual(kernel, eps, mx, budget);
    mu_star = mx;
    dual_star = x.dual;
    if (x.slope == 0.0) return from_point(std::move(x), budget);
    const double tol = 1e-12 * std::max(1.0, std::abs(line));
    if (x.dual <= line + tol || right.mu - left.mu <= 1e-15 * std::max(1.0, right.mu)) break;
    if (x.slope < 0.0) left = std::move(x);
    else right = std::move(x);
  }

  // Both bracketing solutions maximize the Lagrangian at mu_star; mix them so
  // the budget row is tight.
  const double theta = std::clamp(
      (budget - right.consumption) / (left.consumption - right.consumption), 0.0, 1.0);
  HindsightResult r;
  r.multiplier = mu_star;
  r.dual_value = dual_star;
  r.budget = budget;
  r.value = theta * left.reward + (1.0 - theta) * right.reward;
  r.consumption = theta * left.consumption + (1.0 - theta) * right.consumption;
  r.occupancies.reserve(eps.size());
  for (std::size_t t = 0; t < eps.size(); ++t) {
    OccupancyMeasure q = left.occ[t];
    const auto& qr = right.occ[t].q.flat();
    auto& out = q.q.flat();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = theta * out[i] + (1.0 - theta) * qr[i];
    r.occupancies.push_back(std::move(q));
  }
  return r;
}

HindsightResult solve_by_coupled_lp(const TransitionKernel& kernel,
                                    const std::vector<EpisodeFunctions>& eps, double rho,
                                    double budget) {
  const LinearProgram lp = build_hindsight_lp(kernel, eps, rho);
  const LpResult res = DenseSimplex{}.solve(lp);
  if (res.status != LpStatus::kOptimal)
    throw LpFailure(res.status, "hindsight: coupled LP returned " + to_string(res.status));
  OccupancyLp block = build_delta_lp(kernel);
  const std::size_t cells = block.num_cells();
  HindsightResult r;
  r.budget = budget;
  r.value = res.objective;
  r.multiplier = std::max(0.0, res.duals.back());
  for (std::size_t t = 0; t < eps.size(); ++t) {
    OccupancyMeasure q = marginal(extract(block, res.x, t * cells));
    r.consumption += inner(q, eps[t].g);
    r.occupancies.push_back(std::move(q));
  }
  r.dual_value = evaluate_dual(kernel, eps, r.multiplier, budget).dual;
  return r;
}

}  // namespace

HindsightResult solve_hindsight_opt(const TransitionKernel& kernel,
                                    const std::vector<EpisodeFunctions>& episodes, double rho,
                                    HindsightMethod method) {
  if (!(rho > 0.0 && rho < 1.0)) throw std::invalid_argument("hindsight: rho must lie in (0, 1)");
  for (const auto& fg : episodes) fg.validate(kernel.shape);
  const double budget =
      static_cast<double>(episodes.size()) * static_cast<double>(kernel.shape.horizon) * rho;
  if (method == HindsightMethod::kCoupledLp)
    return solve_by_coupled_lp(kernel, episodes, rho, budget);
  return solve_by_decomposition(kernel, episodes, budget);
}

}  // namespace allocsim
