#pragma once

#include <cstddef>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "allocsim/confidence.hpp"
#include "allocsim/mdp.hpp"
#include "allocsim/simplex.hpp"

namespace allocsim {

// Linear program over extended occupancies qbar(h, s, a, s'), one variable per
// cell in h-major order. Rows:
//   total mass one per step;
//   flow conservation for h >= 1;
//   step-0 state marginal equal to init;
//   kernel box for h < H-1:  lo * rowsum <= qbar <= hi * rowsum
//     (rows implied by qbar >= 0 or qbar <= rowsum are omitted; eps = 0 gives
//      one equality row per cell);
//   last step successor slots pinned to rowsum * init(s').
struct OccupancyLp {
  MdpShape shape;
  LinearProgram program;

  std::size_t index(std::size_t h, std::size_t s, std::size_t a, std::size_t sp) const {
    return ((h * shape.num_states + s) * shape.num_actions + a) * shape.num_states + sp;
  }
  std::size_t num_cells() const {
    return shape.horizon * shape.num_states * shape.num_actions * shape.num_states;
  }

  // Objective c(h, s, a) copied onto every successor slot.
  void set_objective(const Table3& per_state_action);
};

OccupancyLp build_delta_lp(const ConfidenceSet& set, const std::vector<double>& init);
OccupancyLp build_delta_lp(const TransitionKernel& kernel);

struct LpSolution {
  LpStatus status = LpStatus::kNumericalFailure;
  ExtendedOccupancy qbar;
  double objective = 0.0;
  double primal_residual = 0.0;
  double objective_residual = 0.0;  // |c.x - reported objective|
  std::size_t iterations = 0;
};

// Entries with magnitude below this are treated as solver noise and zeroed.
inline constexpr double kOccupancyCleanTol = 1e-12;

LpSolution solve_lp(const OccupancyLp& lp, double tol = 1e-7);
LpSolution solve_lp(const OccupancyLp& lp, const LpSolver& solver, double tol = 1e-7);

// Thrown when an occupancy LP does not reach optimality.
class LpFailure : public std::runtime_error {
 public:
  LpFailure(LpStatus status, const std::string& what)
      : std::runtime_error(what), status_(status) {}
  LpStatus status() const { return status_; }

 private:
  LpStatus status_;
};

struct PenalizedArgmax {
  OccupancyMeasure occupancy;
  LpSolution solution;
};

// argmax over the relaxed set of <f, q> - lambda <g, q>.
// Throws LpFailure if the solver does not report an optimum.
PenalizedArgmax argmax_penalized(const ConfidenceSet& set, const std::vector<double>& init,
                                 const EpisodeFunctions& fg, double lambda,
                                 const LpSolver& solver);
PenalizedArgmax argmax_penalized(const ConfidenceSet& set, const std::vector<double>& init,
                                 const EpisodeFunctions& fg, double lambda);

// Plain-text dump: header, objective, one line per row, bounds.
void dump_lp(const LinearProgram& lp, std::ostream& out);

// ---------------------------------------------------------------------------
// Hindsight benchmark: max sum_t <f_t, q_t> s.t. sum_t <g_t, q_t> <= T H rho,
// q_t in the exact-kernel polytope.

enum class HindsightMethod {
  // Lagrangian decomposition: exact 1-D minimization of the piecewise-linear
  // dual over the budget multiplier, per-episode backward induction, primal
  // recovery by mixing the two active vertex solutions.
  kDecomposition,
  // The coupled LP (T blocks plus one budget row) through a dense solver.
  kCoupledLp,
};

struct HindsightResult {
  double value = 0.0;
  std::vector<OccupancyMeasure> occupancies;
  double multiplier = 0.0;   // budget-row dual
  double dual_value = 0.0;   // sum_t max <f_t - mu g_t, q> + mu * budget
  double budget = 0.0;
  double consumption = 0.0;  // sum_t <g_t, q_t>
};

LinearProgram build_hindsight_lp(const TransitionKernel& kernel,
                                 const std::vector<EpisodeFunctions>& episodes, double rho);

HindsightResult solve_hindsight_opt(const TransitionKernel& kernel,
                                    const std::vector<EpisodeFunctions>& episodes, double rho,
                                    HindsightMethod method = HindsightMethod::kDecomposition);

// Backward induction for max_pi <c, q^{P,pi}>. Ties prefer the star action,
// then the lowest index. Returns the value and the deterministic policy.
std::pair<double, Policy> best_deterministic_policy(const TransitionKernel& kernel,
                                                    const Table3& objective);

}  // namespace allocsim
