#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

namespace allocsim {

enum class RowSense { kLessEqual, kEqual, kGreaterEqual };

struct LinearConstraint {
  std::vector<std::pair<std::size_t, double>> terms;  // (variable, coefficient)
  RowSense sense = RowSense::kEqual;
  double rhs = 0.0;
};

// maximize objective . x  subject to rows, x >= 0.
struct LinearProgram {
  std::size_t num_vars = 0;
  std::vector<double> objective;
  std::vector<LinearConstraint> rows;

  // Largest violation of the rows and of x >= 0.
  double primal_residual(const std::vector<double>& x) const;
  double evaluate(const std::vector<double>& x) const;
};

enum class LpStatus { kOptimal, kInfeasible, kUnbounded, kNumericalFailure };

std::string to_string(LpStatus status);

struct LpResult {
  LpStatus status = LpStatus::kNumericalFailure;
  std::vector<double> x;
  // Row multipliers of the maximization: >= 0 on <= rows, <= 0 on >= rows.
  std::vector<double> duals;
  double objective = 0.0;
  double primal_residual = 0.0;
  std::size_t iterations = 0;
};

struct SimplexOptions {
  double pivot_tol = 1e-9;
  double optimality_tol = 1e-9;
  double feasibility_tol = 1e-9;
  double residual_tol = 1e-7;
  std::size_t max_iterations = 100000;
  // Consecutive degenerate pivots after which the entering rule falls back
  // to smallest-index (Bland) until progress resumes.
  std::size_t degenerate_switch = 50;
};

class LpSolver {
 public:
  virtual ~LpSolver() = default;
  virtual LpResult solve(const LinearProgram& lp) const = 0;
};

// Two-phase dense tableau simplex. Deterministic: Dantzig pricing with
// lowest-index ties, Bland's rule during degenerate stalls.
class DenseSimplex final : public LpSolver {
 public:
  DenseSimplex() = default;
  explicit DenseSimplex(SimplexOptions options) : options_(options) {}

  LpResult solve(const LinearProgram& lp) const override;

  const SimplexOptions& options() const { return options_; }

 private:
  SimplexOptions options_;
};

}  // namespace allocsim
