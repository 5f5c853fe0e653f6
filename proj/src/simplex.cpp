#include "allocsim/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace allocsim {

double LinearProgram::primal_residual(const std::vector<double>& x) const {
  double worst = 0.0;
  for (double v : x) worst = std::max(worst, -v);
  for (const auto& row : rows) {
    double lhs = 0.0;
    for (const auto& [j, c] : row.terms) lhs += c * x[j];
    const double diff = lhs - row.rhs;
    switch (row.sense) {
      case RowSense::kLessEqual: worst = std::max(worst, diff); break;
      case RowSense::kGreaterEqual: worst = std::max(worst, -diff); break;
      case RowSense::kEqual: worst = std::max(worst, std::abs(diff)); break;
    }
  }
  return worst;
}

double LinearProgram::evaluate(const std::vector<double>& x) const {
  double value = 0.0;
  for (std::size_t j = 0; j < num_vars; ++j) value += objective[j] * x[j];
  return value;
}

std::string to_string(LpStatus status) {
  switch (status) {
    case LpStatus::kOptimal: return "optimal";
    case LpStatus::kInfeasible: return "infeasible";
    case LpStatus::kUnbounded: return "unbounded";
    case LpStatus::kNumericalFailure: return "numerical-failure";
  }
  return "unknown";
}

namespace {

class Tableau {
 public:
  Tableau(const LinearProgram& lp, const SimplexOptions& opt) : opt_(opt) {
    n_ = lp.num_vars;
    m_ = lp.rows.size();
    flipped_.assign(m_, false);
    std::vector<RowSense> sense(m_);
    std::size_t extra = 0, arts = 0;
    for (std::size_t i = 0; i < m_; ++i) {
      sense[i] = lp.rows[i].sense;
      if (lp.rows[i].rhs < 0.0) {
        flipped_[i] = true;
        if (sense[i] == RowSense::kLessEqual) sense[i] = RowSense::kGreaterEqual;
        else if (sense[i] == RowSense::kGreaterEqual) sense[i] = RowSense::kLessEqual;
      }
      if (sense[i] != RowSense::kEqual) ++extra;
      if (sense[i] != RowSense::kLessEqual) ++arts;
    }
    first_art_ = n_ + extra;
    cols_ = first_art_ + arts;
    width_ = cols_ + 1;
    t_.assign(m_ * width_, 0.0);
    basis_.assign(m_, 0);
    row_origin_col_.assign(m_, 0);

    std::size_t next_extra = n_, next_art = first_art_;
    for (std::size_t i = 0; i < m_; ++i) {
      const double sign = flipped_[i] ? -1.0 : 1.0;
      double* r = row(i);
      for (const auto& [j, c] : lp.rows[i].terms) r[j] += sign * c;
      r[cols_] = sign * lp.rows[i].rhs;
      switch (sense[i]) {
        case RowSense::kLessEqual:
          r[next_extra] = 1.0;
          basis_[i] = row_origin_col_[i] = next_extra++;
          break;
        case RowSense::kGreaterEqual:
          r[next_extra++] = -1.0;
          r[next_art] = 1.0;
          basis_[i] = row_origin_col_[i] = next_art++;
          break;
        case RowSense::kEqual:
          r[next_art] = 1.0;
          basis_[i] = row_origin_col_[i] = next_art++;
          break;
      }
    }
    d_.assign(width_, 0.0);
    nz_.reserve(width_);
  }

  // Phase 1: maximize -sum(artificials). Returns false if infeasible.
  LpStatus phase_one(std::size_t& iterations) {
    std::vector<double> cost(cols_, 0.0);
    for (std::size_t j = first_art_; j < cols_; ++j) cost[j] = -1.0;
    price(cost);
    const LpStatus st = iterate(cols_, iterations);
    if (st != LpStatus::kOptimal) return st;
    if (d_[cols_] < -opt_.feasibility_tol * std::max<double>(1.0, static_cast<double>(m_)))
      return LpStatus::kInfeasible;
    // Drive artificials that remain basic at zero out of the basis. Rows with
    // no structural or slack entry are redundant and stay inert.
    for (std::size_t i = 0; i < m_; ++i) {
      if (basis_[i] < first_art_) continue;
      const double* r = row(i);
      std::size_t best = cols_;
      double best_abs = opt_.pivot_tol;
      for (std::size_t j = 0; j < first_art_; ++j) {
        if (std::abs(r[j]) > best_abs) {
          best_abs = std::abs(r[j]);
          best = j;
        }
      }
      if (best != cols_) pivot(i, best);
    }
    return LpStatus::kOptimal;
  }

  LpStatus phase_two(const std::vector<double>& objective, std::size_t& iterations) {
    std::vector<double> cost(cols_, 0.0);
    std::copy(objective.begin(), objective.end(), cost.begin());
    price(cost);
    return iterate(first_art_, iterations);
  }

  std::vector<double> solution() const {
    std::vector<double> x(n_, 0.0);
    for (std::size_t i = 0; i < m_; ++i)
      if (basis_[i] < n_) x[basis_[i]] = std::max(0.0, row(i)[cols_]);
    return x;
  }

  std::vector<double> duals() const {
    std::vector<double> y(m_);
    for (std::size_t i = 0; i < m_; ++i) {
      const double v = d_[row_origin_col_[i]];
      y[i] = flipped_[i] ? -v : v;
    }
    return y;
  }

 private:
  double* row(std::size_t i) { return t_.data() + i * width_; }
  const double* row(std::size_t i) const { return t_.data() + i * width_; }

  void price(const std::vector<double>& cost) {
    for (std::size_t j = 0; j < width_; ++j) d_[j] = j < cols_ ? -cost[j] : 0.0;
    for (std::size_t i = 0; i < m_; ++i) {
      const double cb = cost[basis_[i]];
      if (cb == 0.0) continue;
      const double* r = row(i);
      for (std::size_t j = 0; j < width_; ++j) d_[j] += cb * r[j];
    }
  }

  // Columns >= limit never enter.
  LpStatus iterate(std::size_t limit, std::size_t& iterations) {
    std::size_t degenerate_run = 0;
    while (true) {
      if (iterations >= opt_.max_iterations) return LpStatus::kNumericalFailure;
      const bool bland = degenerate_run >= opt_.degenerate_switch;
      std::size_t enter = cols_;
      double best = -opt_.optimality_tol;
      for (std::size_t j = 0; j < limit; ++j) {
        if (d_[j] < best) {
          enter = j;
          if (bland) break;
          best = d_[j];
        }
      }
      if (enter == cols_) return LpStatus::kOptimal;

      std::size_t leave = m_;
      double best_ratio = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < m_; ++i) {
        const double* r = row(i);
        const double a = r[enter];
        if (a <= opt_.pivot_tol) continue;
        const double ratio = std::max(0.0, r[cols_]) / a;
        if (leave == m_ || ratio < best_ratio - 1e-12) {
          leave = i;
          best_ratio = ratio;
        } else if (ratio <= best_ratio + 1e-12) {
          const bool take = bland ? basis_[i] < basis_[leave] : a > row(leave)[enter];
          if (take) {
            leave = i;
            best_ratio = std::min(best_ratio, ratio);
          }
        }
      }
      if (leave == m_) return LpStatus::kUnbounded;
      degenerate_run = best_ratio <= 1e-12 ? degenerate_run + 1 : 0;
      pivot(leave, enter);
      ++iterations;
    }
  }

  void pivot(std::size_t r, std::size_t e) {
    double* pr = row(r);
    const double inv = 1.0 / pr[e];
    nz_.clear();
    for (std::size_t j = 0; j < width_; ++j) {
      if (pr[j] != 0.0) {
        pr[j] *= inv;
        nz_.push_back(j);
      }
    }
    pr[e] = 1.0;
    for (std::size_t i = 0; i < m_; ++i) {
      if (i == r) continue;
      double* ri = row(i);
      const double factor = ri[e];
      if (factor == 0.0) continue;
      for (std::size_t j : nz_) ri[j] -= factor * pr[j];
      ri[e] = 0.0;
    }
    const double factor = d_[e];
    if (factor != 0.0) {
      for (std::size_t j : nz_) d_[j] -= factor * pr[j];
      d_[e] = 0.0;
    }
    basis_[r] = e;
  }

  const SimplexOptions& opt_;
  std::size_t n_ = 0, m_ = 0, first_art_ = 0, cols_ = 0, width_ = 0;
  std::vector<double> t_;
  std::vector<double> d_;  // reduced costs; d_[cols_] is the objective value
  std::vector<std::size_t> basis_;
  std::vector<std::size_t> row_origin_col_;
  std::vector<bool> flipped_;
  std::vector<std::size_t> nz_;
};

}  // namespace

LpResult DenseSimplex::solve(const LinearProgram& lp) const {
  if (lp.objective.size() != lp.num_vars)
    throw std::invalid_argument("DenseSimplex: objective size does not match num_vars");
  for (const auto& r : lp.rows)
    for (const auto& term : r.terms)
      if (term.first >= lp.num_vars)
        throw std::invalid_argument("DenseSimplex: row references unknown variable");

  LpResult result;
  Tableau tab(lp, options_);
  result.status = tab.phase_one(result.iterations);
  if (result.status != LpStatus::kOptimal) return result;
  result.status = tab.phase_two(lp.objective, result.iterations);
  if (result.status != LpStatus::kOptimal) return result;

  result.x = tab.solution();
  result.duals = tab.duals();
  result.objective = lp.evaluate(result.x);
  result.primal_residual = lp.primal_residual(result.x);
  if (result.primal_residual > options_.residual_tol) result.status = LpStatus::kNumericalFailure;
  return result;
}

}  // namespace allocsim
