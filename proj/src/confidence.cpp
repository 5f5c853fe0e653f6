#include "allocsim/confidence.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace allocsim {
namespace {

Table4 transition_table(const MdpShape& sh) {
  return Table4({sh.horizon - 1, sh.num_states, sh.num_actions, sh.num_states});
}

double guarded(std::int64_t n) { return static_cast<double>(std::max<std::int64_t>(1, n)); }

}  // namespace

VisitCounters::VisitCounters(const MdpShape& sh)
    : shape(sh),
      visits({sh.horizon - 1, sh.num_states, sh.num_actions}, 0),
      transitions({sh.horizon - 1, sh.num_states, sh.num_actions, sh.num_states}, 0) {}

void VisitCounters::observe(std::size_t h, std::size_t s, std::size_t a, std::size_t next) {
  visits(h, s, a) += 1;
  transitions(h, s, a, next) += 1;
}

bool VisitCounters::consistent() const {
  for (std::size_t h = 0; h < visits.dim(0); ++h)
    for (std::size_t s = 0; s < visits.dim(1); ++s)
      for (std::size_t a = 0; a < visits.dim(2); ++a) {
        std::int64_t sum = 0;
        for (auto m : transitions.row(h, s, a)) {
          if (m < 0) return false;
          sum += m;
        }
        if (sum != visits(h, s, a) || visits(h, s, a) < 0) return false;
      }
  return true;
}

VisitCounters update_counters(VisitCounters counters, const Trajectory& traj) {
  for (std::size_t h = 0; h < traj.steps.size(); ++h) {
    const auto& st = traj.steps[h];
    if (st.next_state) counters.observe(h, st.state, st.action, *st.next_state);
  }
  return counters;
}

double confidence_log_term(const MdpShape& shape, std::size_t num_episodes, double delta,
                           LogArgument arg) {
  if (!(delta > 0.0 && delta < 1.0))
    throw std::invalid_argument("confidence: delta must lie in (0, 1)");
  double count = static_cast<double>(shape.horizon) * static_cast<double>(shape.num_states) *
                 static_cast<double>(shape.num_actions) * static_cast<double>(num_episodes);
  if (arg == LogArgument::kHS2AT) count *= static_cast<double>(shape.num_states);
  return std::log(count / delta);
}

Table4 empirical_kernel(const VisitCounters& counters) {
  Table4 pbar = transition_table(counters.shape);
  const auto& N = counters.visits;
  for (std::size_t h = 0; h < N.dim(0); ++h)
    for (std::size_t s = 0; s < N.dim(1); ++s)
      for (std::size_t a = 0; a < N.dim(2); ++a) {
        const double denom = guarded(N(h, s, a));
        const auto m = counters.transitions.row(h, s, a);
        auto out = pbar.row(h, s, a);
        for (std::size_t sp = 0; sp < m.size(); ++sp) out[sp] = static_cast<double>(m[sp]) / denom;
      }
  return pbar;
}

Table4 confidence_radius(const VisitCounters& counters, const Table4& pbar, double delta,
                         std::size_t S, std::size_t A, std::size_t H, std::size_t T,
                         LogArgument arg) {
  const double L = confidence_log_term(MdpShape{S, A, H, 0}, T, delta, arg);
  Table4 eps(pbar.dims());
  const auto& N = counters.visits;
  for (std::size_t h = 0; h < N.dim(0); ++h)
    for (std::size_t s = 0; s < N.dim(1); ++s)
      for (std::size_t a = 0; a < N.dim(2); ++a) {
        const double n = guarded(N(h, s, a) - 1);
        const auto p = pbar.row(h, s, a);
        auto out = eps.row(h, s, a);
        for (std::size_t sp = 0; sp < p.size(); ++sp)
          out[sp] = 2.0 * std::sqrt(p[sp] * L / n) + 14.0 * L / (3.0 * n);
      }
  return eps;
}

ConfidenceSet build_confidence_set(const VisitCounters& counters, double delta,
                                   std::size_t num_episodes, LogArgument arg) {
  const auto& sh = counters.shape;
  ConfidenceSet set;
  set.shape = sh;
  set.pbar = empirical_kernel(counters);
  set.visits = counters.visits;
  set.eps = confidence_radius(counters, set.pbar, delta, sh.num_states, sh.num_actions,
                              sh.horizon, num_episodes, arg);
  set.delta = delta;
  return set;
}

ConfidenceSet exact_confidence_set(const TransitionKernel& kernel) {
  ConfidenceSet set;
  set.shape = kernel.shape;
  set.pbar = kernel.trans;
  set.eps = Table4(kernel.trans.dims(), 0.0);
  set.visits = Tensor<std::int64_t, 3>(
      {kernel.trans.dim(0), kernel.trans.dim(1), kernel.trans.dim(2)}, 0);
  return set;
}

bool contains(const ConfidenceSet& set, const TransitionKernel& kernel) {
  if (kernel.trans.dims() != set.pbar.dims()) return false;
  for (std::size_t i = 0; i < set.pbar.size(); ++i) {
    if (std::abs(kernel.trans.flat()[i] - set.pbar.flat()[i]) > set.eps.flat()[i]) return false;
  }
  return true;
}

Table4 star_radius(const VisitCounters& counters, const TransitionKernel& kernel, double delta,
                   std::size_t S, std::size_t A, std::size_t H, std::size_t T, LogArgument arg) {
  const double L = confidence_log_term(MdpShape{S, A, H, 0}, T, delta, arg);
  Table4 eps(kernel.trans.dims());
  const auto& N = counters.visits;
  for (std::size_t h = 0; h < N.dim(0); ++h)
    for (std::size_t s = 0; s < N.dim(1); ++s)
      for (std::size_t a = 0; a < N.dim(2); ++a) {
        const double n = guarded(N(h, s, a));
        const auto p = kernel.trans.row(h, s, a);
        auto out = eps.row(h, s, a);
        for (std::size_t sp = 0; sp < p.size(); ++sp)
          out[sp] = 6.0 * std::sqrt(p[sp] * L / n) + 94.0 * L / n;
      }
  return eps;
}

}  // namespace allocsim
