#pragma once

#include <cstddef>
#include <cstdint>

#include "allocsim/mdp.hpp"
#include "allocsim/tensor.hpp"

namespace allocsim {

// Transition counts over the steps that have a successor (h < H-1). The last
// step of an episode never contributes an observation.
struct VisitCounters {
  MdpShape shape;
  Tensor<std::int64_t, 3> visits;       // N(h, s, a), (H-1) x S x A
  Tensor<std::int64_t, 4> transitions;  // M(h, s, a, s')

  VisitCounters() = default;
  explicit VisitCounters(const MdpShape& shape);

  void observe(std::size_t h, std::size_t s, std::size_t a, std::size_t next);

  // True when sum_s' M = N for every (h, s, a) and all entries are >= 0.
  bool consistent() const;

  bool operator==(const VisitCounters&) const = default;
};

// Adds every step of `traj` that carries an observed next state.
VisitCounters update_counters(VisitCounters counters, const Trajectory& traj);

// What goes inside the logarithm of the confidence radius.
enum class LogArgument {
  kHSAT,   // ln(H S A T / delta), the default
  kHS2AT,  // ln(H S^2 A T / delta)
};

double confidence_log_term(const MdpShape& shape, std::size_t num_episodes, double delta,
                           LogArgument arg = LogArgument::kHSAT);

// M / max(1, N).
Table4 empirical_kernel(const VisitCounters& counters);

// 2 sqrt(pbar L / max(1, N-1)) + 14 L / (3 max(1, N-1)) with L = ln(HSAT/delta).
// Throws std::invalid_argument unless delta is in (0, 1).
Table4 confidence_radius(const VisitCounters& counters, const Table4& pbar, double delta,
                         std::size_t S, std::size_t A, std::size_t H, std::size_t T,
                         LogArgument arg = LogArgument::kHSAT);

struct ConfidenceSet {
  MdpShape shape;
  Table4 pbar;  // (H-1) x S x A x S
  Tensor<std::int64_t, 3> visits;
  Table4 eps;
  double delta = 0.0;

  double lower(std::size_t h, std::size_t s, std::size_t a, std::size_t sp) const {
    return pbar(h, s, a, sp) - eps(h, s, a, sp);
  }
  double upper(std::size_t h, std::size_t s, std::size_t a, std::size_t sp) const {
    return pbar(h, s, a, sp) + eps(h, s, a, sp);
  }
};

ConfidenceSet build_confidence_set(const VisitCounters& counters, double delta,
                                   std::size_t num_episodes,
                                   LogArgument arg = LogArgument::kHSAT);

// Degenerate set pinned to a known kernel (pbar = P, eps = 0).
ConfidenceSet exact_confidence_set(const TransitionKernel& kernel);

// |P - pbar| <= eps on every transition entry. The initial distribution is
// not part of the set.
bool contains(const ConfidenceSet& set, const TransitionKernel& kernel);

// 6 sqrt(P L / max(1, N)) + 94 L / max(1, N): the distance bound between the
// true kernel and any member of the set.
Table4 star_radius(const VisitCounters& counters, const TransitionKernel& kernel, double delta,
                   std::size_t S, std::size_t A, std::size_t H, std::size_t T,
                   LogArgument arg = LogArgument::kHSAT);

}  // namespace allocsim
