#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "allocsim/random.hpp"
#include "allocsim/tensor.hpp"

namespace allocsim {

// Steps are 0-based in code: h = 0 is the first step of an episode and
// h = H-1 the last one.

struct MdpShape {
  std::size_t num_states = 0;
  std::size_t num_actions = 0;
  std::size_t horizon = 0;
  std::size_t star_action = 0;  // zero reward, zero consumption everywhere

  // Throws std::invalid_argument unless S >= 1, A >= 2, H >= 1, star < A.
  void validate() const;

  bool operator==(const MdpShape&) const = default;
};

// Per-step transition probabilities trans(h, s, a, s') for h < H-1, plus the
// initial state distribution kept separately.
struct TransitionKernel {
  MdpShape shape;
  Table4 trans;  // (H-1) x S x A x S
  std::vector<double> init;

  TransitionKernel() = default;
  explicit TransitionKernel(const MdpShape& shape);

  std::size_t num_transition_steps() const { return shape.horizon - 1; }

  // Throws std::invalid_argument on wrong sizes, entries outside [0, 1] or
  // rows not summing to one within tol.
  void validate(double tol = 1e-12) const;
};

struct Policy {
  Table3 pi;  // H x S x A

  Policy() = default;
  explicit Policy(const MdpShape& shape);

  // Deterministic policy playing `action` everywhere.
  static Policy constant(const MdpShape& shape, std::size_t action);

  void validate(double tol = 1e-12) const;

  bool operator==(const Policy&) const = default;
};

struct OccupancyMeasure {
  Table3 q;  // H x S x A

  OccupancyMeasure() = default;
  explicit OccupancyMeasure(const MdpShape& shape);
};

// qbar(h, s, a, s'). At the last step the s' slot carries init(s'), so the
// per-step total mass is one at every h.
struct ExtendedOccupancy {
  Table4 qbar;  // H x S x A x S

  ExtendedOccupancy() = default;
  explicit ExtendedOccupancy(const MdpShape& shape);
};

struct EpisodeFunctions {
  Table3 f;  // reward, H x S x A
  Table3 g;  // consumption, H x S x A

  EpisodeFunctions() = default;
  explicit EpisodeFunctions(const MdpShape& shape);

  // Range [0, 1] and zero reward/consumption at the star action.
  void validate(const MdpShape& shape) const;
};

struct Step {
  std::size_t state = 0;
  std::size_t action = 0;
  double reward = 0.0;
  double consumption = 0.0;
  std::optional<std::size_t> next_state;  // absent at the last step
};

struct Trajectory {
  std::vector<Step> steps;
  Table3 visits;  // n(h, s, a) in {0, 1}

  double total_reward() const;
  double total_consumption() const;
};

// Forward recursion for qbar under (P, pi).
ExtendedOccupancy occupancy_from_policy(const TransitionKernel& kernel, const Policy& policy);

OccupancyMeasure marginal(const ExtendedOccupancy& ext);

// Normalized rows of q; rows with zero mass play the star action.
// Throws std::invalid_argument on negative entries.
Policy policy_from_occupancy(const OccupancyMeasure& occ, std::size_t star_action);

// Normalized rows of qbar for h < H-1. Rows with zero mass become uniform.
// init is read off the step-0 state marginal (uniform if that is empty).
TransitionKernel kernel_from_extended(const ExtendedOccupancy& ext, std::size_t star_action);

struct OccupancyViolation {
  enum class Kind { kNegative, kTotalMass, kFlow };
  Kind kind;
  std::size_t step;
  std::size_t state;  // unused for kTotalMass
  double residual;
};

std::string to_string(OccupancyViolation::Kind kind);

// Empty iff total mass per step (C1) and flow conservation (C2) hold within
// tol and no entry is below -tol. Never throws.
std::vector<OccupancyViolation> validate_occupancy(const ExtendedOccupancy& ext, double tol);

Trajectory sample_episode(const TransitionKernel& kernel, const Policy& policy,
                          const EpisodeFunctions& fg, Rng& rng);
Trajectory sample_episode(const TransitionKernel& kernel, const Policy& policy,
                          const EpisodeFunctions& fg, std::uint64_t seed);

// J(h, s) for h = 0..H; J(H, .) = 0.
Table2 reward_to_go(const TransitionKernel& kernel, const Policy& policy, const Table3& reward);

// Q(h, s, a) = f(h, s, a) + sum_s' P(s'|s,a,h) J(h+1, s').
Table3 state_action_value(const TransitionKernel& kernel, const Policy& policy,
                          const Table3& reward);

// sum_{h,s,a} q(h,s,a) table(h,s,a).
double inner(const OccupancyMeasure& occ, const Table3& table);

// q(s, a, h | s_m = start_state) with the recursion restarted at step
// start_step. Entries before start_step are zero.
OccupancyMeasure conditional_occupancy(const TransitionKernel& kernel, const Policy& policy,
                                       std::size_t start_state, std::size_t start_step);

}  // namespace allocsim
