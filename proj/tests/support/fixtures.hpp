#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "allocsim/confidence.hpp"
#include "allocsim/mdp.hpp"
#include "allocsim/random.hpp"

namespace fixtures {

using namespace allocsim;

inline void random_simplex(std::span<double> row, std::mt19937_64& gen, double zero_prob = 0.0) {
  std::exponential_distribution<double> e(1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double total = 0.0;
  for (double& x : row) total += (x = (u(gen) < zero_prob) ? 0.0 : e(gen));
  if (total == 0.0) {
    row[std::uniform_int_distribution<std::size_t>(0, row.size() - 1)(gen)] = 1.0;
    return;
  }
  for (double& x : row) x /= total;
}

inline TransitionKernel random_kernel(const MdpShape& sh, std::mt19937_64& gen, double zero_prob = 0.0) {
  TransitionKernel k(sh);
  random_simplex(k.init, gen, zero_prob);
  for (std::size_t h = 0; h + 1 < sh.horizon; ++h)
    for (std::size_t s = 0; s < sh.num_states; ++s)
      for (std::size_t a = 0; a < sh.num_actions; ++a) random_simplex(k.trans.row(h, s, a), gen, zero_prob);
  return k;
}

inline Policy random_policy(const MdpShape& sh, std::mt19937_64& gen, bool deterministic = false) {
  Policy p(sh);
  std::uniform_int_distribution<std::size_t> pick(0, sh.num_actions - 1);
  for (std::size_t h = 0; h < sh.horizon; ++h)
    for (std::size_t s = 0; s < sh.num_states; ++s) {
      if (deterministic) p.pi(h, s, pick(gen)) = 1.0;
      else random_simplex(p.pi.row(h, s), gen);
    }
  return p;
}

inline Table3 random_table(const MdpShape& sh, std::mt19937_64& gen, double lo = 0.0, double hi = 1.0) {
  Table3 t({sh.horizon, sh.num_states, sh.num_actions});
  std::uniform_real_distribution<double> u(lo, hi);
  for (double& x : t.flat()) x = u(gen);
  return t;
}

inline EpisodeFunctions random_episode(const MdpShape& sh, std::mt19937_64& gen) {
  EpisodeFunctions fg(sh);
  fg.f = random_table(sh, gen);
  fg.g = random_table(sh, gen);
  for (std::size_t h = 0; h < sh.horizon; ++h)
    for (std::size_t s = 0; s < sh.num_states; ++s) {
      fg.f(h, s, sh.star_action) = 0.0;
      fg.g(h, s, sh.star_action) = 0.0;
    }
  return fg;
}

// Counters after `episodes` trajectories of a uniform random policy.
inline VisitCounters simulated_counters(const TransitionKernel& k, std::size_t episodes, std::uint64_t seed) {
  const MdpShape& sh = k.shape;
  VisitCounters c(sh);
  Policy uniform(sh);
  for (double& x : uniform.pi.flat()) x = 1.0 / static_cast<double>(sh.num_actions);
  EpisodeFunctions fg(sh);
  Rng rng(seed);
  for (std::size_t n = 0; n < episodes; ++n) c = update_counters(std::move(c), sample_episode(k, uniform, fg, rng));
  return c;
}

// A kernel drawn from the box-and-simplex rows of `set`: start at the lower
// bounds, then hand the remaining mass out in random order and amounts. The
// box is shrunk by a few ulps so rounding cannot push an entry outside it.
inline TransitionKernel sample_kernel_in_box(const ConfidenceSet& set, const std::vector<double>& init,
                                             std::mt19937_64& gen) {
  const MdpShape& sh = set.shape;
  TransitionKernel k(sh);
  k.init = init;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t h = 0; h + 1 < sh.horizon; ++h)
    for (std::size_t s = 0; s < sh.num_states; ++s)
      for (std::size_t a = 0; a < sh.num_actions; ++a) {
        auto row = k.trans.row(h, s, a);
        std::vector<double> hi(sh.num_states);
        double room = 1.0;
        for (std::size_t sp = 0; sp < sh.num_states; ++sp) {
          constexpr double margin = 1e-13;
          row[sp] = std::max(0.0, set.lower(h, s, a, sp) + margin);
          hi[sp] = std::max(row[sp], std::min(1.0, set.upper(h, s, a, sp) - margin));
          room -= row[sp];
        }
        std::vector<std::size_t> order(sh.num_states);
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), gen);
        for (std::size_t sp : order) {
          const double add = std::min(hi[sp] - row[sp], room) * u(gen);
          row[sp] += add;
          room -= add;
        }
        for (std::size_t sp : order) {
          const double add = std::min(hi[sp] - row[sp], room);
          row[sp] += add;
          room -= add;
        }
      }
  return k;
}

}  // namespace fixtures
