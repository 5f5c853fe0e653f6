#include "allocsim/mdp.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace allocsim {
namespace {

void require(bool cond, const std::string& what) {
  if (!cond) throw std::invalid_argument(what);
}

const MdpShape& checked(const MdpShape& shape) {
  shape.validate();
  return shape;
}

bool same_dims(const TransitionKernel& kernel, const Table3& table) {
  const auto& s = kernel.shape;
  return table.dim(0) == s.horizon && table.dim(1) == s.num_states && table.dim(2) == s.num_actions;
}

// State marginals d(h, s) under (P, pi) started from `start` at step `first`.
Table2 state_marginals(const TransitionKernel& kernel, const Policy& policy,
                       const std::vector<double>& start, std::size_t first) {
  const auto& sh = kernel.shape;
  Table2 d({sh.horizon, sh.num_states});
  for (std::size_t s = 0; s < sh.num_states; ++s) d(first, s) = start[s];
  for (std::size_t h = first; h + 1 < sh.horizon; ++h) {
    for (std::size_t s = 0; s < sh.num_states; ++s) {
      const double mass = d(h, s);
      if (mass == 0.0) continue;
      for (std::size_t a = 0; a < sh.num_actions; ++a) {
        const double w = mass * policy.pi(h, s, a);
        if (w == 0.0) continue;
        const auto next = kernel.trans.row(h, s, a);
        for (std::size_t sp = 0; sp < sh.num_states; ++sp) d(h + 1, sp) += w * next[sp];
      }
    }
  }
  return d;
}

}  // namespace

void MdpShape::validate() const {
  require(num_states >= 1, "MdpShape: need at least one state");
  require(num_actions >= 2, "MdpShape: need the star action plus one real action");
  require(horizon >= 1, "MdpShape: horizon must be positive");
  require(star_action < num_actions, "MdpShape: star_action out of range");
}

TransitionKernel::TransitionKernel(const MdpShape& sh)
    : shape(checked(sh)),
      trans({sh.horizon - 1, sh.num_states, sh.num_actions, sh.num_states}),
      init(sh.num_states, 0.0) {}

void TransitionKernel::validate(double tol) const {
  shape.validate();
  require(init.size() == shape.num_states, "TransitionKernel: init has wrong size");
  require(trans.dim(0) == shape.horizon - 1 && trans.dim(1) == shape.num_states &&
              trans.dim(2) == shape.num_actions && trans.dim(3) == shape.num_states,
          "TransitionKernel: trans has wrong dimensions");
  double total = 0.0;
  for (double p : init) {
    require(p >= 0.0 && p <= 1.0, "TransitionKernel: init entry outside [0,1]");
    total += p;
  }
  require(std::abs(total - 1.0) <= tol, "TransitionKernel: init does not sum to 1");
  for (std::size_t h = 0; h < trans.dim(0); ++h) {
    for (std::size_t s = 0; s < shape.num_states; ++s) {
      for (std::size_t a = 0; a < shape.num_actions; ++a) {
        double row_sum = 0.0;
        for (double p : trans.row(h, s, a)) {
          require(p >= 0.0 && p <= 1.0, "TransitionKernel: entry outside [0,1]");
          row_sum += p;
        }
        require(std::abs(row_sum - 1.0) <= tol,
                "TransitionKernel: row (h=" + std::to_string(h) + ", s=" + std::to_string(s) +
                    ", a=" + std::to_string(a) + ") does not sum to 1");
      }
    }
  }
}

Policy::Policy(const MdpShape& sh) : pi({sh.horizon, sh.num_states, sh.num_actions}) {}

Policy Policy::constant(const MdpShape& shape, std::size_t action) {
  Policy p(shape);
  for (std::size_t h = 0; h < shape.horizon; ++h)
    for (std::size_t s = 0; s < shape.num_states; ++s) p.pi(h, s, action) = 1.0;
  return p;
}

void Policy::validate(double tol) const {
  for (std::size_t h = 0; h < pi.dim(0); ++h) {
    for (std::size_t s = 0; s < pi.dim(1); ++s) {
      double row_sum = 0.0;
      for (double p : pi.row(h, s)) {
        require(p >= 0.0 && p <= 1.0, "Policy: entry outside [0,1]");
        row_sum += p;
      }
      require(std::abs(row_sum - 1.0) <= tol, "Policy: row does not sum to 1");
    }
  }
}

OccupancyMeasure::OccupancyMeasure(const MdpShape& sh)
    : q({sh.horizon, sh.num_states, sh.num_actions}) {}

ExtendedOccupancy::ExtendedOccupancy(const MdpShape& sh)
    : qbar({sh.horizon, sh.num_states, sh.num_actions, sh.num_states}) {}

EpisodeFunctions::EpisodeFunctions(const MdpShape& sh)
    : f({sh.horizon, sh.num_states, sh.num_actions}), g({sh.horizon, sh.num_states, sh.num_actions}) {}

void EpisodeFunctions::validate(const MdpShape& shape) const {
  const Table3::Dims expected{shape.horizon, shape.num_states, shape.num_actions};
  require(f.dims() == expected && g.dims() == expected, "EpisodeFunctions: wrong dimensions");
  for (std::size_t i = 0; i < f.size(); ++i) {
    require(f.flat()[i] >= 0.0 && f.flat()[i] <= 1.0, "EpisodeFunctions: reward outside [0,1]");
    require(g.flat()[i] >= 0.0 && g.flat()[i] <= 1.0,
            "EpisodeFunctions: consumption outside [0,1]");
  }
  for (std::size_t h = 0; h < shape.horizon; ++h) {
    for (std::size_t s = 0; s < shape.num_states; ++s) {
      require(f(h, s, shape.star_action) == 0.0 && g(h, s, shape.star_action) == 0.0,
              "EpisodeFunctions: star action must have zero reward and consumption");
    }
  }
}

double Trajectory::total_reward() const {
  double total = 0.0;
  for (const auto& st : steps) total += st.reward;
  return total;
}

double Trajectory::total_consumption() const {
  double total = 0.0;
  for (const auto& st : steps) total += st.consumption;
  return total;
}

ExtendedOccupancy occupancy_from_policy(const TransitionKernel& kernel, const Policy& policy) {
  const auto& sh = kernel.shape;
  require(policy.pi.dims() == Table3::Dims{sh.horizon, sh.num_states, sh.num_actions},
          "occupancy_from_policy: policy shape does not match kernel");
  require(kernel.init.size() == sh.num_states, "occupancy_from_policy: init has wrong size");

  const Table2 d = state_marginals(kernel, policy, kernel.init, 0);
  ExtendedOccupancy ext(sh);
  for (std::size_t h = 0; h < sh.horizon; ++h) {
    const bool last = h + 1 == sh.horizon;
    for (std::size_t s = 0; s < sh.num_states; ++s) {
      for (std::size_t a = 0; a < sh.num_actions; ++a) {
        const double w = d(h, s) * policy.pi(h, s, a);
        auto out = ext.qbar.row(h, s, a);
        if (last) {
          for (std::size_t sp = 0; sp < sh.num_states; ++sp) out[sp] = w * kernel.init[sp];
        } else {
          const auto next = kernel.trans.row(h, s, a);
          for (std::size_t sp = 0; sp < sh.num_states; ++sp) out[sp] = w * next[sp];
        }
      }
    }
  }
  return ext;
}

OccupancyMeasure marginal(const ExtendedOccupancy& ext) {
  const auto& qb = ext.qbar;
  OccupancyMeasure occ;
  occ.q = Table3({qb.dim(0), qb.dim(1), qb.dim(2)});
  for (std::size_t h = 0; h < qb.dim(0); ++h)
    for (std::size_t s = 0; s < qb.dim(1); ++s)
      for (std::size_t a = 0; a < qb.dim(2); ++a) {
        double sum = 0.0;
        for (double v : qb.row(h, s, a)) sum += v;
        occ.q(h, s, a) = sum;
      }
  return occ;
}

Policy policy_from_occupancy(const OccupancyMeasure& occ, std::size_t star_action) {
  const auto& q = occ.q;
  require(star_action < q.dim(2), "policy_from_occupancy: star_action out of range");
  for (double v : q.flat()) require(v >= 0.0, "policy_from_occupancy: negative occupancy entry");

  Policy policy;
  policy.pi = Table3(q.dims());
  for (std::size_t h = 0; h < q.dim(0); ++h) {
    for (std::size_t s = 0; s < q.dim(1); ++s) {
      const auto row = q.row(h, s);
      double denom = 0.0;
      for (double v : row) denom += v;
      auto out = policy.pi.row(h, s);
      if (denom > 0.0) {
        for (std::size_t a = 0; a < row.size(); ++a) out[a] = row[a] / denom;
      } else {
        out[star_action] = 1.0;
      }
    }
  }
  return policy;
}

TransitionKernel kernel_from_extended(const ExtendedOccupancy& ext, std::size_t star_action) {
  const auto& qb = ext.qbar;
  const MdpShape sh{qb.dim(1), qb.dim(2), qb.dim(0), star_action};
  TransitionKernel kernel(sh);
  const double uniform = 1.0 / static_cast<double>(sh.num_states);
  for (std::size_t h = 0; h + 1 < sh.horizon; ++h) {
    for (std::size_t s = 0; s < sh.num_states; ++s) {
      for (std::size_t a = 0; a < sh.num_actions; ++a) {
        const auto row = qb.row(h, s, a);
        double denom = 0.0;
        for (double v : row) denom += std::max(v, 0.0);
        auto out = kernel.trans.row(h, s, a);
        for (std::size_t sp = 0; sp < sh.num_states; ++sp)
          out[sp] = denom > 0.0 ? std::max(row[sp], 0.0) / denom : uniform;
      }
    }
  }
  double total = 0.0;
  for (std::size_t s = 0; s < sh.num_states; ++s) {
    double mass = 0.0;
    for (std::size_t a = 0; a < sh.num_actions; ++a)
      for (double v : qb.row(0, s, a)) mass += std::max(v, 0.0);
    kernel.init[s] = mass;
    total += mass;
  }
  for (auto& p : kernel.init) p = total > 0.0 ? p / total : uniform;
  return kernel;
}

std::string to_string(OccupancyViolation::Kind kind) {
  switch (kind) {
    case OccupancyViolation::Kind::kNegative: return "negative";
    case OccupancyViolation::Kind::kTotalMass: return "total-mass";
    case OccupancyViolation::Kind::kFlow: return "flow";
  }
  return "unknown";
}

std::vector<OccupancyViolation> validate_occupancy(const ExtendedOccupancy& ext, double tol) {
  const auto& qb = ext.qbar;
  const std::size_t H = qb.dim(0), S = qb.dim(1), A = qb.dim(2);
  std::vector<OccupancyViolation> out;
  if (qb.dim(3) != S) {
    out.push_back({OccupancyViolation::Kind::kTotalMass, 0, 0, 1.0});
    return out;
  }
  for (std::size_t h = 0; h < H; ++h) {
    double total = 0.0;
    for (std::size_t s = 0; s < S; ++s) {
      for (std::size_t a = 0; a < A; ++a) {
        for (double v : qb.row(h, s, a)) {
          total += v;
          if (v < -tol) out.push_back({OccupancyViolation::Kind::kNegative, h, s, v});
        }
      }
    }
    if (std::abs(total - 1.0) > tol)
      out.push_back({OccupancyViolation::Kind::kTotalMass, h, 0, total - 1.0});
  }
  for (std::size_t h = 1; h < H; ++h) {
    for (std::size_t s = 0; s < S; ++s) {
      double outflow = 0.0, inflow = 0.0;
      for (std::size_t a = 0; a < A; ++a)
        for (double v : qb.row(h, s, a)) outflow += v;
      for (std::size_t sp = 0; sp < S; ++sp)
        for (std::size_t a = 0; a < A; ++a) inflow += qb(h - 1, sp, a, s);
      if (std::abs(outflow - inflow) > tol)
        out.push_back({OccupancyViolation::Kind::kFlow, h, s, outflow - inflow});
    }
  }
  return out;
}

Trajectory sample_episode(const TransitionKernel& kernel, const Policy& policy,
                          const EpisodeFunctions& fg, Rng& rng) {
  const auto& sh = kernel.shape;
  Trajectory traj;
  traj.visits = Table3({sh.horizon, sh.num_states, sh.num_actions});
  traj.steps.reserve(sh.horizon);
  std::size_t s = rng.categorical(kernel.init);
  for (std::size_t h = 0; h < sh.horizon; ++h) {
    Step st;
    st.state = s;
    st.action = rng.categorical(policy.pi.row(h, s));
    st.reward = fg.f(h, s, st.action);
    st.consumption = fg.g(h, s, st.action);
    traj.visits(h, s, st.action) = 1.0;
    if (h + 1 < sh.horizon) {
      st.next_state = rng.categorical(kernel.trans.row(h, s, st.action));
      s = *st.next_state;
    }
    traj.steps.push_back(st);
  }
  return traj;
}

Trajectory sample_episode(const TransitionKernel& kernel, const Policy& policy,
                          const EpisodeFunctions& fg, std::uint64_t seed) {
  Rng rng(seed);
  return sample_episode(kernel, policy, fg, rng);
}

Table2 reward_to_go(const TransitionKernel& kernel, const Policy& policy, const Table3& reward) {
  const auto& sh = kernel.shape;
  require(same_dims(kernel, reward), "reward_to_go: reward table has wrong dimensions");
  Table2 J({sh.horizon + 1, sh.num_states});
  for (std::size_t h = sh.horizon; h-- > 0;) {
    for (std::size_t s = 0; s < sh.num_states; ++s) {
      double value = 0.0;
      for (std::size_t a = 0; a < sh.num_actions; ++a) {
        const double p = policy.pi(h, s, a);
        if (p == 0.0) continue;
        double q = reward(h, s, a);
        if (h + 1 < sh.horizon) {
          const auto next = kernel.trans.row(h, s, a);
          for (std::size_t sp = 0; sp < sh.num_states; ++sp) q += next[sp] * J(h + 1, sp);
        }
        value += p * q;
      }
      J(h, s) = value;
    }
  }
  return J;
}

Table3 state_action_value(const TransitionKernel& kernel, const Policy& policy,
                          const Table3& reward) {
  const auto& sh = kernel.shape;
  const Table2 J = reward_to_go(kernel, policy, reward);
  Table3 Q({sh.horizon, sh.num_states, sh.num_actions});
  for (std::size_t h = 0; h < sh.horizon; ++h) {
    for (std::size_t s = 0; s < sh.num_states; ++s) {
      for (std::size_t a = 0; a < sh.num_actions; ++a) {
        double q = reward(h, s, a);
        if (h + 1 < sh.horizon) {
          const auto next = kernel.trans.row(h, s, a);
          for (std::size_t sp = 0; sp < sh.num_states; ++sp) q += next[sp] * J(h + 1, sp);
        }
        Q(h, s, a) = q;
      }
    }
  }
  return Q;
}

double inner(const OccupancyMeasure& occ, const Table3& table) {
  require(occ.q.dims() == table.dims(), "inner: dimension mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < table.size(); ++i) sum += occ.q.flat()[i] * table.flat()[i];
  return sum;
}

OccupancyMeasure conditional_occupancy(const TransitionKernel& kernel, const Policy& policy,
                                       std::size_t start_state, std::size_t start_step) {
  const auto& sh = kernel.shape;
  require(start_state < sh.num_states && start_step < sh.horizon,
          "conditional_occupancy: start out of range");
  std::vector<double> start(sh.num_states, 0.0);
  start[start_state] = 1.0;
  const Table2 d = state_marginals(kernel, policy, start, start_step);
  OccupancyMeasure occ(sh);
  for (std::size_t h = start_step; h < sh.horizon; ++h)
    for (std::size_t s = 0; s < sh.num_states; ++s)
      for (std::size_t a = 0; a < sh.num_actions; ++a) occ.q(h, s, a) = d(h, s) * policy.pi(h, s, a);
  return occ;
}

}  // namespace allocsim
