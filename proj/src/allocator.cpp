#include "allocsim/allocator.hpp"

#include <algorithm>
#include <cmath>

#include "allocsim/occupancy_lp.hpp"

namespace allocsim {

BudgetState BudgetState::initial(double rho, std::size_t num_episodes, std::size_t horizon) {
  BudgetState b;
  b.rho = rho;
  b.num_episodes = num_episodes;
  b.horizon = horizon;
  b.remaining = b.total();
  return b;
}

double BudgetState::total() const {
  return static_cast<double>(num_episodes) * static_cast<double>(horizon) * rho;
}

RunRecord run(const TransitionKernel& kernel, EpisodeSource& source, const AllocatorConfig& config,
              const LpSolver& solver) {
  const MdpShape& sh = kernel.shape;
  kernel.validate(1e-9);
  if (!(config.rho > 0.0 && config.rho < 1.0))
    throw std::invalid_argument("run: rho must lie in (0, 1)");
  if (!(config.delta > 0.0 && config.delta < 1.0))
    throw std::invalid_argument("run: delta must lie in (0, 1)");
  const std::size_t T = source.size();
  if (T == 0) throw std::invalid_argument("run: episode source is empty");

  DualState dual;
  dual.ref = config.dual.ref;
  dual.lambda_min = config.dual.lambda_min;
  dual.eta = config.dual.eta ? *config.dual.eta
                             : default_step_size(config.rho, static_cast<double>(sh.horizon),
                                                 static_cast<double>(T));
  if (!(dual.eta > 0.0)) throw std::invalid_argument("run: step size must be positive");
  if (config.dual.initial_lambda < 0.0) throw std::invalid_argument("run: lambda_1 must be >= 0");
  dual.lambda = config.dual.initial_lambda;
  if (dual.ref == ReferenceFunction::kNegativeEntropy)
    dual.lambda = std::max(dual.lambda, dual.lambda_min);

  RunRecord rec;
  rec.shape = sh;
  rec.rho = config.rho;
  rec.delta = config.delta;
  rec.eta = dual.eta;
  rec.ref = dual.ref;
  rec.fixed_lambda = config.dual.fixed;
  rec.exact_kernel = config.exact_kernel;
  rec.seed = config.seed;
  rec.counters = VisitCounters(sh);
  rec.episodes.reserve(T);

  BudgetState budget = BudgetState::initial(config.rho, T, sh.horizon);
  rec.budget = budget.total();
  const double h_rho = static_cast<double>(sh.horizon) * config.rho;
  Rng rng(config.seed);

  for (std::size_t t = 0; t < T; ++t) {
    const EpisodeFunctions fg = source.next();
    fg.validate(sh);
    EpisodeRecord ep;
    ep.lambda = dual.lambda;

    if (rec.stop_episode) {
      ep.budget_remaining = budget.remaining;
      rec.episodes.push_back(std::move(ep));
      continue;
    }

    const ConfidenceSet set =
        config.exact_kernel
            ? exact_confidence_set(kernel)
            : build_confidence_set(rec.counters, config.delta, T, config.log_argument);
    ep.kernel_covered = contains(set, kernel);
    rec.kernel_always_covered = rec.kernel_always_covered && ep.kernel_covered;

    PenalizedArgmax plan;
    try {
      plan = argmax_penalized(set, kernel.init, fg, dual.lambda, solver);
    } catch (const LpFailure& e) {
      throw RunFailure("episode " + std::to_string(t) + ": " + e.what(), rec);
    }
    ep.active = true;
    ep.policy = policy_from_occupancy(plan.occupancy, sh.star_action);
    ep.lp_value = plan.solution.objective;
    ep.planned_reward = inner(plan.occupancy, fg.f);
    ep.planned_consumption = inner(plan.occupancy, fg.g);

    std::size_t s = rng.categorical(kernel.init);
    for (std::size_t h = 0; h < sh.horizon; ++h) {
      const std::size_t a = rng.categorical(ep.policy.pi.row(h, s));
      const double g = fg.g(h, s, a);
      ep.realized_reward += fg.f(h, s, a);
      ep.realized_consumption += g;
      budget.consume(g);
      if (budget.exhausted()) {
        rec.stop_episode = t;
        rec.stop_step = h;
        break;
      }
      if (h + 1 < sh.horizon) {
        const std::size_t next = rng.categorical(kernel.trans.row(h, s, a));
        rec.counters.observe(h, s, a, next);
        s = next;
      }
    }
    ep.budget_remaining = budget.remaining;
    rec.total_reward += ep.realized_reward;
    rec.total_consumption += ep.realized_consumption;

    if (!rec.stop_episode && !config.dual.fixed)
      dual = dual_update(dual, h_rho, ep.planned_consumption);
    rec.episodes.push_back(std::move(ep));
  }
  return rec;
}

RunRecord run(const TransitionKernel& kernel, EpisodeSource& source, const AllocatorConfig& config) {
  return run(kernel, source, config, DenseSimplex{});
}

RegretTerms regret_terms(const RunRecord& record, const TransitionKernel& kernel,
                         const std::vector<EpisodeFunctions>& episodes, double opt) {
  if (episodes.size() != record.episodes.size())
    throw std::invalid_argument("regret_terms: episode count does not match the record");
  RegretTerms r;
  r.opt = opt;
  double planned = 0.0, expected = 0.0, realized = 0.0;
  for (std::size_t t = 0; t < episodes.size(); ++t) {
    const EpisodeRecord& ep = record.episodes[t];
    realized += ep.realized_reward;
    if (!ep.active) continue;
    planned += ep.planned_reward;
    expected += inner(marginal(occupancy_from_policy(kernel, ep.policy)), episodes[t].f);
  }
  r.realized_reward = realized;
  r.dual_gap = opt - planned;
  r.estimation_gap = planned - expected;
  r.realization_gap = expected - realized;
  r.total = r.dual_gap + r.estimation_gap + r.realization_gap;
  return r;
}

RegretTerms regret_terms(const RunRecord& record, const TransitionKernel& kernel,
                         const std::vector<EpisodeFunctions>& episodes) {
  const double opt = solve_hindsight_opt(kernel, episodes, record.rho).value;
  return regret_terms(record, kernel, episodes, opt);
}

}  // namespace allocsim
