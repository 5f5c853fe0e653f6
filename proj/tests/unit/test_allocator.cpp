#include "doctest.h"

#include <cmath>
#include <random>

#include "allocsim/allocator.hpp"
#include "allocsim/occupancy_lp.hpp"
#include "fixtures.hpp"

using namespace allocsim;

namespace {

struct Problem {
  TransitionKernel kernel;
  std::vector<EpisodeFunctions> episodes;
};

Problem make_problem(const MdpShape& sh, std::size_t T, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  Problem p{fixtures::random_kernel(sh, gen), {}};
  for (std::size_t t = 0; t < T; ++t) p.episodes.push_back(fixtures::random_episode(sh, gen));
  return p;
}

RunRecord run_problem(const Problem& p, const AllocatorConfig& cfg) {
  VectorEpisodeSource src(p.episodes);
  return run(p.kernel, src, cfg);
}

// Fails every solve after the first `budget` calls.
class FlakySolver final : public LpSolver {
 public:
  explicit FlakySolver(int budget) : budget_(budget) {}
  LpResult solve(const LinearProgram& lp) const override {
    if (calls_++ >= budget_) return LpResult{};
    return DenseSimplex{}.solve(lp);
  }

 private:
  int budget_;
  mutable int calls_ = 0;
};

const MdpShape kShape{3, 3, 4, 0};

}  // namespace

TEST_CASE("budget state arithmetic") {
  BudgetState b = BudgetState::initial(0.5, 10, 4);
  CHECK(b.total() == 20.0);
  CHECK(b.remaining == 20.0);
  b.consume(19.5);
  CHECK(b.exhausted());
  CHECK(b.remaining == 0.5);
}

TEST_CASE("zero consumption never stops") {
  Problem p = make_problem(kShape, 30, 1);
  for (auto& fg : p.episodes) fg.g.fill(0.0);
  const RunRecord rec = run_problem(p, AllocatorConfig{});
  CHECK(!rec.stop_episode);
  CHECK(rec.total_consumption == 0.0);
  for (const auto& e : rec.episodes) {
    CHECK(e.active);
    CHECK(e.budget_remaining == rec.budget);
    CHECK(e.lambda == 0.0);
  }
}

TEST_CASE("consumption never exceeds the budget") {
  for (double rho : {0.05, 0.3, 0.99}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      Problem p = make_problem(kShape, 40, 100 + seed);
      if (rho == 0.99)
        for (auto& fg : p.episodes)
          for (std::size_t i = 0; i < fg.g.flat().size(); ++i)
            if (fg.f.flat()[i] > 0) fg.g.flat()[i] = 1.0;
      AllocatorConfig cfg;
      cfg.rho = rho;
      cfg.seed = seed;
      const RunRecord rec = run_problem(p, cfg);
      CHECK(rec.total_consumption <= rec.budget);
      CHECK(rec.budget == 40 * 4 * rho);
      double sum = 0.0;
      for (const auto& e : rec.episodes) {
        sum += e.realized_consumption;
        CHECK(e.budget_remaining >= 0.0);
      }
      CHECK(sum == doctest::Approx(rec.total_consumption).epsilon(1e-12));
      if (rho == 0.99 && rec.stop_episode) CHECK(*rec.stop_episode == 39);
    }
  }
}

TEST_CASE("after the stop everything freezes") {
  Problem p = make_problem(kShape, 60, 2);
  for (auto& fg : p.episodes) fg.g = fg.f;
  AllocatorConfig cfg;
  cfg.rho = 0.1;
  cfg.dual.fixed = true;  // greedy: spends until the stop
  cfg.seed = 3;
  const RunRecord rec = run_problem(p, cfg);
  REQUIRE(rec.stop_episode);
  const std::size_t stop = *rec.stop_episode;
  CHECK(*rec.stop_step < kShape.horizon);
  for (std::size_t t = 0; t < rec.episodes.size(); ++t) {
    const EpisodeRecord& e = rec.episodes[t];
    if (t < stop) {
      CHECK(e.active);
      CHECK(e.budget_remaining >= 1.0);
    } else if (t == stop) {
      CHECK(e.active);
      CHECK(e.budget_remaining < 1.0);
    } else {
      CHECK_FALSE(e.active);
      CHECK(e.realized_reward == 0.0);
      CHECK(e.realized_consumption == 0.0);
      CHECK(e.lambda == rec.episodes[stop].lambda);
      CHECK(e.budget_remaining == rec.episodes[stop].budget_remaining);
    }
  }
  // Observations stop growing once the stop episode is done.
  std::int64_t n = 0;
  for (auto x : rec.counters.visits.flat()) n += x;
  CHECK(n <= static_cast<std::int64_t>((stop + 1) * (kShape.horizon - 1)));
  CHECK(rec.counters.consistent());
}

TEST_CASE("dual iterates follow the mirror step on planned consumption") {
  for (auto ref : {ReferenceFunction::kSquaredEuclidean, ReferenceFunction::kNegativeEntropy}) {
    const Problem p = make_problem(kShape, 50, 4);
    AllocatorConfig cfg;
    cfg.rho = 0.3;
    cfg.dual.ref = ref;
    cfg.dual.initial_lambda = 0.2;
    const RunRecord rec = run_problem(p, cfg);
    CHECK(rec.eta == doctest::Approx(1.0 / (0.3 * 4 * std::sqrt(50.0))));
    DualState d{0.2, rec.eta, ref, kDefaultLambdaFloor};
    for (std::size_t t = 0; t < rec.episodes.size(); ++t) {
      const auto& e = rec.episodes[t];
      CHECK(e.lambda == d.lambda);
      CHECK(e.lambda >= 0.0);
      if (ref == ReferenceFunction::kNegativeEntropy) CHECK(e.lambda >= kDefaultLambdaFloor);
      if (!e.active || (rec.stop_episode && t == *rec.stop_episode)) continue;
      d = dual_update(d, 4 * 0.3, e.planned_consumption);
      CHECK(e.lp_value == doctest::Approx(e.planned_reward - e.lambda * e.planned_consumption).epsilon(1e-9));
    }
  }
}

TEST_CASE("fixed price and entropy start") {
  const Problem p = make_problem(kShape, 20, 5);
  AllocatorConfig cfg;
  cfg.dual.fixed = true;
  cfg.dual.initial_lambda = 0.4;
  for (const auto& e : run_problem(p, cfg).episodes) CHECK(e.lambda == 0.4);
  AllocatorConfig ent;
  ent.dual.ref = ReferenceFunction::kNegativeEntropy;
  CHECK(run_problem(p, ent).episodes.front().lambda == kDefaultLambdaFloor);
  AllocatorConfig step;
  step.dual.eta = 0.01;
  CHECK(run_problem(p, step).eta == 0.01);
}

TEST_CASE("runs are deterministic given the seed") {
  const Problem p = make_problem(kShape, 40, 6);
  AllocatorConfig cfg;
  cfg.seed = 77;
  const RunRecord a = run_problem(p, cfg);
  const RunRecord b = run_problem(p, cfg);
  CHECK(a == b);
  cfg.seed = 78;
  CHECK_FALSE(run_problem(p, cfg) == a);
}

TEST_CASE("invalid configurations are rejected") {
  Problem p = make_problem(kShape, 5, 7);
  AllocatorConfig cfg;
  cfg.rho = 1.0;
  CHECK_THROWS_AS(run_problem(p, cfg), std::invalid_argument);
  cfg.rho = 0.5;
  cfg.delta = 0.0;
  CHECK_THROWS_AS(run_problem(p, cfg), std::invalid_argument);
  cfg.delta = 0.1;
  cfg.dual.initial_lambda = -1.0;
  CHECK_THROWS_AS(run_problem(p, cfg), std::invalid_argument);
  cfg.dual.initial_lambda = 0.0;
  CHECK_THROWS_AS(run_problem(Problem{p.kernel, {}}, cfg), std::invalid_argument);
  p.episodes[2].f(0, 0, 0) = 0.5;  // reward on the star action
  CHECK_THROWS_AS(run_problem(p, cfg), std::invalid_argument);
}

TEST_CASE("solver failure aborts with the partial record") {
  const Problem p = make_problem(kShape, 10, 8);
  VectorEpisodeSource src(p.episodes);
  FlakySolver solver(3);
  try {
    run(p.kernel, src, AllocatorConfig{}, solver);
    FAIL("expected a RunFailure");
  } catch (const RunFailure& e) {
    CHECK(e.partial().episodes.size() == 3);
    CHECK(std::string(e.what()).find("episode 3") != std::string::npos);
  }
}

TEST_CASE("regret decomposition") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Problem p = make_problem(kShape, 30, 200 + seed);
    AllocatorConfig cfg;
    cfg.seed = seed;
    cfg.rho = 0.2;
    const RunRecord rec = run_problem(p, cfg);
    const RegretTerms r = regret_terms(rec, p.kernel, p.episodes);
    CHECK(std::abs(r.total - (r.opt - rec.total_reward)) <= 1e-8);
    CHECK(r.realized_reward == doctest::Approx(rec.total_reward).epsilon(1e-12));

    cfg.exact_kernel = true;
    const RunRecord exact = run_problem(p, cfg);
    CHECK(exact.exact_kernel);
    const RegretTerms e = regret_terms(exact, p.kernel, p.episodes, r.opt);
    CHECK(std::abs(e.estimation_gap) <= 1e-8);
    CHECK(std::abs(e.total - (e.opt - exact.total_reward)) <= 1e-8);
  }
  const Problem p = make_problem(kShape, 3, 9);
  const RunRecord rec = run_problem(p, AllocatorConfig{});
  CHECK_THROWS_AS(regret_terms(rec, p.kernel, {p.episodes[0]}, 1.0), std::invalid_argument);
}

TEST_CASE("coverage flags agree with the sets") {
  const Problem p = make_problem(kShape, 30, 10);
  const RunRecord rec = run_problem(p, AllocatorConfig{});
  bool all = true;
  for (const auto& e : rec.episodes)
    if (e.active) all = all && e.kernel_covered;
  CHECK(all == rec.kernel_always_covered);
  CHECK(rec.episodes.front().kernel_covered);  // fresh counters cover everything
}

TEST_CASE("mean reward on the default family lies between zero and the hindsight optimum") {
  double reward = 0.0, opt = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Problem p = make_problem(kShape, 200, 300 + seed);
    AllocatorConfig cfg;
    cfg.seed = seed;
    const RunRecord rec = run_problem(p, cfg);
    reward += rec.total_reward;
    opt += solve_hindsight_opt(p.kernel, p.episodes, cfg.rho).value;
  }
  CHECK(reward >= 0.0);
  CHECK(reward <= opt);
}
