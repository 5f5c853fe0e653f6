#include "doctest.h"

#include <cmath>
#include <cstdlib>
#include <sstream>

#include "allocsim/bench.hpp"

using namespace allocsim;

namespace {

std::size_t count_lines(const std::string& s) {
  std::size_t n = 0;
  for (char c : s) n += c == '\n';
  return n;
}

GeneratorConfig small_config() {
  GeneratorConfig cfg;
  cfg.num_states = 2;
  cfg.num_actions = 2;
  cfg.horizon = 3;
  return cfg;
}

}  // namespace

TEST_CASE("generated instances") {
  GeneratorConfig cfg;
  cfg.num_episodes = 30;
  const Instance a = generate_instance(cfg, 1);
  CHECK_NOTHROW(a.kernel.validate(1e-12));
  REQUIRE(a.episodes.size() == 30);
  for (const auto& fg : a.episodes) {
    CHECK_NOTHROW(fg.validate(cfg.shape()));
    for (std::size_t h = 0; h < cfg.horizon; ++h)
      for (std::size_t s = 0; s < cfg.num_states; ++s) {
        CHECK(fg.f(h, s, cfg.star_action) == 0.0);
        CHECK(fg.g(h, s, cfg.star_action) == 0.0);
      }
  }
  const Instance b = generate_instance(cfg, 2);
  CHECK_FALSE(a.kernel.trans == b.kernel.trans);
  CHECK_FALSE(a.episodes[0].f == b.episodes[0].f);

  GeneratorConfig shorter = cfg;
  shorter.num_episodes = 10;
  const Instance prefix = generate_instance(shorter, 1);
  CHECK(prefix.kernel.trans == a.kernel.trans);
  for (std::size_t t = 0; t < 10; ++t) CHECK(prefix.episodes[t].g == a.episodes[t].g);
}

TEST_CASE("large concentration gives near-uniform rows") {
  GeneratorConfig cfg;
  cfg.dirichlet_alpha = 1e6;
  cfg.num_episodes = 1;
  const Instance inst = generate_instance(cfg, 3);
  for (double p : inst.kernel.trans.flat()) CHECK(std::abs(p - 1.0 / 3.0) < 1e-2);
  for (double p : inst.kernel.init) CHECK(std::abs(p - 1.0 / 3.0) < 1e-2);
}

TEST_CASE("generator validation") {
  GeneratorConfig cfg;
  cfg.dirichlet_alpha = 0.0;
  CHECK_THROWS_AS(generate_instance(cfg, 0), std::invalid_argument);
  cfg = GeneratorConfig{};
  cfg.num_actions = 1;
  CHECK_THROWS_AS(generate_instance(cfg, 0), std::invalid_argument);
  cfg = GeneratorConfig{};
  cfg.dual.eta = -1.0;
  CHECK_THROWS_AS(generate_instance(cfg, 0), std::invalid_argument);
}

TEST_CASE("a cell matches the direct pipeline") {
  GeneratorConfig cfg;
  const SweepCell cell = evaluate_cell(cfg, 50, 4);
  REQUIRE(cell.ok);

  cfg.num_episodes = 50;
  const Instance inst = generate_instance(cfg, 4);
  VectorEpisodeSource src(inst.episodes);
  const AllocatorConfig ac = allocator_config(cfg, 4);
  CHECK(ac.seed == execution_seed(4));
  CHECK(ac.seed != 4);
  const RunRecord rec = run(inst.kernel, src, ac);
  const double opt = solve_hindsight_opt(inst.kernel, inst.episodes, cfg.rho).value;
  CHECK(cell.opt == opt);
  CHECK(cell.reward == rec.total_reward);
  CHECK(cell.regret == opt - rec.total_reward);
  CHECK(cell.budget == 50 * 4 * 0.5);
  CHECK(cell.consumption <= cell.budget);
  CHECK(std::abs(cell.term_dual + cell.term_estimation + cell.term_realization - cell.regret) <= 1e-8);
}

TEST_CASE("failing cells carry the error") {
  GeneratorConfig cfg;
  cfg.rho = 1.5;
  const SweepCell cell = evaluate_cell(cfg, 10, 0);
  CHECK_FALSE(cell.ok);
  CHECK(cell.error.find("rho") != std::string::npos);
  CHECK_THROWS_AS(sweep(cfg, {10}, {0}), std::invalid_argument);
}

TEST_CASE("sweeps are ordered, reproducible, and thread-count independent") {
  const GeneratorConfig cfg = small_config();
  const std::vector<std::size_t> grid{20, 40};
  const std::vector<std::uint64_t> seeds{5, 1, 9};
  ::setenv("ALLOC_SIM_THREADS", "1", 1);
  CHECK(sweep_threads() == 1);
  const SweepReport serial = sweep(cfg, grid, seeds);
  ::setenv("ALLOC_SIM_THREADS", "4", 1);
  const SweepReport parallel = sweep(cfg, grid, seeds);
  ::unsetenv("ALLOC_SIM_THREADS");
  CHECK(serial == parallel);
  CHECK(sweep(cfg, grid, seeds) == serial);

  REQUIRE(serial.cells.size() == 6);
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(serial.cells[i].num_episodes == grid[i / 3]);
    CHECK(serial.cells[i].seed == seeds[i % 3]);
    CHECK(serial.cells[i] == evaluate_cell(cfg, grid[i / 3], seeds[i % 3]));
  }
  REQUIRE(serial.aggregates.size() == 2);
  CHECK(serial.aggregates[0].count == 3);
}

TEST_CASE("cell equality ignores runtime") {
  SweepCell a;
  a.runtime_seconds = 1.0;
  SweepCell b = a;
  b.runtime_seconds = 2.0;
  CHECK(a == b);
  b.regret = 1.0;
  CHECK_FALSE(a == b);
}

TEST_CASE("aggregation") {
  std::vector<SweepCell> cells;
  for (double r : {1.0, 2.0, 6.0}) {
    SweepCell c;
    c.num_episodes = 10;
    c.ok = true;
    c.regret = r;
    c.opt = 10.0;
    c.reward = 10.0 - r;
    c.covered = r < 5.0;
    cells.push_back(c);
  }
  SweepCell failed;
  failed.num_episodes = 10;
  cells.push_back(failed);
  const auto agg = aggregate(cells, {10, 20});
  REQUIRE(agg.size() == 2);
  CHECK(agg[0].count == 3);
  CHECK(agg[0].failures == 1);
  CHECK(agg[0].mean_regret == doctest::Approx(3.0));
  // Sample variance 7, so the standard error is sqrt(7/3).
  CHECK(agg[0].stderr_regret == doctest::Approx(std::sqrt(7.0 / 3.0)));
  CHECK(agg[0].mean_regret_per_episode == doctest::Approx(0.3));
  CHECK(agg[0].mean_reward == doctest::Approx(7.0));
  CHECK(agg[0].coverage == doctest::Approx(2.0 / 3.0));
  CHECK(agg[1].count == 0);
  CHECK(agg[1].mean_regret == 0.0);
}

TEST_CASE("log-log slope") {
  std::vector<SweepAggregate> aggs;
  for (double T : {100.0, 400.0, 1600.0}) {
    SweepAggregate a;
    a.num_episodes = static_cast<std::size_t>(T);
    a.mean_regret = 3.0 * std::pow(T, 0.6);
    aggs.push_back(a);
  }
  CHECK(*loglog_slope(aggs) == doctest::Approx(0.6).epsilon(1e-12));
  CHECK_FALSE(loglog_slope({aggs[0]}));
  aggs[1].mean_regret = -1.0;
  CHECK_FALSE(loglog_slope(aggs));
}

TEST_CASE("report formats") {
  std::ostringstream empty;
  write_csv(SweepReport{}, empty);
  CHECK(empty.str() ==
        "T,seed,ok,opt,reward,regret,term_dual,term_estimation,term_realization,consumption,budget,"
        "stop_episode,stop_step,covered,runtime_seconds,error\n");

  GeneratorConfig cfg = small_config();
  cfg.rho = 0.05;
  const SweepReport report = sweep(cfg, {30}, {0, 1});
  std::ostringstream csv;
  write_csv(report, csv);
  CHECK(count_lines(csv.str()) == 3);

  const json j = report_to_json(report);
  const SweepReport back = report_from_json(json::parse(j.dump()));
  CHECK(back == report);
  CHECK(report_to_json(back) == j);
  for (const auto& c : report.cells) CHECK(c.consumption <= 30 * 3 * 0.05);
}

TEST_CASE("sweep configuration files") {
  const SweepConfig d = sweep_config_from_json(json::object());
  CHECK(d.grid == std::vector<std::size_t>{200, 800, 3200});
  CHECK(d.generator.seeds.size() == 20);
  CHECK(d.generator.seeds.back() == 19);
  CHECK_FALSE(d.generator.dual.eta);

  const SweepConfig c = sweep_config_from_json(json::parse(R"({
    "S": 4, "A": 2, "H": 5, "alpha": 0.5, "rho": 0.3, "ref_fn": "negent", "eta": 0.02,
    "log_argument": "HS2AT", "opt_method": "coupled", "T_grid": [10, 20], "seeds": [7, 8]
  })"));
  CHECK(c.generator.num_states == 4);
  CHECK(c.generator.horizon == 5);
  CHECK(c.generator.dual.ref == ReferenceFunction::kNegativeEntropy);
  CHECK(*c.generator.dual.eta == 0.02);
  CHECK(c.generator.log_argument == LogArgument::kHS2AT);
  CHECK(c.generator.opt_method == HindsightMethod::kCoupledLp);
  CHECK(c.grid == std::vector<std::size_t>{10, 20});
  CHECK(c.generator.seeds == std::vector<std::uint64_t>{7, 8});
  CHECK(sweep_config_from_json(json::parse(R"({"num_seeds": 3, "eta": "auto"})")).generator.seeds.size() == 3);

  CHECK_THROWS_AS(sweep_config_from_json(json::parse(R"({"log_argument": "X"})")), std::invalid_argument);
  CHECK_THROWS_AS(sweep_config_from_json(json::parse(R"({"T_grid": []})")), std::invalid_argument);
  CHECK_THROWS(sweep_config_from_json(json::parse(R"({"rho": 2})")));
}
