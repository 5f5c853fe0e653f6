#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "allocsim/allocator.hpp"
#include "allocsim/io.hpp"
#include "allocsim/mdp.hpp"
#include "allocsim/occupancy_lp.hpp"

namespace allocsim {

struct GeneratorConfig {
  std::size_t num_states = 3;
  std::size_t num_actions = 3;
  std::size_t horizon = 4;
  std::size_t star_action = 0;
  double dirichlet_alpha = 1.0;  // symmetric concentration of every kernel row
  double rho = 0.5;
  std::size_t num_episodes = 200;
  double delta = 0.1;
  DualConfig dual;
  LogArgument log_argument = LogArgument::kHSAT;
  HindsightMethod opt_method = HindsightMethod::kDecomposition;
  std::vector<std::uint64_t> seeds{0};

  MdpShape shape() const { return {num_states, num_actions, horizon, star_action}; }
  void validate() const;
};

struct Instance {
  TransitionKernel kernel;
  std::vector<EpisodeFunctions> episodes;
};

// Kernel rows ~ Dirichlet(alpha); f and g uniform on [0,1] per cell with the
// star column zeroed. The kernel is drawn first and episodes follow in order,
// so for a fixed seed a shorter instance is a prefix of a longer one.
Instance generate_instance(const GeneratorConfig& cfg, std::uint64_t seed);

AllocatorConfig allocator_config(const GeneratorConfig& cfg, std::uint64_t seed);

// Seed used by run() for trajectory sampling, distinct from the generator stream.
std::uint64_t execution_seed(std::uint64_t seed);

struct SweepCell {
  std::size_t num_episodes = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  double opt = 0.0;
  double reward = 0.0;
  double regret = 0.0;
  double term_dual = 0.0;
  double term_estimation = 0.0;
  double term_realization = 0.0;
  double consumption = 0.0;
  double budget = 0.0;
  std::optional<std::size_t> stop_episode;
  std::optional<std::size_t> stop_step;
  bool covered = false;
  double runtime_seconds = 0.0;

  // Equality ignores the runtime column.
  bool operator==(const SweepCell& o) const;
};

struct SweepAggregate {
  std::size_t num_episodes = 0;
  std::size_t count = 0;  // successful cells
  std::size_t failures = 0;
  double mean_regret = 0.0;
  double stderr_regret = 0.0;
  double mean_regret_per_episode = 0.0;
  double mean_reward = 0.0;
  double mean_opt = 0.0;
  double coverage = 0.0;

  bool operator==(const SweepAggregate&) const = default;
};

struct SweepReport {
  std::vector<SweepCell> cells;  // T-major, seeds in the given order
  std::vector<SweepAggregate> aggregates;

  bool operator==(const SweepReport&) const = default;
};

// Evaluates one (T, seed) cell: generate, run, hindsight OPT, regret terms.
// Failures are captured in the cell rather than thrown.
SweepCell evaluate_cell(const GeneratorConfig& cfg, std::size_t num_episodes, std::uint64_t seed);

// Worker count: hardware concurrency, capped by ALLOC_SIM_THREADS when set.
std::size_t sweep_threads();

SweepReport sweep(const GeneratorConfig& cfg, const std::vector<std::size_t>& grid,
                  const std::vector<std::uint64_t>& seeds);
std::vector<SweepAggregate> aggregate(const std::vector<SweepCell>& cells,
                                      const std::vector<std::size_t>& grid);

// Least-squares slope of log(mean regret) against log(T); nullopt when any
// mean regret is nonpositive or fewer than two points are given.
std::optional<double> loglog_slope(const std::vector<SweepAggregate>& aggregates);

enum class ReportFormat { kCsv, kJson };

void write_csv(const SweepReport& report, std::ostream& out);
json report_to_json(const SweepReport& report);
SweepReport report_from_json(const json& j);
void emit_report(const SweepReport& report, ReportFormat format, const std::filesystem::path& path);

// Sweep configuration file: generator fields plus "T_grid" and "seeds".
struct SweepConfig {
  GeneratorConfig generator;
  std::vector<std::size_t> grid;
};
SweepConfig sweep_config_from_json(const json& j);

}  // namespace allocsim
