#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "allocsim/allocator.hpp"
#include "allocsim/bench.hpp"
#include "allocsim/io.hpp"
#include "allocsim/occupancy_lp.hpp"

namespace {

using namespace allocsim;

constexpr int kExitConfig = 2;
constexpr int kExitSolver = 3;

struct RunOptions {
  std::string instance;
  std::string episodes;
  bool gen = false;
  std::size_t S = 3, A = 3, H = 4, T = 200;
  double rho = 0.5, delta = 0.1, alpha = 1.0;
  std::string ref_fn = "euclid";
  std::string eta = "auto";
  double lambda1 = 0.0;
  std::optional<double> fixed_lambda;
  bool exact_kernel = false;
  std::uint64_t seed = 0;
  std::string record;
  std::string dump_lp;
};

struct SweepOptions {
  std::string config;
  std::string out;
};

struct OptOptions {
  std::string instance;
  std::string episodes;
  std::optional<double> rho;
  std::string method = "decomposition";
};

std::optional<double> parse_eta(const std::string& s) {
  if (s == "auto") return std::nullopt;
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size() || !(v > 0.0)) throw std::invalid_argument("--eta must be 'auto' or a positive number");
  return v;
}

void print_summary(const RunRecord& rec) {
  std::printf("episodes %zu\n", rec.episodes.size());
  std::printf("budget %.17g\n", rec.budget);
  std::printf("total_reward %.17g\n", rec.total_reward);
  std::printf("total_consumption %.17g\n", rec.total_consumption);
  if (rec.stop_episode)
    std::printf("stop episode %zu step %zu\n", *rec.stop_episode, *rec.stop_step);
  else
    std::printf("stop none\n");
  std::printf("kernel_always_covered %s\n", rec.kernel_always_covered ? "true" : "false");
  std::printf("final_lambda %.17g\n", rec.episodes.empty() ? 0.0 : rec.episodes.back().lambda);
}

int cmd_run(const RunOptions& o) {
  if (o.gen == !o.instance.empty()) throw std::invalid_argument("run: give exactly one of --instance or --gen");
  GeneratorConfig cfg;
  cfg.num_states = o.S;
  cfg.num_actions = o.A;
  cfg.horizon = o.H;
  cfg.num_episodes = o.T;
  cfg.rho = o.rho;
  cfg.delta = o.delta;
  cfg.dirichlet_alpha = o.alpha;
  cfg.dual.ref = parse_reference_function(o.ref_fn);
  cfg.dual.eta = parse_eta(o.eta);
  cfg.dual.initial_lambda = o.fixed_lambda ? *o.fixed_lambda : o.lambda1;
  cfg.dual.fixed = o.fixed_lambda.has_value();

  Instance inst;
  if (o.gen) {
    inst = generate_instance(cfg, o.seed);
  } else {
    inst.kernel = kernel_from_json(read_json_file(o.instance));
    if (o.episodes.empty()) {
      const MdpShape sh = inst.kernel.shape;
      cfg.num_states = sh.num_states;
      cfg.num_actions = sh.num_actions;
      cfg.horizon = sh.horizon;
      cfg.star_action = sh.star_action;
      inst.episodes = generate_instance(cfg, o.seed).episodes;
    } else {
      const json ej = read_json_file(o.episodes);
      inst.episodes = episodes_from_json(ej, inst.kernel.shape);
    }
  }

  AllocatorConfig ac = allocator_config(cfg, o.seed);
  ac.exact_kernel = o.exact_kernel;

  if (!o.dump_lp.empty()) {
    const ConfidenceSet set = ac.exact_kernel
                                  ? exact_confidence_set(inst.kernel)
                                  : build_confidence_set(VisitCounters(inst.kernel.shape), ac.delta,
                                                         inst.episodes.size(), ac.log_argument);
    OccupancyLp lp = build_delta_lp(set, inst.kernel.init);
    Table3 objective = inst.episodes.front().f;
    const double lambda = ac.dual.initial_lambda;
    for (std::size_t i = 0; i < objective.flat().size(); ++i)
      objective.flat()[i] -= lambda * inst.episodes.front().g.flat()[i];
    lp.set_objective(objective);
    std::ofstream out(o.dump_lp);
    if (!out) throw std::runtime_error("cannot write " + o.dump_lp);
    dump_lp(lp.program, out);
  }

  VectorEpisodeSource source(inst.episodes);
  RunRecord rec;
  try {
    rec = run(inst.kernel, source, ac);
  } catch (const RunFailure& e) {
    std::fprintf(stderr, "solver failure: %s\n", e.what());
    if (!o.record.empty()) write_json_file(o.record, replay_to_json(e.partial(), inst.kernel, inst.episodes));
    return kExitSolver;
  }
  print_summary(rec);
  if (!o.record.empty()) write_json_file(o.record, replay_to_json(rec, inst.kernel, inst.episodes));
  return 0;
}

int cmd_sweep(const SweepOptions& o) {
  const SweepConfig sc = sweep_config_from_json(read_json_file(o.config));
  const SweepReport report = sweep(sc.generator, sc.grid, sc.generator.seeds);
  const bool as_json = o.out.size() >= 5 && o.out.substr(o.out.size() - 5) == ".json";
  emit_report(report, as_json ? ReportFormat::kJson : ReportFormat::kCsv, o.out);
  std::printf("T,count,failures,mean_regret,stderr_regret,regret_per_episode\n");
  for (const SweepAggregate& a : report.aggregates)
    std::printf("%zu,%zu,%zu,%.6g,%.6g,%.6g\n", a.num_episodes, a.count, a.failures, a.mean_regret,
                a.stderr_regret, a.mean_regret_per_episode);
  if (const auto slope = loglog_slope(report.aggregates)) std::printf("loglog_slope %.4f\n", *slope);
  for (const SweepAggregate& a : report.aggregates)
    if (a.failures > 0) return kExitSolver;
  return 0;
}

int cmd_opt(const OptOptions& o) {
  const TransitionKernel kernel = kernel_from_json(read_json_file(o.instance));
  const json ej = read_json_file(o.episodes);
  const auto episodes = episodes_from_json(ej, kernel.shape);
  std::optional<double> rho = o.rho;
  if (!rho && ej.is_object() && ej.contains("rho")) rho = ej["rho"].get<double>();
  if (!rho) throw std::invalid_argument("opt: rho not given and absent from the episodes file");
  HindsightMethod method;
  if (o.method == "decomposition") method = HindsightMethod::kDecomposition;
  else if (o.method == "coupled") method = HindsightMethod::kCoupledLp;
  else throw std::invalid_argument("opt: --method must be decomposition or coupled");
  const HindsightResult r = solve_hindsight_opt(kernel, episodes, *rho, method);
  std::printf("%.17g\n", r.value);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Online dual mirror descent allocation simulator"};
  app.require_subcommand(1);

  RunOptions ro;
  auto* run_cmd = app.add_subcommand("run", "Run the allocator on one instance");
  run_cmd->add_option("--instance", ro.instance, "Instance JSON file");
  run_cmd->add_option("--episodes", ro.episodes, "Episode functions JSON file (with --instance)");
  run_cmd->add_flag("--gen", ro.gen, "Generate a random instance");
  run_cmd->add_option("--S", ro.S, "Number of states")->check(CLI::PositiveNumber);
  run_cmd->add_option("--A", ro.A, "Number of actions")->check(CLI::Range(2, 1 << 20));
  run_cmd->add_option("--H", ro.H, "Horizon")->check(CLI::PositiveNumber);
  run_cmd->add_option("--T", ro.T, "Number of episodes")->check(CLI::PositiveNumber);
  run_cmd->add_option("--rho", ro.rho, "Per-step budget share in (0,1)");
  run_cmd->add_option("--delta", ro.delta, "Confidence parameter in (0,1)");
  run_cmd->add_option("--alpha", ro.alpha, "Dirichlet concentration for --gen");
  run_cmd->add_option("--ref-fn", ro.ref_fn, "Mirror map: euclid or negent")
      ->check(CLI::IsMember({"euclid", "negent"}));
  run_cmd->add_option("--eta", ro.eta, "Dual step size or 'auto'");
  run_cmd->add_option("--lambda1", ro.lambda1, "Initial dual value");
  run_cmd->add_option("--fixed-lambda", ro.fixed_lambda, "Hold the dual at this value");
  run_cmd->add_flag("--exact-kernel", ro.exact_kernel, "Plan with the true kernel");
  run_cmd->add_option("--seed", ro.seed, "Random seed");
  run_cmd->add_option("--record", ro.record, "Write the run record JSON here");
  run_cmd->add_option("--dump-lp", ro.dump_lp, "Write the first episode's LP here");

  SweepOptions so;
  auto* sweep_cmd = app.add_subcommand("sweep", "Sweep T and seeds, write a report");
  sweep_cmd->add_option("--config", so.config, "Sweep config JSON")->required();
  sweep_cmd->add_option("--out", so.out, "Report path (.csv or .json)")->required();

  OptOptions oo;
  auto* opt_cmd = app.add_subcommand("opt", "Print the hindsight optimum");
  opt_cmd->add_option("--instance", oo.instance, "Instance JSON file")->required();
  opt_cmd->add_option("--episodes", oo.episodes, "Episode functions JSON file")->required();
  opt_cmd->add_option("--rho", oo.rho, "Per-step budget share (overrides the file)");
  opt_cmd->add_option("--method", oo.method, "decomposition or coupled");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run_cmd) return cmd_run(ro);
    if (*sweep_cmd) return cmd_sweep(so);
    if (*opt_cmd) return cmd_opt(oo);
  } catch (const LpFailure& e) {
    std::fprintf(stderr, "solver failure: %s\n", e.what());
    return kExitSolver;
  } catch (const RunFailure& e) {
    std::fprintf(stderr, "solver failure: %s\n", e.what());
    return kExitSolver;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  }
  return kExitConfig;
}
