#include "allocsim/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <random>
#include <stdexcept>
#include <thread>

#include "allocsim/random.hpp"

namespace allocsim {
namespace {

constexpr std::uint64_t kGeneratorStream = 0;
constexpr std::uint64_t kExecutionStream = 1;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

json optional_index(const std::optional<std::size_t>& v) { return v ? json(*v) : json(nullptr); }

std::optional<std::size_t> index_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<std::size_t>();
}

}  // namespace

void GeneratorConfig::validate() const {
  shape().validate();
  if (!(dirichlet_alpha > 0.0)) throw std::invalid_argument("generator: alpha must be positive");
  if (!(rho > 0.0 && rho < 1.0)) throw std::invalid_argument("generator: rho must lie in (0, 1)");
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("generator: delta must lie in (0, 1)");
  if (num_episodes == 0) throw std::invalid_argument("generator: T must be positive");
  if (dual.eta && !(*dual.eta > 0.0)) throw std::invalid_argument("generator: eta must be positive");
  if (dual.initial_lambda < 0.0) throw std::invalid_argument("generator: lambda_1 must be >= 0");
}

Instance generate_instance(const GeneratorConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const MdpShape sh = cfg.shape();
  Rng rng(derive_seed(seed, kGeneratorStream));
  std::gamma_distribution<double> gamma(cfg.dirichlet_alpha, 1.0);

  auto dirichlet = [&](std::span<double> row) {
    double total = 0.0;
    for (double& x : row) total += (x = gamma(rng.engine()));
    if (total <= 0.0) {
      std::fill(row.begin(), row.end(), 1.0 / static_cast<double>(row.size()));
      return;
    }
    for (double& x : row) x /= total;
  };

  Instance inst{TransitionKernel(sh), {}};
  dirichlet(inst.kernel.init);
  for (std::size_t h = 0; h + 1 < sh.horizon; ++h)
    for (std::size_t s = 0; s < sh.num_states; ++s)
      for (std::size_t a = 0; a < sh.num_actions; ++a) dirichlet(inst.kernel.trans.row(h, s, a));

  inst.episodes.reserve(cfg.num_episodes);
  for (std::size_t t = 0; t < cfg.num_episodes; ++t) {
    EpisodeFunctions fg(sh);
    for (std::size_t h = 0; h < sh.horizon; ++h)
      for (std::size_t s = 0; s < sh.num_states; ++s)
        for (std::size_t a = 0; a < sh.num_actions; ++a) {
          const double f = rng.uniform();
          const double g = rng.uniform();
          if (a == sh.star_action) continue;
          fg.f(h, s, a) = f;
          fg.g(h, s, a) = g;
        }
    inst.episodes.push_back(std::move(fg));
  }
  return inst;
}

std::uint64_t execution_seed(std::uint64_t seed) { return derive_seed(seed, kExecutionStream); }

AllocatorConfig allocator_config(const GeneratorConfig& cfg, std::uint64_t seed) {
  AllocatorConfig ac;
  ac.rho = cfg.rho;
  ac.delta = cfg.delta;
  ac.dual = cfg.dual;
  ac.log_argument = cfg.log_argument;
  ac.seed = execution_seed(seed);
  return ac;
}

bool SweepCell::operator==(const SweepCell& o) const {
  return num_episodes == o.num_episodes && seed == o.seed && ok == o.ok && error == o.error &&
         opt == o.opt && reward == o.reward && regret == o.regret && term_dual == o.term_dual &&
         term_estimation == o.term_estimation && term_realization == o.term_realization &&
         consumption == o.consumption && budget == o.budget && stop_episode == o.stop_episode &&
         stop_step == o.stop_step && covered == o.covered;
}

SweepCell evaluate_cell(const GeneratorConfig& base, std::size_t num_episodes, std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  SweepCell cell;
  cell.num_episodes = num_episodes;
  cell.seed = seed;
  try {
    GeneratorConfig cfg = base;
    cfg.num_episodes = num_episodes;
    const Instance inst = generate_instance(cfg, seed);
    VectorEpisodeSource source(inst.episodes);
    const RunRecord rec = run(inst.kernel, source, allocator_config(cfg, seed));
    const HindsightResult opt = solve_hindsight_opt(inst.kernel, inst.episodes, cfg.rho, cfg.opt_method);
    const RegretTerms terms = regret_terms(rec, inst.kernel, inst.episodes, opt.value);
    cell.ok = true;
    cell.opt = opt.value;
    cell.reward = rec.total_reward;
    cell.regret = opt.value - rec.total_reward;
    cell.term_dual = terms.dual_gap;
    cell.term_estimation = terms.estimation_gap;
    cell.term_realization = terms.realization_gap;
    cell.consumption = rec.total_consumption;
    cell.budget = rec.budget;
    cell.stop_episode = rec.stop_episode;
    cell.stop_step = rec.stop_step;
    cell.covered = rec.kernel_always_covered;
  } catch (const std::exception& e) {
    cell.ok = false;
    cell.error = e.what();
  }
  cell.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return cell;
}

std::size_t sweep_threads() {
  std::size_t n = std::max<std::size_t>(1, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("ALLOC_SIM_THREADS")) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end != env && cap > 0) n = std::min(n, static_cast<std::size_t>(cap));
  }
  return n;
}

std::vector<SweepAggregate> aggregate(const std::vector<SweepCell>& cells,
                                      const std::vector<std::size_t>& grid) {
  std::vector<SweepAggregate> out;
  for (std::size_t T : grid) {
    SweepAggregate agg;
    agg.num_episodes = T;
    double sum = 0.0, sum_sq = 0.0, reward = 0.0, opt = 0.0, covered = 0.0;
    for (const SweepCell& c : cells) {
      if (c.num_episodes != T) continue;
      if (!c.ok) {
        ++agg.failures;
        continue;
      }
      ++agg.count;
      sum += c.regret;
      sum_sq += c.regret * c.regret;
      reward += c.reward;
      opt += c.opt;
      covered += c.covered ? 1.0 : 0.0;
    }
    if (agg.count > 0) {
      const double n = static_cast<double>(agg.count);
      agg.mean_regret = sum / n;
      agg.mean_regret_per_episode = agg.mean_regret / static_cast<double>(T);
      agg.mean_reward = reward / n;
      agg.mean_opt = opt / n;
      agg.coverage = covered / n;
      if (agg.count > 1) {
        const double var = std::max(0.0, (sum_sq - n * agg.mean_regret * agg.mean_regret) / (n - 1.0));
        agg.stderr_regret = std::sqrt(var / n);
      }
    }
    out.push_back(agg);
  }
  return out;
}

SweepReport sweep(const GeneratorConfig& cfg, const std::vector<std::size_t>& grid,
                  const std::vector<std::uint64_t>& seeds) {
  cfg.validate();
  SweepReport report;
  const std::size_t n = grid.size() * seeds.size();
  report.cells.resize(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++)
      report.cells[i] = evaluate_cell(cfg, grid[i / seeds.size()], seeds[i % seeds.size()]);
  };
  const std::size_t threads = std::min(sweep_threads(), std::max<std::size_t>(n, 1));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t k = 0; k < threads; ++k) pool.emplace_back(worker);
  }
  report.aggregates = aggregate(report.cells, grid);
  return report;
}

std::optional<double> loglog_slope(const std::vector<SweepAggregate>& aggregates) {
  if (aggregates.size() < 2) return std::nullopt;
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (const auto& a : aggregates) {
    if (!(a.mean_regret > 0.0) || a.num_episodes == 0) return std::nullopt;
    const double x = std::log(static_cast<double>(a.num_episodes));
    const double y = std::log(a.mean_regret);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double n = static_cast<double>(aggregates.size());
  const double denom = n * sxx - sx * sx;
  if (denom == 0.0) return std::nullopt;
  return (n * sxy - sx * sy) / denom;
}

void write_csv(const SweepReport& report, std::ostream& out) {
  out << "T,seed,ok,opt,reward,regret,term_dual,term_estimation,term_realization,"
         "consumption,budget,stop_episode,stop_step,covered,runtime_seconds,error\n";
  for (const SweepCell& c : report.cells) {
    out << c.num_episodes << ',' << c.seed << ',' << (c.ok ? 1 : 0) << ',' << format_double(c.opt)
        << ',' << format_double(c.reward) << ',' << format_double(c.regret) << ','
        << format_double(c.term_dual) << ',' << format_double(c.term_estimation) << ','
        << format_double(c.term_realization) << ',' << format_double(c.consumption) << ','
        << format_double(c.budget) << ',' << (c.stop_episode ? std::to_string(*c.stop_episode) : "")
        << ',' << (c.stop_step ? std::to_string(*c.stop_step) : "") << ',' << (c.covered ? 1 : 0)
        << ',' << format_double(c.runtime_seconds) << ',' << csv_quote(c.error) << '\n';
  }
}

json report_to_json(const SweepReport& report) {
  json cells = json::array();
  for (const SweepCell& c : report.cells) {
    cells.push_back(json{{"T", c.num_episodes},
                         {"seed", c.seed},
                         {"ok", c.ok},
                         {"error", c.error},
                         {"opt", c.opt},
                         {"reward", c.reward},
                         {"regret", c.regret},
                         {"term_dual", c.term_dual},
                         {"term_estimation", c.term_estimation},
                         {"term_realization", c.term_realization},
                         {"consumption", c.consumption},
                         {"budget", c.budget},
                         {"stop_episode", optional_index(c.stop_episode)},
                         {"stop_step", optional_index(c.stop_step)},
                         {"covered", c.covered},
                         {"runtime_seconds", c.runtime_seconds}});
  }
  json aggs = json::array();
  for (const SweepAggregate& a : report.aggregates) {
    aggs.push_back(json{{"T", a.num_episodes},
                        {"count", a.count},
                        {"failures", a.failures},
                        {"mean_regret", a.mean_regret},
                        {"stderr_regret", a.stderr_regret},
                        {"mean_regret_per_episode", a.mean_regret_per_episode},
                        {"mean_reward", a.mean_reward},
                        {"mean_opt", a.mean_opt},
                        {"coverage", a.coverage}});
  }
  return json{{"cells", std::move(cells)}, {"aggregates", std::move(aggs)}};
}

SweepReport report_from_json(const json& j) {
  SweepReport r;
  for (const auto& c : j.at("cells")) {
    SweepCell cell;
    cell.num_episodes = c.at("T").get<std::size_t>();
    cell.seed = c.at("seed").get<std::uint64_t>();
    cell.ok = c.at("ok").get<bool>();
    cell.error = c.at("error").get<std::string>();
    cell.opt = c.at("opt").get<double>();
    cell.reward = c.at("reward").get<double>();
    cell.regret = c.at("regret").get<double>();
    cell.term_dual = c.at("term_dual").get<double>();
    cell.term_estimation = c.at("term_estimation").get<double>();
    cell.term_realization = c.at("term_realization").get<double>();
    cell.consumption = c.at("consumption").get<double>();
    cell.budget = c.at("budget").get<double>();
    cell.stop_episode = index_from(c.at("stop_episode"));
    cell.stop_step = index_from(c.at("stop_step"));
    cell.covered = c.at("covered").get<bool>();
    cell.runtime_seconds = c.at("runtime_seconds").get<double>();
    r.cells.push_back(std::move(cell));
  }
  for (const auto& a : j.at("aggregates")) {
    SweepAggregate agg;
    agg.num_episodes = a.at("T").get<std::size_t>();
    agg.count = a.at("count").get<std::size_t>();
    agg.failures = a.at("failures").get<std::size_t>();
    agg.mean_regret = a.at("mean_regret").get<double>();
    agg.stderr_regret = a.at("stderr_regret").get<double>();
    agg.mean_regret_per_episode = a.at("mean_regret_per_episode").get<double>();
    agg.mean_reward = a.at("mean_reward").get<double>();
    agg.mean_opt = a.at("mean_opt").get<double>();
    agg.coverage = a.at("coverage").get<double>();
    r.aggregates.push_back(agg);
  }
  return r;
}

void emit_report(const SweepReport& report, ReportFormat format, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  if (format == ReportFormat::kCsv) {
    write_csv(report, out);
  } else {
    // nlohmann serializes doubles with round-trip precision.
    out << report_to_json(report).dump(1) << '\n';
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

SweepConfig sweep_config_from_json(const json& j) {
  SweepConfig sc;
  GeneratorConfig& g = sc.generator;
  g.num_states = j.value("S", g.num_states);
  g.num_actions = j.value("A", g.num_actions);
  g.horizon = j.value("H", g.horizon);
  g.star_action = j.value("star_action", g.star_action);
  g.dirichlet_alpha = j.value("alpha", g.dirichlet_alpha);
  g.rho = j.value("rho", g.rho);
  g.delta = j.value("delta", g.delta);
  if (j.contains("ref_fn")) g.dual.ref = parse_reference_function(j["ref_fn"].get<std::string>());
  if (j.contains("eta") && !(j["eta"].is_string() && j["eta"] == "auto"))
    g.dual.eta = j["eta"].get<double>();
  g.dual.initial_lambda = j.value("lambda1", g.dual.initial_lambda);
  g.dual.lambda_min = j.value("lambda_min", g.dual.lambda_min);
  g.dual.fixed = j.value("fixed_lambda", g.dual.fixed);
  if (j.contains("log_argument")) {
    const auto s = j["log_argument"].get<std::string>();
    if (s == "HSAT") g.log_argument = LogArgument::kHSAT;
    else if (s == "HS2AT") g.log_argument = LogArgument::kHS2AT;
    else throw std::invalid_argument("sweep config: log_argument must be HSAT or HS2AT");
  }
  if (j.contains("opt_method")) {
    const auto s = j["opt_method"].get<std::string>();
    if (s == "decomposition") g.opt_method = HindsightMethod::kDecomposition;
    else if (s == "coupled") g.opt_method = HindsightMethod::kCoupledLp;
    else throw std::invalid_argument("sweep config: opt_method must be decomposition or coupled");
  }
  sc.grid = j.value("T_grid", std::vector<std::size_t>{200, 800, 3200});
  g.seeds = j.value("seeds", std::vector<std::uint64_t>{});
  if (g.seeds.empty()) {
    const std::size_t n = j.value("num_seeds", std::size_t{20});
    for (std::size_t i = 0; i < n; ++i) g.seeds.push_back(i);
  }
  if (sc.grid.empty()) throw std::invalid_argument("sweep config: T_grid is empty");
  g.num_episodes = sc.grid.front();
  g.validate();
  return sc;
}

}  // namespace allocsim
