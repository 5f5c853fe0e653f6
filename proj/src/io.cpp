#include "allocsim/io.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <stdexcept>

namespace allocsim {
namespace {

constexpr double kLoadTol = 1e-9;

json table3_to_json(const Table3& t) {
  json out = json::array();
  for (std::size_t i = 0; i < t.dim(0); ++i) {
    json mid = json::array();
    for (std::size_t j = 0; j < t.dim(1); ++j) {
      const auto r = t.row(i, j);
      mid.push_back(std::vector<double>(r.begin(), r.end()));
    }
    out.push_back(std::move(mid));
  }
  return out;
}

Table3 table3_from_json(const json& j, const Table3::Dims& dims, const char* what) {
  Table3 t(dims);
  if (!j.is_array() || j.size() != dims[0])
    throw std::invalid_argument(std::string(what) + ": wrong outer length");
  for (std::size_t a = 0; a < dims[0]; ++a) {
    if (!j[a].is_array() || j[a].size() != dims[1])
      throw std::invalid_argument(std::string(what) + ": wrong middle length");
    for (std::size_t b = 0; b < dims[1]; ++b) {
      const auto v = j[a][b].get<std::vector<double>>();
      if (v.size() != dims[2]) throw std::invalid_argument(std::string(what) + ": wrong row length");
      std::copy(v.begin(), v.end(), t.row(a, b).begin());
    }
  }
  return t;
}

template <class T, std::size_t R>
json nested(const Tensor<T, R>& t) {
  // Row-major flat storage rebuilt as nested arrays.
  std::function<json(std::size_t, std::size_t)> build = [&](std::size_t level, std::size_t off) {
    json arr = json::array();
    std::size_t stride = 1;
    for (std::size_t k = level + 1; k < R; ++k) stride *= t.dim(k);
    for (std::size_t i = 0; i < t.dim(level); ++i) {
      if (level + 1 == R) arr.push_back(t.flat()[off + i]);
      else arr.push_back(build(level + 1, off + i * stride));
    }
    return arr;
  };
  return build(0, 0);
}

template <class T, std::size_t R>
Tensor<T, R> unnest(const json& j, const typename Tensor<T, R>::Dims& dims, const char* what) {
  Tensor<T, R> t(dims);
  std::size_t pos = 0;
  std::function<void(const json&, std::size_t)> walk = [&](const json& node, std::size_t level) {
    if (!node.is_array() || node.size() != dims[level])
      throw std::invalid_argument(std::string(what) + ": dimension mismatch");
    for (const auto& child : node) {
      if (level + 1 == R) t.flat()[pos++] = child.get<T>();
      else walk(child, level + 1);
    }
  };
  walk(j, 0);
  return t;
}

json optional_index(const std::optional<std::size_t>& v) { return v ? json(*v) : json(nullptr); }

std::optional<std::size_t> index_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<std::size_t>();
}

}  // namespace

json kernel_to_json(const TransitionKernel& kernel) {
  const auto& sh = kernel.shape;
  return json{{"S", sh.num_states},
              {"A", sh.num_actions},
              {"H", sh.horizon},
              {"star_action", sh.star_action},
              {"init", kernel.init},
              {"trans", nested(kernel.trans)}};
}

TransitionKernel kernel_from_json(const json& j) {
  MdpShape sh{j.at("S").get<std::size_t>(), j.at("A").get<std::size_t>(),
              j.at("H").get<std::size_t>(), j.value("star_action", std::size_t{0})};
  sh.validate();
  TransitionKernel kernel(sh);
  kernel.init = j.at("init").get<std::vector<double>>();
  if (sh.horizon > 1) {
    kernel.trans = unnest<double, 4>(j.at("trans"), kernel.trans.dims(), "instance trans");
  } else if (j.contains("trans") && !j["trans"].empty()) {
    throw std::invalid_argument("instance: trans must be empty when H = 1");
  }
  kernel.validate(kLoadTol);
  return kernel;
}

json episodes_to_json(const std::vector<EpisodeFunctions>& episodes, std::optional<double> rho) {
  json arr = json::array();
  for (const auto& fg : episodes) arr.push_back(json{{"f", table3_to_json(fg.f)}, {"g", table3_to_json(fg.g)}});
  json out{{"episodes", std::move(arr)}};
  if (rho) out["rho"] = *rho;
  return out;
}

std::vector<EpisodeFunctions> episodes_from_json(const json& j, const MdpShape& shape) {
  const json& arr = j.is_array() ? j : j.at("episodes");
  std::vector<EpisodeFunctions> out;
  out.reserve(arr.size());
  const Table3::Dims dims{shape.horizon, shape.num_states, shape.num_actions};
  for (const auto& e : arr) {
    EpisodeFunctions fg;
    fg.f = table3_from_json(e.at("f"), dims, "episode f");
    fg.g = table3_from_json(e.at("g"), dims, "episode g");
    fg.validate(shape);
    out.push_back(std::move(fg));
  }
  return out;
}

json counters_to_json(const VisitCounters& counters) {
  return json{{"N", nested(counters.visits)}, {"M", nested(counters.transitions)}};
}

VisitCounters counters_from_json(const json& j, const MdpShape& shape) {
  VisitCounters c(shape);
  if (shape.horizon > 1) {
    c.visits = unnest<std::int64_t, 3>(j.at("N"), c.visits.dims(), "counters N");
    c.transitions = unnest<std::int64_t, 4>(j.at("M"), c.transitions.dims(), "counters M");
  }
  if (!c.consistent()) throw std::invalid_argument("counters: sum of M does not match N");
  return c;
}

json record_to_json(const RunRecord& r) {
  json eps = json::array();
  for (const auto& e : r.episodes) {
    eps.push_back(json{{"lambda", e.lambda},
                       {"lp_value", e.lp_value},
                       {"planned_reward", e.planned_reward},
                       {"planned_consumption", e.planned_consumption},
                       {"realized_reward", e.realized_reward},
                       {"realized_consumption", e.realized_consumption},
                       {"budget_remaining", e.budget_remaining},
                       {"active", e.active},
                       {"kernel_covered", e.kernel_covered},
                       {"policy", e.active ? table3_to_json(e.policy.pi) : json(nullptr)}});
  }
  return json{{"format", "allocsim-run-record/1"},
              {"config",
               {{"S", r.shape.num_states},
                {"A", r.shape.num_actions},
                {"H", r.shape.horizon},
                {"star_action", r.shape.star_action},
                {"T", r.episodes.size()},
                {"rho", r.rho},
                {"delta", r.delta},
                {"eta", r.eta},
                {"ref_fn", to_string(r.ref)},
                {"fixed_lambda", r.fixed_lambda},
                {"exact_kernel", r.exact_kernel},
                {"seed", r.seed}}},
              {"budget", r.budget},
              {"stop_episode", optional_index(r.stop_episode)},
              {"stop_step", optional_index(r.stop_step)},
              {"total_reward", r.total_reward},
              {"total_consumption", r.total_consumption},
              {"kernel_always_covered", r.kernel_always_covered},
              {"episodes", std::move(eps)},
              {"counters", counters_to_json(r.counters)}};
}

RunRecord record_from_json(const json& j) {
  const json& c = j.at("config");
  RunRecord r;
  r.shape = MdpShape{c.at("S").get<std::size_t>(), c.at("A").get<std::size_t>(),
                     c.at("H").get<std::size_t>(), c.at("star_action").get<std::size_t>()};
  r.shape.validate();
  r.rho = c.at("rho").get<double>();
  r.delta = c.at("delta").get<double>();
  r.eta = c.at("eta").get<double>();
  r.ref = parse_reference_function(c.at("ref_fn").get<std::string>());
  r.fixed_lambda = c.at("fixed_lambda").get<bool>();
  r.exact_kernel = c.at("exact_kernel").get<bool>();
  r.seed = c.at("seed").get<std::uint64_t>();
  r.budget = j.at("budget").get<double>();
  r.stop_episode = index_from(j.at("stop_episode"));
  r.stop_step = index_from(j.at("stop_step"));
  r.total_reward = j.at("total_reward").get<double>();
  r.total_consumption = j.at("total_consumption").get<double>();
  r.kernel_always_covered = j.at("kernel_always_covered").get<bool>();
  const Table3::Dims dims{r.shape.horizon, r.shape.num_states, r.shape.num_actions};
  for (const auto& e : j.at("episodes")) {
    EpisodeRecord ep;
    ep.lambda = e.at("lambda").get<double>();
    ep.lp_value = e.at("lp_value").get<double>();
    ep.planned_reward = e.at("planned_reward").get<double>();
    ep.planned_consumption = e.at("planned_consumption").get<double>();
    ep.realized_reward = e.at("realized_reward").get<double>();
    ep.realized_consumption = e.at("realized_consumption").get<double>();
    ep.budget_remaining = e.at("budget_remaining").get<double>();
    ep.active = e.at("active").get<bool>();
    ep.kernel_covered = e.at("kernel_covered").get<bool>();
    if (ep.active) ep.policy.pi = table3_from_json(e.at("policy"), dims, "record policy");
    r.episodes.push_back(std::move(ep));
  }
  r.counters = counters_from_json(j.at("counters"), r.shape);
  return r;
}

json replay_to_json(const RunRecord& record, const TransitionKernel& kernel,
                    const std::vector<EpisodeFunctions>& episodes) {
  json j = record_to_json(record);
  j["instance"] = kernel_to_json(kernel);
  j["episode_functions"] = episodes_to_json(episodes, record.rho);
  return j;
}

Replay replay_from_json(const json& j) {
  if (!j.contains("instance") || !j.contains("episode_functions"))
    throw std::invalid_argument("replay: record does not embed the instance and episodes");
  Replay r{kernel_from_json(j.at("instance")), {}, record_from_json(j)};
  if (!(r.kernel.shape == r.record.shape))
    throw std::invalid_argument("replay: instance shape does not match the record");
  r.episodes = episodes_from_json(j.at("episode_functions"), r.kernel.shape);
  if (r.episodes.size() != r.record.episodes.size())
    throw std::invalid_argument("replay: episode count does not match the record");
  return r;
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return json::parse(in);
}

void write_json_file(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(1) << '\n';
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace allocsim
