#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "json.hpp"

#include "allocsim/allocator.hpp"
#include "allocsim/mdp.hpp"

namespace allocsim {

using json = nlohmann::json;

// Instance files: {"S","A","H","star_action","init":[S],"trans":[H-1][S][A][S]}.
// Probability rows must sum to 1 within 1e-9.
json kernel_to_json(const TransitionKernel& kernel);
TransitionKernel kernel_from_json(const json& j);

// Episode files: {"rho": optional, "episodes": [{"f": [H][S][A], "g": [H][S][A]}, ...]}.
json episodes_to_json(const std::vector<EpisodeFunctions>& episodes,
                      std::optional<double> rho = std::nullopt);
std::vector<EpisodeFunctions> episodes_from_json(const json& j, const MdpShape& shape);

json counters_to_json(const VisitCounters& counters);
VisitCounters counters_from_json(const json& j, const MdpShape& shape);

json record_to_json(const RunRecord& record);
RunRecord record_from_json(const json& j);

// Replay files: a run record plus the instance and episode functions that
// produced it, enough to re-run the allocator and recompute regret terms.
struct Replay {
  TransitionKernel kernel;
  std::vector<EpisodeFunctions> episodes;
  RunRecord record;
};
json replay_to_json(const RunRecord& record, const TransitionKernel& kernel,
                    const std::vector<EpisodeFunctions>& episodes);
Replay replay_from_json(const json& j);

json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const json& j);

}  // namespace allocsim
