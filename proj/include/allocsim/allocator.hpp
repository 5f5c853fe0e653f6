#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "allocsim/confidence.hpp"
#include "allocsim/dual.hpp"
#include "allocsim/mdp.hpp"
#include "allocsim/simplex.hpp"

namespace allocsim {

// Pull interface over the per-episode reward/consumption functions. The
// length must be known up front: it fixes the budget and the step size.
class EpisodeSource {
 public:
  virtual ~EpisodeSource() = default;
  virtual std::size_t size() const = 0;
  virtual EpisodeFunctions next() = 0;
};

class VectorEpisodeSource final : public EpisodeSource {
 public:
  explicit VectorEpisodeSource(const std::vector<EpisodeFunctions>& episodes)
      : episodes_(&episodes) {}

  std::size_t size() const override { return episodes_->size(); }
  EpisodeFunctions next() override {
    if (pos_ >= episodes_->size()) throw std::out_of_range("VectorEpisodeSource exhausted");
    return (*episodes_)[pos_++];
  }

 private:
  const std::vector<EpisodeFunctions>* episodes_;
  std::size_t pos_ = 0;
};

struct DualConfig {
  ReferenceFunction ref = ReferenceFunction::kSquaredEuclidean;
  std::optional<double> eta;  // empty: 1 / (rho H sqrt(T))
  double initial_lambda = 0.0;
  double lambda_min = kDefaultLambdaFloor;
  bool fixed = false;  // comparator that never updates lambda (lambda = 0 is greedy)
};

struct AllocatorConfig {
  double rho = 0.5;
  double delta = 0.1;
  DualConfig dual;
  LogArgument log_argument = LogArgument::kHSAT;
  // Test hook: plan with the true kernel (pbar = P, eps = 0) instead of the
  // confidence set.
  bool exact_kernel = false;
  std::uint64_t seed = 0;
};

struct BudgetState {
  double remaining = 0.0;
  double rho = 0.0;
  std::size_t num_episodes = 0;
  std::size_t horizon = 0;

  static BudgetState initial(double rho, std::size_t num_episodes, std::size_t horizon);
  double total() const;
  void consume(double amount) { remaining -= amount; }
  bool exhausted() const { return remaining < 1.0; }
};

struct EpisodeRecord {
  double lambda = 0.0;
  double lp_value = 0.0;             // <f - lambda g, qhat>
  double planned_reward = 0.0;       // <f, qhat>
  double planned_consumption = 0.0;  // <g, qhat>
  double realized_reward = 0.0;
  double realized_consumption = 0.0;
  double budget_remaining = 0.0;     // after the episode
  bool active = false;               // false once the budget stop has happened
  bool kernel_covered = false;       // true kernel inside this episode's confidence set
  Policy policy;                     // empty when inactive

  bool operator==(const EpisodeRecord&) const = default;
};

struct RunRecord {
  MdpShape shape;
  double rho = 0.0;
  double delta = 0.0;
  double eta = 0.0;
  ReferenceFunction ref = ReferenceFunction::kSquaredEuclidean;
  bool fixed_lambda = false;
  bool exact_kernel = false;
  std::uint64_t seed = 0;
  double budget = 0.0;

  std::vector<EpisodeRecord> episodes;
  std::optional<std::size_t> stop_episode;  // 0-based
  std::optional<std::size_t> stop_step;     // 0-based step of the last consumption
  double total_reward = 0.0;
  double total_consumption = 0.0;
  bool kernel_always_covered = true;
  VisitCounters counters;

  bool operator==(const RunRecord&) const = default;
};

// Aborted run: the record holds every episode completed before the failure.
class RunFailure : public std::runtime_error {
 public:
  RunFailure(const std::string& what, RunRecord partial)
      : std::runtime_error(what), partial_(std::move(partial)) {}
  const RunRecord& partial() const { return partial_; }

 private:
  RunRecord partial_;
};

// Online dual mirror descent with per-episode confidence sets and a hard
// budget stop. Deterministic given config.seed.
RunRecord run(const TransitionKernel& kernel, EpisodeSource& source, const AllocatorConfig& config,
              const LpSolver& solver);
RunRecord run(const TransitionKernel& kernel, EpisodeSource& source, const AllocatorConfig& config);

struct RegretTerms {
  double opt = 0.0;
  double dual_gap = 0.0;         // (I)   OPT - sum <f_t, qhat_t>
  double estimation_gap = 0.0;   // (II)  sum <f_t, qhat_t - q_t>
  double realization_gap = 0.0;  // (III) sum <f_t, q_t> - realized reward
  double total = 0.0;
  double realized_reward = 0.0;
};

// q_t is recomputed under the true kernel from the recorded policies;
// inactive episodes contribute zero to every term.
RegretTerms regret_terms(const RunRecord& record, const TransitionKernel& kernel,
                         const std::vector<EpisodeFunctions>& episodes, double opt);
RegretTerms regret_terms(const RunRecord& record, const TransitionKernel& kernel,
                         const std::vector<EpisodeFunctions>& episodes);

}  // namespace allocsim
