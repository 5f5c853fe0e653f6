#include "allocsim/dual.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace allocsim {

std::string to_string(ReferenceFunction ref) {
  return ref == ReferenceFunction::kSquaredEuclidean ? "euclid" : "negent";
}

ReferenceFunction parse_reference_function(const std::string& name) {
  if (name == "euclid") return ReferenceFunction::kSquaredEuclidean;
  if (name == "negent") return ReferenceFunction::kNegativeEntropy;
  throw std::invalid_argument("unknown reference function '" + name + "' (want euclid|negent)");
}

DualState dual_update(const DualState& state, double h_rho, double consumed) {
  DualState next = state;
  const double w = h_rho - consumed;
  switch (state.ref) {
    case ReferenceFunction::kSquaredEuclidean:
      next.lambda = std::max(0.0, state.lambda - state.eta * w);
      break;
    case ReferenceFunction::kNegativeEntropy:
      next.lambda = std::max(state.lambda_min, std::max(state.lambda, state.lambda_min) *
                                                   std::exp(-state.eta * w));
      break;
  }
  return next;
}

double default_step_size(double rho, double horizon, double num_episodes) {
  if (!(rho > 0.0 && horizon > 0.0 && num_episodes > 0.0))
    throw std::invalid_argument("default_step_size: arguments must be positive");
  return 1.0 / (rho * horizon * std::sqrt(num_episodes));
}

double bregman(ReferenceFunction ref, double lambda, double prev) {
  if (ref == ReferenceFunction::kSquaredEuclidean) {
    const double d = lambda - prev;
    return 0.5 * d * d;
  }
  if (!(lambda > 0.0 && prev > 0.0))
    throw std::domain_error("bregman: negative entropy needs positive arguments");
  return lambda * std::log(lambda / prev) - lambda + prev;
}

}  // namespace allocsim
