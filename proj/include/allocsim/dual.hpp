#pragma once

#include <string>

namespace allocsim {

enum class ReferenceFunction {
  kSquaredEuclidean,  // psi(l) = l^2 / 2
  kNegativeEntropy,   // psi(l) = l ln l - l
};

std::string to_string(ReferenceFunction ref);
ReferenceFunction parse_reference_function(const std::string& name);  // "euclid" | "negent"

inline constexpr double kDefaultLambdaFloor = 1e-6;

struct DualState {
  double lambda = 0.0;
  double eta = 1.0;
  ReferenceFunction ref = ReferenceFunction::kSquaredEuclidean;
  double lambda_min = kDefaultLambdaFloor;  // negative entropy only
};

// Exact minimizer over lambda >= 0 of eta * (h_rho - consumed) * lambda + D(lambda, state.lambda):
//   squared euclidean: max(0, lambda - eta w)
//   negative entropy:  max(lambda_min, lambda exp(-eta w))
// with w = h_rho - consumed.
DualState dual_update(const DualState& state, double h_rho, double consumed);

// 1 / (rho H sqrt(T)). Throws std::invalid_argument on nonpositive input.
double default_step_size(double rho, double horizon, double num_episodes);

// D(lambda, prev) = psi(lambda) - psi(prev) - psi'(prev) (lambda - prev).
// Throws std::domain_error for nonpositive arguments under negative entropy.
double bregman(ReferenceFunction ref, double lambda, double prev);

}  // namespace allocsim
