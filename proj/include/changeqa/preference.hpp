#pragma once

#include <span>
#include <vector>

namespace changeqa {

/// Finite candidate set with a reference distribution, per-candidate reward
/// and regularisation strength beta > 0.
struct PreferenceModel {
  std::vector<double> reference;
  std::vector<double> reward;
  double beta = 1.0;
};

/// pi*(y) proportional to reference(y) * exp(reward(y) / beta), normalised.
/// Computed in log space so large reward/beta ratios do not overflow.
std::vector<double> preference_distribution(const PreferenceModel& model);

/// Probability that at least one of n independent draws clears the
/// threshold when each does so with probability p: 1 - (1 - p)^n.
double acceptance_probability(double p_tau, int n);

std::vector<double> cumulative(std::span<const double> distribution);

/// Inverse-CDF draw: first index whose cumulative mass exceeds u in [0,1).
std::size_t sample_inverse_cdf(std::span<const double> cdf, double u);

}  // namespace changeqa
