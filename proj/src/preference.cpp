#include "changeqa/preference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "changeqa/error.hpp"

namespace changeqa {

std::vector<double> preference_distribution(const PreferenceModel& model) {
  require(model.beta > 0.0 && std::isfinite(model.beta), Errc::contract, "beta must be positive and finite");
  require(!model.reference.empty() && model.reference.size() == model.reward.size(), Errc::contract,
          "reference and reward must cover the same nonempty candidate set");
  double mass = 0.0;
  for (double p : model.reference) {
    require(p >= 0.0 && std::isfinite(p), Errc::contract, "reference probabilities must be nonnegative");
    mass += p;
  }
  require(std::abs(mass - 1.0) < 1e-9, Errc::contract, "reference distribution must sum to 1");

  const std::size_t n = model.reference.size();
  std::vector<double> logw(n, -std::numeric_limits<double>::infinity());
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    if (model.reference[i] > 0.0) {
      logw[i] = std::log(model.reference[i]) + model.reward[i] / model.beta;
      top = std::max(top, logw[i]);
    }
  }
  std::vector<double> out(n, 0.0);
  double z = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (model.reference[i] > 0.0) {
      out[i] = std::exp(logw[i] - top);
      z += out[i];
    }
  }
  for (auto& v : out) v /= z;
  return out;
}

double acceptance_probability(double p_tau, int n) {
  require(p_tau >= 0.0 && p_tau <= 1.0, Errc::contract, "p_tau must lie in [0,1]");
  require(n >= 1, Errc::contract, "N must be >= 1");
  if (p_tau == 1.0) return 1.0;
  // 1 - (1-p)^n without cancellation for small p.
  return -std::expm1(static_cast<double>(n) * std::log1p(-p_tau));
}

std::vector<double> cumulative(std::span<const double> distribution) {
  std::vector<double> cdf(distribution.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < distribution.size(); ++i) {
    acc += distribution[i];
    cdf[i] = acc;
  }
  return cdf;
}

std::size_t sample_inverse_cdf(std::span<const double> cdf, double u) {
  require(!cdf.empty(), Errc::contract, "empty distribution");
  const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  // Rounding can leave the last cumulative value slightly below 1.
  return it == cdf.end() ? cdf.size() - 1 : static_cast<std::size_t>(it - cdf.begin());
}

}  // namespace changeqa
