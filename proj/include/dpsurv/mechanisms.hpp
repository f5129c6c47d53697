#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "dpsurv/dataset.hpp"
#include "dpsurv/error.hpp"
#include "dpsurv/rng.hpp"

namespace dpsurv {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

enum class Allocation { PerCovariate, AllInputs, PerCoefficient };

// Equal-share budget split under sequential composition: epsilon_total is
// divided over q targets (PerCovariate / PerCoefficient) or q+2 targets
// (AllInputs: q covariates plus T plus delta).
struct PrivacyBudget {
  double epsilon_total = kInfinity;
  Allocation allocation = Allocation::PerCovariate;
  int q = 0;

  int targets() const {
    return allocation == Allocation::AllInputs ? q + 2 : q;
  }
  double share() const {
    if (std::isinf(epsilon_total)) return kInfinity;
    return epsilon_total / targets();
  }
};

inline std::vector<double> allocate(const PrivacyBudget& budget) {
  if (budget.q < 1) throw ValidationFailure("allocate: q must be >= 1");
  return std::vector<double>(static_cast<std::size_t>(budget.targets()),
                             budget.share());
}

// Laplace noise via inverse CDF from a single uniform draw:
//   L = -b * sign(u - 1/2) * ln(1 - 2|u - 1/2|),  u in (0,1).
// Fixed as the normative sampling recipe so streams replay identically.
inline double laplace_noise(double scale, Rng& rng) {
  const double u = rng.next_unit() - 0.5;
  const double s = u > 0 ? 1.0 : (u < 0 ? -1.0 : 0.0);
  return -scale * s * std::log1p(-2.0 * std::abs(u));
}

// Eq.-(2) mechanism: value + Lap((upper-lower)/eps_share), clamped back to
// the data-driven bounds. Exact identity at eps = infinity.
inline double laplace_clamped(double value, double lower, double upper,
                              double eps_share, Rng& rng) {
  if (!(lower < upper)) throw DegenerateRange("laplace_clamped: lower >= upper");
  if (std::isinf(eps_share)) return value;
  if (!(eps_share > 0.0)) throw ValidationFailure("eps_share must be positive");
  const double b = (upper - lower) / eps_share;
  const double noisy = value + laplace_noise(b, rng);
  return std::min(std::max(noisy, lower), upper);
}

inline double laplace_clamped(double value, const CovariateSpec& spec,
                              double eps_share, Rng& rng) {
  return laplace_clamped(value, spec.lower, spec.upper, eps_share, rng);
}

// Binary randomized response: keep with p = e^eps/(1+e^eps), flip otherwise.
inline int binary_rr(int bit, double eps_share, Rng& rng) {
  if (bit != 0 && bit != 1) throw InvalidLevel("binary_rr: bit not in {0,1}");
  if (std::isinf(eps_share)) return bit;
  if (eps_share < 0.0) throw ValidationFailure("eps_share must be >= 0");
  const double pkeep = 1.0 / (1.0 + std::exp(-eps_share));
  return rng.next_unit() < pkeep ? bit : 1 - bit;
}

// k-ary randomized response over levels {1..k}: the true level is reported
// with probability e^eps/(e^eps + k - 1); otherwise one of the other k-1
// levels is reported uniformly. The residual uniform mass of the same draw
// selects the replacement level, so one uniform drives the whole decision.
inline int categorical_rr(int level, int k, double eps_share, Rng& rng) {
  if (k < 2) throw ValidationFailure("categorical_rr: k must be >= 2");
  if (level < 1 || level > k) throw InvalidLevel("categorical_rr: bad level");
  if (std::isinf(eps_share)) return level;
  if (eps_share < 0.0) throw ValidationFailure("eps_share must be >= 0");
  const double e = std::exp(eps_share);
  const double pkeep = e / (e + k - 1);
  const double u = rng.next_unit();
  if (u < pkeep) return level;
  int r = static_cast<int>((u - pkeep) / (1.0 - pkeep) * (k - 1));
  if (r > k - 2) r = k - 2;
  ++r;  // r in {1..k-1}
  return r + (r >= level ? 1 : 0);  // skip the true level
}

}  // namespace dpsurv
