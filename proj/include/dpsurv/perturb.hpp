#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "dpsurv/cox.hpp"
#include "dpsurv/dataset.hpp"
#include "dpsurv/glm.hpp"
#include "dpsurv/mechanisms.hpp"
#include "dpsurv/rng.hpp"

namespace dpsurv {

enum class Method { Phase1, Phase2, Phase3, OutputDfbeta };

inline std::string method_name(Method m) {
  switch (m) {
    case Method::Phase1: return "phase1";
    case Method::Phase2: return "phase2";
    case Method::Phase3: return "phase3";
    case Method::OutputDfbeta: return "output";
  }
  return "?";
}

inline Method method_from_name(const std::string& s) {
  if (s == "phase1") return Method::Phase1;
  if (s == "phase2") return Method::Phase2;
  if (s == "phase3") return Method::Phase3;
  if (s == "output") return Method::OutputDfbeta;
  throw ValidationFailure("unknown method: " + s +
                          " (valid: phase1 phase2 phase3 output)");
}

// Budget rule implied by the method tag: Phase1/Output split over the q
// covariates (coefficients); Phase2/Phase3 dilute to q+2 shares because T
// and delta (exit interval and delta for Phase 3) each consume one share.
inline PrivacyBudget budget_for(Method m, double eps_total, int q) {
  PrivacyBudget b;
  b.epsilon_total = eps_total;
  b.q = q;
  switch (m) {
    case Method::Phase1: b.allocation = Allocation::PerCovariate; break;
    case Method::Phase2: b.allocation = Allocation::AllInputs; break;
    case Method::Phase3: b.allocation = Allocation::AllInputs; break;
    case Method::OutputDfbeta: b.allocation = Allocation::PerCoefficient; break;
  }
  return b;
}

namespace detail {

// Perturbs covariates in spec order (column by column, rows in order) so the
// RNG stream replays deterministically. Continuous -> clamped Laplace,
// binary -> binary RR, categorical -> k-ary RR on 0-based level codes.
inline Eigen::MatrixXd perturb_covariates(const SurvivalDataset& ds,
                                          double eps_share, Rng& rng) {
  Eigen::MatrixXd Xp = ds.X;
  if (std::isinf(eps_share)) return Xp;
  for (Eigen::Index j = 0; j < ds.q(); ++j) {
    const CovariateSpec& s = ds.specs[j];
    switch (s.kind) {
      case Kind::Continuous:
        for (Eigen::Index i = 0; i < ds.n(); ++i)
          Xp(i, j) = laplace_clamped(ds.X(i, j), s, eps_share, rng);
        break;
      case Kind::Binary:
        for (Eigen::Index i = 0; i < ds.n(); ++i)
          Xp(i, j) = binary_rr(static_cast<int>(ds.X(i, j)), eps_share, rng);
        break;
      case Kind::Categorical:
        for (Eigen::Index i = 0; i < ds.n(); ++i)
          Xp(i, j) = categorical_rr(static_cast<int>(ds.X(i, j)) + 1, s.k,
                                    eps_share, rng) - 1;
        break;
    }
  }
  return Xp;
}

}  // namespace detail

// Phase 1: covariates only; T and delta are bit-identical to the input, so
// the risk-set ordering {j : T_j >= t} is exactly preserved.
inline SurvivalDataset phase1(const SurvivalDataset& ds, double eps_total,
                              Rng& rng) {
  const double share = budget_for(Method::Phase1, eps_total,
                                  static_cast<int>(ds.q())).share();
  SurvivalDataset out = ds;
  out.X = detail::perturb_covariates(ds, share, rng);
  return out;
}

// Phase 2: all inputs. Covariates as Phase 1 but at the diluted share; T gets
// Laplace noise with sensitivity max(T)-min(T), clamped back to the observed
// window; delta through binary RR. Draw order: covariates, then T, then delta.
inline SurvivalDataset phase2(const SurvivalDataset& ds, double eps_total,
                              Rng& rng) {
  const double share = budget_for(Method::Phase2, eps_total,
                                  static_cast<int>(ds.q())).share();
  SurvivalDataset out = ds;
  out.X = detail::perturb_covariates(ds, share, rng);
  if (std::isinf(share)) return out;
  for (Eigen::Index i = 0; i < ds.n(); ++i)
    out.T(i) = laplace_clamped(ds.T(i), ds.t_min, ds.t_max, share, rng);
  for (Eigen::Index i = 0; i < ds.n(); ++i)
    out.delta(i) = binary_rr(ds.delta(i), share, rng);
  return out;
}

struct SturgesIntervals {
  int K = 0;
  std::vector<double> cuts;  // K-1 upper cut points (event-time quantiles)
};

// K = min(d_unique, 1 + floor(log2 N)); boundaries are equal-frequency
// quantiles of the unique observed event times.
inline SturgesIntervals sturges_intervals(const SurvivalDataset& ds) {
  std::vector<double> uet;
  for (Eigen::Index i = 0; i < ds.n(); ++i)
    if (ds.delta(i) == 1) uet.push_back(ds.T(i));
  std::sort(uet.begin(), uet.end());
  uet.erase(std::unique(uet.begin(), uet.end()), uet.end());
  const int d = static_cast<int>(uet.size());
  if (d == 0) throw NoEvents("sturges_intervals: no events");
  SturgesIntervals out;
  out.K = std::min(d, 1 + static_cast<int>(std::floor(
                           std::log2(static_cast<double>(ds.n())))));
  for (int m = 1; m < out.K; ++m) {
    int idx = static_cast<int>(std::ceil(static_cast<double>(m) * d / out.K)) - 1;
    idx = std::min(idx, d - 1);
    out.cuts.push_back(uet[static_cast<std::size_t>(idx)]);
  }
  return out;
}

// Exit interval k* in 1..K: index of the first cut >= T (T <= cuts[0] -> 1).
inline int exit_interval(double t, const std::vector<double>& cuts) {
  const auto it = std::lower_bound(cuts.begin(), cuts.end(), t);
  return 1 + static_cast<int>(it - cuts.begin());
}

inline Eigen::VectorXi exit_intervals(const SurvivalDataset& ds,
                                      const std::vector<double>& cuts) {
  Eigen::VectorXi k(ds.n());
  for (Eigen::Index i = 0; i < ds.n(); ++i) k(i) = exit_interval(ds.T(i), cuts);
  return k;
}

// Person-period expansion. Column layout: q covariates first, then K interval
// dummies (no intercept; the dummies absorb the baseline).
struct StackedDataset {
  Eigen::MatrixXd D;       // total_rows x (q + K)
  Eigen::VectorXd y;       // response in {0,1}
  Eigen::VectorXi subject; // provenance: source row index
  Eigen::VectorXi kprime;  // perturbed exit interval per subject
  Eigen::VectorXi dprime;  // perturbed event indicator per subject
  int K = 0;
};

// Deterministic expansion of the (already perturbed) pair (k*', delta'):
// subject i contributes exactly k*'_i rows, response delta'_i on the last
// row and 0 before. Consumes no randomness (post-processing).
inline StackedDataset stack_dataset(const Eigen::MatrixXd& Xp,
                                    const Eigen::VectorXi& kstar,
                                    const Eigen::VectorXi& delta, int K) {
  const Eigen::Index n = Xp.rows();
  const Eigen::Index q = Xp.cols();
  Eigen::Index total = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (kstar(i) < 1 || kstar(i) > K)
      throw InvalidLevel("stack_dataset: exit interval out of range");
    total += kstar(i);
  }
  StackedDataset out;
  out.K = K;
  out.D = Eigen::MatrixXd::Zero(total, q + K);
  out.y = Eigen::VectorXd::Zero(total);
  out.subject.resize(total);
  out.kprime = kstar;
  out.dprime = delta;
  Eigen::Index pos = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int k = kstar(i);
    for (int r = 0; r < k; ++r) {
      out.D.block(pos + r, 0, 1, q) = Xp.row(i);
      out.D(pos + r, q + r) = 1.0;
      out.subject(pos + r) = static_cast<int>(i);
    }
    out.y(pos + k - 1) = delta(i);
    pos += k;
  }
  return out;
}

struct Phase3Result {
  StackedDataset stacked;
  GlmFit fit;
};

// Phase 3 with externally supplied discretization (the harness derives K and
// the cuts from the full dataset so train subsets reuse them). Covariates at
// the diluted share, then k* through k-ary RR, then delta through binary RR;
// the expansion itself is pure post-processing.
inline Phase3Result phase3(const SurvivalDataset& ds,
                           const SturgesIntervals& si,
                           const Eigen::VectorXi& kstar, double eps_total,
                           Rng& rng) {
  const double share = budget_for(Method::Phase3, eps_total,
                                  static_cast<int>(ds.q())).share();
  Eigen::MatrixXd Xp = detail::perturb_covariates(ds, share, rng);
  Eigen::VectorXi kf(ds.n()), df(ds.n());
  for (Eigen::Index i = 0; i < ds.n(); ++i)
    kf(i) = categorical_rr(kstar(i), si.K, share, rng);
  for (Eigen::Index i = 0; i < ds.n(); ++i)
    df(i) = binary_rr(ds.delta(i), share, rng);
  Phase3Result out;
  out.stacked = stack_dataset(Xp, kf, df, si.K);
  out.fit = fit_logistic(out.stacked.D, out.stacked.y);
  return out;
}

inline Phase3Result phase3(const SurvivalDataset& ds, double eps_total,
                           Rng& rng) {
  SturgesIntervals si = sturges_intervals(ds);
  return phase3(ds, si, exit_intervals(ds, si.cuts), eps_total, rng);
}

// dfbeta sensitivity per coefficient: Delta_j = max_i |dfbeta_ij|.
inline Eigen::VectorXd dfbeta_sensitivity(const Eigen::MatrixXd& dfbeta) {
  return dfbeta.cwiseAbs().colwise().maxCoeff();
}

// Output perturbation: beta_j + Lap(Delta_j / (eps/q)); SEs and covariance
// carried over from the clean fit (the paper defines no noisy SE), p-values
// and HRs recomputed from the noisy coefficients.
inline CoxFit output_dfbeta(const CoxFit& clean, const Eigen::VectorXd& sens,
                            double eps_total, Rng& rng) {
  if (!clean.converged) throw NotConverged("output_dfbeta: clean fit required");
  const int q = static_cast<int>(clean.beta.size());
  const double share = budget_for(Method::OutputDfbeta, eps_total, q).share();
  CoxFit out = clean;
  if (!std::isinf(share)) {
    for (int j = 0; j < q; ++j)
      out.beta(j) = clean.beta(j) + laplace_noise(sens(j) / share, rng);
  }
  for (int j = 0; j < q; ++j) {
    out.wald_z(j) = out.beta(j) / out.se(j);
    out.p_value(j) = wald_p(out.beta(j), out.se(j));
    out.hr(j) = std::exp(out.beta(j));
  }
  return out;
}

inline CoxFit output_dfbeta(const SurvivalDataset& ds, double eps_total,
                            Rng& rng) {
  CoxFit clean = fit_cox(ds);
  if (!clean.converged) throw NotConverged("output_dfbeta: clean fit diverged");
  Eigen::MatrixXd dfb = compute_dfbeta(clean, ds);
  return output_dfbeta(clean, dfbeta_sensitivity(dfb), eps_total, rng);
}

}  // namespace dpsurv
