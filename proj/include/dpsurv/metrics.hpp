#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "dpsurv/cox.hpp"
#include "dpsurv/dataset.hpp"
#include "dpsurv/error.hpp"
#include "dpsurv/perturb.hpp"

namespace dpsurv {

// One (dataset, method, epsilon, iteration) outcome.
struct SimulationRecord {
  std::string dataset;
  Method method = Method::Phase1;
  double epsilon = kInfinity;
  int iter = 0;
  Eigen::VectorXd p_value;  // per covariate; NaN when unavailable
  Eigen::VectorXd hr;       // per covariate; NaN when unavailable
  bool converged = false;   // significance fit (full data) converged
  bool separation = false;  // Phase-3 GLM separation flag
  double train_c = std::numeric_limits<double>::quiet_NaN();
  double test_c = std::numeric_limits<double>::quiet_NaN();
};

// Clean references both phases are scored against: the Cox baseline for
// Phases 1/2/Output and the eps=infinity GLM baseline for Phase 3, plus the
// exclusion set (variables whose significance classification flips between
// the two models — computed, never hard-coded).
struct MetricsConfig {
  double alpha = 0.05;
  Eigen::VectorXd p_cox, hr_cox;
  Eigen::VectorXd p_glm, hr_glm;  // covariate part of the eps=inf GLM
  std::vector<bool> sig_cox, sig_glm;
  std::vector<bool> phase3_excluded;  // sig_cox[j] != sig_glm[j]
  std::vector<std::string> variables;

  const Eigen::VectorXd& baseline_p(Method m) const {
    return m == Method::Phase3 ? p_glm : p_cox;
  }
  const Eigen::VectorXd& baseline_hr(Method m) const {
    return m == Method::Phase3 ? hr_glm : hr_cox;
  }
  const std::vector<bool>& baseline_sig(Method m) const {
    return m == Method::Phase3 ? sig_glm : sig_cox;
  }
  bool excluded(Method m, Eigen::Index j) const {
    return m == Method::Phase3 && phase3_excluded[static_cast<std::size_t>(j)];
  }
};

inline MetricsConfig compute_baseline(const SurvivalDataset& ds,
                                      double alpha = 0.05) {
  MetricsConfig cfg;
  cfg.alpha = alpha;
  cfg.variables = ds.covariate_names();
  CoxFit cox = fit_cox(ds);
  if (!cox.converged) throw NotConverged("baseline Cox fit did not converge");
  cfg.p_cox = cox.p_value;
  cfg.hr_cox = cox.hr;

  Rng rng;  // eps = infinity: mechanisms are identities, no draws consumed
  Phase3Result p3 = phase3(ds, kInfinity, rng);
  const Eigen::Index q = ds.q();
  cfg.p_glm = p3.fit.p_value.head(q);
  cfg.hr_glm = p3.fit.coefficients.head(q).array().exp();
  for (Eigen::Index j = 0; j < q; ++j) {
    cfg.sig_cox.push_back(cfg.p_cox(j) < alpha);
    cfg.sig_glm.push_back(cfg.p_glm(j) < alpha);
    cfg.phase3_excluded.push_back(cfg.sig_cox.back() != cfg.sig_glm.back());
  }
  return cfg;
}

inline std::vector<std::string> phase3_exclusion_names(const MetricsConfig& cfg) {
  std::vector<std::string> out;
  for (std::size_t j = 0; j < cfg.phase3_excluded.size(); ++j)
    if (cfg.phase3_excluded[j]) out.push_back(cfg.variables[j]);
  return out;
}

// Aggregate over the B records of one (dataset, method, epsilon) cell.
struct MetricSummary {
  Method method = Method::Phase1;
  double epsilon = kInfinity;
  int records = 0;

  Eigen::VectorXd lsr;        // per variable; NaN where not applicable
  Eigen::VectorXd fpr;
  Eigen::VectorXd bias;       // signed mean relative HR deviation
  Eigen::VectorXd abs_bias;   // mean |HR_dp/HR_clean - 1|
  Eigen::VectorXd mean_hr;
  double mean_lsr = std::numeric_limits<double>::quiet_NaN();
  double mean_fpr = std::numeric_limits<double>::quiet_NaN();
  double mean_train_c = std::numeric_limits<double>::quiet_NaN();
  double mean_test_c = std::numeric_limits<double>::quiet_NaN();
  double sd_test_c = std::numeric_limits<double>::quiet_NaN();
  double nonconverged_rate = 0.0;
};

// LSR_j counts iterations where a clean-significant variable fails to stay
// significant; a non-converged iteration counts as loss for every such
// variable (conservative) and is also reported as its own rate. FPR_j counts
// spurious significance among converged iterations only.
inline MetricSummary summarize_cell(const std::vector<SimulationRecord>& recs,
                                    const MetricsConfig& cfg, Method method,
                                    double epsilon) {
  if (recs.empty()) throw ValidationFailure("summarize_cell: no records");
  const Eigen::Index q = cfg.p_cox.size();
  const auto& sig = cfg.baseline_sig(method);
  const auto& hr_clean = cfg.baseline_hr(method);

  MetricSummary s;
  s.method = method;
  s.epsilon = epsilon;
  s.records = static_cast<int>(recs.size());
  s.lsr = Eigen::VectorXd::Zero(q);
  s.fpr = Eigen::VectorXd::Zero(q);
  s.bias = Eigen::VectorXd::Zero(q);
  s.abs_bias = Eigen::VectorXd::Zero(q);
  s.mean_hr = Eigen::VectorXd::Zero(q);
  Eigen::VectorXi hr_n = Eigen::VectorXi::Zero(q);

  int nonconv = 0;
  double tc_sum = 0.0, tc_sq = 0.0, trc_sum = 0.0;
  int tc_n = 0, trc_n = 0;
  for (const auto& r : recs) {
    if (!r.converged) ++nonconv;
    for (Eigen::Index j = 0; j < q; ++j) {
      const double p = r.converged && r.p_value.size() == q
                           ? r.p_value(j)
                           : std::numeric_limits<double>::quiet_NaN();
      if (sig[static_cast<std::size_t>(j)]) {
        if (!(p < cfg.alpha)) s.lsr(j) += 1.0;  // NaN compares false: lost
      } else {
        if (p < cfg.alpha) s.fpr(j) += 1.0;
      }
      if (r.hr.size() == q && std::isfinite(r.hr(j))) {
        const double rel = r.hr(j) / hr_clean(j) - 1.0;
        s.bias(j) += rel;
        s.abs_bias(j) += std::abs(rel);
        s.mean_hr(j) += r.hr(j);
        hr_n(j) += 1;
      }
    }
    if (std::isfinite(r.test_c)) {
      tc_sum += r.test_c;
      tc_sq += r.test_c * r.test_c;
      ++tc_n;
    }
    if (std::isfinite(r.train_c)) {
      trc_sum += r.train_c;
      ++trc_n;
    }
  }
  const double B = static_cast<double>(s.records);
  s.lsr /= B;
  s.fpr /= B;
  for (Eigen::Index j = 0; j < q; ++j) {
    if (hr_n(j) > 0) {
      s.bias(j) /= hr_n(j);
      s.abs_bias(j) /= hr_n(j);
      s.mean_hr(j) /= hr_n(j);
    } else {
      s.bias(j) = s.abs_bias(j) = s.mean_hr(j) =
          std::numeric_limits<double>::quiet_NaN();
    }
  }
  s.nonconverged_rate = nonconv / B;

  double lsr_sum = 0.0, fpr_sum = 0.0;
  int lsr_n = 0, fpr_n = 0;
  for (Eigen::Index j = 0; j < q; ++j) {
    // LSR is defined only for baseline-significant variables, FPR only for
    // the rest; Phase-3 exclusions keep per-variable values but drop out of
    // the dataset-level means.
    if (sig[static_cast<std::size_t>(j)]) {
      s.fpr(j) = std::numeric_limits<double>::quiet_NaN();
      if (!cfg.excluded(method, j)) {
        lsr_sum += s.lsr(j);
        ++lsr_n;
      }
    } else {
      s.lsr(j) = std::numeric_limits<double>::quiet_NaN();
      if (!cfg.excluded(method, j)) {
        fpr_sum += s.fpr(j);
        ++fpr_n;
      }
    }
  }
  if (lsr_n == 0) throw NoSignificantBaseline("no baseline-significant variables");
  s.mean_lsr = lsr_sum / lsr_n;
  s.mean_fpr = fpr_n > 0 ? fpr_sum / fpr_n
                         : std::numeric_limits<double>::quiet_NaN();
  if (tc_n > 0) {
    s.mean_test_c = tc_sum / tc_n;
    const double var = tc_sq / tc_n - s.mean_test_c * s.mean_test_c;
    s.sd_test_c = std::sqrt(std::max(var, 0.0));
  }
  if (trc_n > 0) s.mean_train_c = trc_sum / trc_n;
  return s;
}

// Utility degradation relative to the eps=infinity cell of the same stream.
inline double delta_c(const MetricSummary& at_eps, const MetricSummary& at_inf) {
  return at_inf.mean_test_c - at_eps.mean_test_c;
}

}  // namespace dpsurv
