#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "dpsurv/dataset.hpp"
#include "dpsurv/error.hpp"

namespace dpsurv {

// Two-sided Wald p-value from a standard-normal z; Phi evaluated through
// erfc, accurate to ~1e-15 in double precision.
inline double wald_p(double beta_j, double se_j) {
  if (!(se_j > 0.0)) throw InvalidSE("wald_p: se must be positive");
  double z = std::abs(beta_j / se_j);
  return std::erfc(z / std::sqrt(2.0));
}

struct FitOptions {
  int max_iterations = 50;
  double tolerance = 1e-9;  // relative log-likelihood change
};

struct CoxFit {
  Eigen::VectorXd beta;
  Eigen::MatrixXd covariance;
  Eigen::VectorXd se;
  Eigen::VectorXd wald_z;
  Eigen::VectorXd p_value;
  Eigen::VectorXd hr;
  double log_partial_likelihood = 0.0;
  Eigen::MatrixXd dfbeta;  // n x q, filled by compute_dfbeta
  bool converged = false;
  int iterations = 0;
};

namespace detail {

struct CoxWork {
  // Row order sorted by descending time (stable), so prefix sums over the
  // sorted rows are risk-set sums.
  std::vector<Eigen::Index> order;
  Eigen::MatrixXd Xs;
  Eigen::VectorXd Ts;
  Eigen::VectorXi ds;

  CoxWork(const Eigen::MatrixXd& X, const Eigen::VectorXd& T,
          const Eigen::VectorXi& delta) {
    const Eigen::Index n = X.rows();
    order.resize(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return T(a) > T(b); });
    Xs.resize(n, X.cols());
    Ts.resize(n);
    ds.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      Xs.row(i) = X.row(order[static_cast<std::size_t>(i)]);
      Ts(i) = T(order[static_cast<std::size_t>(i)]);
      ds(i) = delta(order[static_cast<std::size_t>(i)]);
    }
  }
};

// Efron log partial likelihood with analytic score and information.
// Walks tied-time groups in descending time, accumulating risk-set sums
// S0/S1/S2 and applying the Efron event-group downweighting l/d.
inline void efron_derivs(const CoxWork& w, const Eigen::VectorXd& beta,
                         double* loglik, Eigen::VectorXd* score,
                         Eigen::MatrixXd* info) {
  const Eigen::Index n = w.Xs.rows();
  const Eigen::Index q = w.Xs.cols();
  Eigen::VectorXd eta = w.Xs * beta;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (eta(i) > 500.0) eta(i) = 500.0;
    if (eta(i) < -500.0) eta(i) = -500.0;
  }
  Eigen::VectorXd ew = eta.array().exp();

  double ll = 0.0;
  Eigen::VectorXd sc = Eigen::VectorXd::Zero(q);
  Eigen::MatrixXd in = Eigen::MatrixXd::Zero(q, q);

  double S0 = 0.0;
  Eigen::VectorXd S1 = Eigen::VectorXd::Zero(q);
  Eigen::MatrixXd S2 = Eigen::MatrixXd::Zero(q, q);
  Eigen::VectorXd s1(q), m(q);
  Eigen::MatrixXd s2(q, q);

  Eigen::Index i = 0;
  while (i < n) {
    Eigen::Index j = i;
    const double t = w.Ts(i);
    while (j < n && w.Ts(j) == t) {
      const auto xi = w.Xs.row(j);
      S0 += ew(j);
      S1.noalias() += ew(j) * xi.transpose();
      S2.noalias() += ew(j) * (xi.transpose() * xi);
      ++j;
    }
    int d = 0;
    double S0D = 0.0;
    Eigen::VectorXd S1D = Eigen::VectorXd::Zero(q);
    Eigen::MatrixXd S2D = Eigen::MatrixXd::Zero(q, q);
    for (Eigen::Index k = i; k < j; ++k) {
      if (w.ds(k) == 1) {
        const auto xk = w.Xs.row(k);
        ++d;
        S0D += ew(k);
        S1D.noalias() += ew(k) * xk.transpose();
        S2D.noalias() += ew(k) * (xk.transpose() * xk);
        ll += eta(k);
        sc.noalias() += xk.transpose();
      }
    }
    for (int l = 0; l < d; ++l) {
      const double f = static_cast<double>(l) / d;
      const double s0 = S0 - f * S0D;
      if (!(s0 > 0.0) || !std::isfinite(s0))
        throw NumericOverflow("risk-set sum not positive/finite");
      s1 = S1 - f * S1D;
      s2 = S2 - f * S2D;
      ll -= std::log(s0);
      m = s1 / s0;
      sc.noalias() -= m;
      in.noalias() += s2 / s0 - m * m.transpose();
    }
    i = j;
  }
  *loglik = ll;
  *score = sc;
  *info = in;
}

}  // namespace detail

inline void partial_loglik_and_derivatives(const SurvivalDataset& ds,
                                           const Eigen::VectorXd& beta,
                                           double* loglik, Eigen::VectorXd* score,
                                           Eigen::MatrixXd* info) {
  detail::CoxWork w(ds.X, ds.T, ds.delta);
  detail::efron_derivs(w, beta, loglik, score, info);
}

namespace detail {

// Solves info * step = score via LDLT; SingularInformation when the
// information matrix is numerically rank-deficient.
inline Eigen::VectorXd solve_info(const Eigen::MatrixXd& info,
                                  const Eigen::VectorXd& rhs,
                                  double rel_pivot = 1e-12) {
  Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
  const double dmax = info.diagonal().maxCoeff();
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
      ldlt.vectorD().minCoeff() < rel_pivot * std::max(dmax, 1.0))
    throw SingularInformation("information matrix numerically singular");
  return ldlt.solve(rhs);
}

}  // namespace detail

inline CoxFit fit_cox(const SurvivalDataset& ds, const FitOptions& opt = {}) {
  if (ds.delta.sum() < 1) throw NoEvents("fit_cox: no events");
  const Eigen::Index q = ds.q();
  detail::CoxWork w(ds.X, ds.T, ds.delta);

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(q);
  double ll;
  Eigen::VectorXd score(q);
  Eigen::MatrixXd info(q, q);
  detail::efron_derivs(w, beta, &ll, &score, &info);

  CoxFit fit;
  fit.converged = false;
  int it = 0;
  for (; it < opt.max_iterations; ++it) {
    Eigen::VectorXd step = detail::solve_info(info, score);
    Eigen::VectorXd nb = beta + step;
    double nll;
    Eigen::VectorXd nscore(q);
    Eigen::MatrixXd ninfo(q, q);
    detail::efron_derivs(w, nb, &nll, &nscore, &ninfo);
    int halvings = 0;
    while ((!std::isfinite(nll) || nll < ll) && halvings < 20) {
      step *= 0.5;
      nb = beta + step;
      detail::efron_derivs(w, nb, &nll, &nscore, &ninfo);
      ++halvings;
    }
    const bool done = std::abs(nll - ll) < opt.tolerance * (std::abs(ll) + 1.0);
    beta = nb;
    ll = nll;
    score = nscore;
    info = ninfo;
    if (done) {
      fit.converged = true;
      ++it;
      break;
    }
  }

  Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
  const double dmax = info.diagonal().maxCoeff();
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
      ldlt.vectorD().minCoeff() < 1e-12 * std::max(dmax, 1.0))
    throw SingularInformation("information matrix singular at solution");
  fit.covariance = ldlt.solve(Eigen::MatrixXd::Identity(q, q));
  fit.beta = beta;
  fit.log_partial_likelihood = ll;
  fit.iterations = it;
  fit.se.resize(q);
  fit.wald_z.resize(q);
  fit.p_value.resize(q);
  fit.hr.resize(q);
  for (Eigen::Index j = 0; j < q; ++j) {
    const double v = fit.covariance(j, j);
    if (!(v > 0.0)) throw SingularInformation("nonpositive variance");
    fit.se(j) = std::sqrt(v);
    fit.wald_z(j) = beta(j) / fit.se(j);
    fit.p_value(j) = wald_p(beta(j), fit.se(j));
    fit.hr(j) = std::exp(beta(j));
  }
  return fit;
}

// Score-residual dfbeta: dfbeta_i = U_i * covariance, where U_i is the
// per-subject score residual from the martingale decomposition (Breslow
// hazard increments). First-order approximation of beta_hat - beta_hat(-i).
inline Eigen::MatrixXd compute_dfbeta(const CoxFit& fit, const SurvivalDataset& ds) {
  if (!fit.converged) throw NotConverged("compute_dfbeta: fit not converged");
  const Eigen::Index n = ds.n();
  const Eigen::Index q = ds.q();

  // ascending-time ordering; risk-set sums become suffix sums
  std::vector<Eigen::Index> asc(static_cast<std::size_t>(n));
  std::iota(asc.begin(), asc.end(), Eigen::Index{0});
  std::stable_sort(asc.begin(), asc.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return ds.T(a) < ds.T(b); });

  Eigen::MatrixXd Xa(n, q);
  Eigen::VectorXd Ta(n);
  Eigen::VectorXi da(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    Xa.row(i) = ds.X.row(asc[static_cast<std::size_t>(i)]);
    Ta(i) = ds.T(asc[static_cast<std::size_t>(i)]);
    da(i) = ds.delta(asc[static_cast<std::size_t>(i)]);
  }
  Eigen::VectorXd eta = (Xa * fit.beta).cwiseMin(500.0).cwiseMax(-500.0);
  Eigen::VectorXd ew = eta.array().exp();

  Eigen::VectorXd suf_S0(n);
  Eigen::MatrixXd suf_S1(n, q);
  double acc0 = 0.0;
  Eigen::VectorXd acc1 = Eigen::VectorXd::Zero(q);
  for (Eigen::Index i = n - 1; i >= 0; --i) {
    acc0 += ew(i);
    acc1.noalias() += ew(i) * Xa.row(i).transpose();
    suf_S0(i) = acc0;
    suf_S1.row(i) = acc1.transpose();
  }

  Eigen::MatrixXd resid(n, q);
  double cum_a = 0.0;                      // sum over event times of d/S0
  Eigen::VectorXd cum_b = Eigen::VectorXd::Zero(q);  // sum of d*S1/S0^2
  Eigen::VectorXd store_a(n);
  Eigen::MatrixXd store_b(n, q);
  Eigen::MatrixXd means = Eigen::MatrixXd::Zero(n, q);

  Eigen::Index i = 0;
  while (i < n) {
    Eigen::Index j = i;
    const double t = Ta(i);
    while (j < n && Ta(j) == t) ++j;
    int dcount = 0;
    for (Eigen::Index k = i; k < j; ++k) dcount += da(k);
    if (dcount > 0) {
      const double S0 = suf_S0(i);
      const Eigen::VectorXd S1 = suf_S1.row(i).transpose();
      cum_a += dcount / S0;
      cum_b.noalias() += dcount * S1 / (S0 * S0);
      for (Eigen::Index k = i; k < j; ++k) means.row(k) = (S1 / S0).transpose();
    }
    for (Eigen::Index k = i; k < j; ++k) {
      store_a(k) = cum_a;
      store_b.row(k) = cum_b.transpose();
    }
    i = j;
  }
  for (Eigen::Index r = 0; r < n; ++r) {
    resid.row(r) = da(r) * (Xa.row(r) - means.row(r)) -
                   ew(r) * (Xa.row(r) * store_a(r) - store_b.row(r));
  }
  Eigen::MatrixXd D = resid * fit.covariance;
  Eigen::MatrixXd out(n, q);
  for (Eigen::Index r = 0; r < n; ++r) out.row(asc[static_cast<std::size_t>(r)]) = D.row(r);
  return out;
}

// Harrell's C over comparable pairs: (i,j) comparable iff the strictly
// smaller time is an event; ties in risk score count 0.5.
inline double concordance(const Eigen::VectorXd& T, const Eigen::VectorXi& delta,
                          const Eigen::VectorXd& risk) {
  const Eigen::Index n = T.size();
  if (n < 2 || delta.size() != n || risk.size() != n)
    throw ValidationFailure("concordance: bad input sizes");
  // Sort ascending by time; for each event row, every strictly later time
  // is comparable. O(n^2) worst case but with a contiguous scan.
  std::vector<Eigen::Index> ord(static_cast<std::size_t>(n));
  std::iota(ord.begin(), ord.end(), Eigen::Index{0});
  std::stable_sort(ord.begin(), ord.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return T(a) < T(b); });
  double conc = 0.0;
  long long comp = 0;
  for (Eigen::Index a = 0; a < n; ++a) {
    const Eigen::Index i = ord[static_cast<std::size_t>(a)];
    if (delta(i) != 1) continue;
    for (Eigen::Index b = a + 1; b < n; ++b) {
      const Eigen::Index j = ord[static_cast<std::size_t>(b)];
      if (T(j) <= T(i)) continue;  // tied times are not comparable
      ++comp;
      if (risk(i) > risk(j)) conc += 1.0;
      else if (risk(i) == risk(j)) conc += 0.5;
    }
  }
  if (comp == 0) throw NoComparablePairs("concordance: no comparable pairs");
  return conc / static_cast<double>(comp);
}

}  // namespace dpsurv
