#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>

#include "dpsurv/cox.hpp"
#include "dpsurv/error.hpp"

namespace dpsurv {

struct GlmFit {
  Eigen::VectorXd coefficients;
  Eigen::MatrixXd covariance;
  Eigen::VectorXd se;
  Eigen::VectorXd wald_z;
  Eigen::VectorXd p_value;
  double deviance = 0.0;
  bool converged = false;   // false on iteration cap or separation
  bool separation = false;  // diverging coefficients detected
  int iterations = 0;
};

struct GlmOptions {
  int max_iterations = 60;
  double tolerance = 1e-9;  // relative deviance change
  // Fitted |linear predictor| beyond this signals (quasi-)complete
  // separation: fitted probabilities are pinned at 0/1 and the MLE is
  // drifting to infinity, so Wald inference is meaningless. The check is on
  // eta, not on raw coefficients, because uncentered designs (person-period
  // stacks with interval dummies) legitimately carry large offsets.
  double separation_bound = 30.0;
  // Relative pivot cutoff for the Hessian solves. Looser than the Cox
  // default because uncentered person-period designs (calendar-year columns
  // next to 0/1 interval dummies) are legitimately ill-scaled: the smallest
  // true pivot can sit below 1e-12 of the largest diagonal while the system
  // is still comfortably solvable in double precision.
  double rel_pivot = 1e-14;
};

namespace detail {

inline double bernoulli_deviance(const Eigen::VectorXd& y,
                                 const Eigen::VectorXd& eta) {
  // -2 * sum(y*eta - log(1+exp(eta))), with the stable log1p form.
  double s = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double e = eta(i);
    const double lse = e > 0 ? e + std::log1p(std::exp(-e)) : std::log1p(std::exp(e));
    s += y(i) * e - lse;
  }
  return -2.0 * s;
}

}  // namespace detail

// Logistic regression by IRLS (Newton on the Bernoulli deviance) with step
// halving. Separation is reported via flags, never thrown: under heavy
// randomized-response noise it is an expected per-iteration outcome.
inline GlmFit fit_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                           const GlmOptions& opt = {}) {
  const Eigen::Index m = X.rows();
  const Eigen::Index d = X.cols();
  if (d < 1 || m < d) throw ValidationFailure("fit_logistic: need m >= d >= 1");

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd eta = Eigen::VectorXd::Zero(m);
  double dev = detail::bernoulli_deviance(y, eta);

  GlmFit fit;
  Eigen::VectorXd mu(m), w(m);
  int it = 0;
  for (; it < opt.max_iterations; ++it) {
    mu = (1.0 / (1.0 + (-eta.array()).exp())).matrix();
    w = (mu.array() * (1.0 - mu.array())).matrix();
    Eigen::VectorXd g = X.transpose() * (y - mu);
    Eigen::MatrixXd H = X.transpose() * w.asDiagonal() * X;
    Eigen::VectorXd step = detail::solve_info(H, g, opt.rel_pivot);

    Eigen::VectorXd nb = beta + step;
    Eigen::VectorXd neta = X * nb;
    double ndev = detail::bernoulli_deviance(y, neta);
    int halvings = 0;
    while ((!std::isfinite(ndev) || ndev > dev + 1e-12) && halvings < 20) {
      step *= 0.5;
      nb = beta + step;
      neta = X * nb;
      ndev = detail::bernoulli_deviance(y, neta);
      ++halvings;
    }
    const bool done = std::abs(ndev - dev) < opt.tolerance * (std::abs(dev) + 1.0);
    beta = nb;
    eta = neta;
    dev = ndev;
    if (done) {
      fit.converged = true;
      ++it;
      break;
    }
  }

  mu = (1.0 / (1.0 + (-eta.array()).exp())).matrix();
  w = (mu.array() * (1.0 - mu.array())).matrix();
  Eigen::MatrixXd H = X.transpose() * w.asDiagonal() * X;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
  const double dmax = H.diagonal().maxCoeff();
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
      ldlt.vectorD().minCoeff() < opt.rel_pivot * std::max(dmax, 1.0))
    throw SingularInformation("logistic information matrix singular");
  fit.covariance = ldlt.solve(Eigen::MatrixXd::Identity(d, d));

  fit.separation = eta.cwiseAbs().maxCoeff() > opt.separation_bound;
  if (fit.separation) fit.converged = false;
  fit.coefficients = beta;
  fit.deviance = dev;
  fit.iterations = it;
  fit.se.resize(d);
  fit.wald_z.resize(d);
  fit.p_value.resize(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    const double v = fit.covariance(j, j);
    if (!(v > 0.0)) throw SingularInformation("nonpositive GLM variance");
    fit.se(j) = std::sqrt(v);
    fit.wald_z(j) = beta(j) / fit.se(j);
    fit.p_value(j) = wald_p(beta(j), fit.se(j));
  }
  return fit;
}

}  // namespace dpsurv
