#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "dpsurv/dataset.hpp"
#include "dpsurv/perturb.hpp"
#include "dpsurv/rng.hpp"

using namespace dpsurv;

namespace {

std::string fixture(const std::string& name) {
  return std::string(FIXTURE_DIR) + "/" + name;
}

SurvivalDataset load_named(const std::string& name) {
  return load_dataset(fixture(name + ".csv"), fixture(name + ".meta.json"),
                      find_registry(name));
}

std::vector<Eigen::Index> time_order(const Eigen::VectorXd& T) {
  std::vector<Eigen::Index> ord(static_cast<std::size_t>(T.size()));
  std::iota(ord.begin(), ord.end(), Eigen::Index{0});
  std::stable_sort(ord.begin(), ord.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return T(a) < T(b); });
  return ord;
}

}  // namespace

TEST_CASE("budget rules per method") {
  CHECK(budget_for(Method::Phase1, 1.0, 7).share() == doctest::Approx(1.0 / 7));
  CHECK(budget_for(Method::OutputDfbeta, 5.0, 7).share() == doctest::Approx(5.0 / 7));
  CHECK(budget_for(Method::Phase2, 34.0, 17).share() == doctest::Approx(34.0 / 19));
  CHECK(budget_for(Method::Phase3, 9.0, 7).share() == doctest::Approx(1.0));
  CHECK(std::isinf(budget_for(Method::Phase1, kInfinity, 7).share()));
}

TEST_CASE("phase1 preserves T, delta, and the risk-set ordering bit-exactly") {
  auto ds = load_named("lung");
  Rng rng{42, 1};
  auto p = phase1(ds, 1.0, rng);
  CHECK(p.T == ds.T);          // bit-exact
  CHECK(p.delta == ds.delta);  // bit-exact
  CHECK(time_order(p.T) == time_order(ds.T));
  CHECK(p.X != ds.X);  // covariates did change
  // perturbed values stay inside the data-driven bounds
  for (Eigen::Index j = 0; j < p.q(); ++j)
    for (Eigen::Index i = 0; i < p.n(); ++i) {
      REQUIRE(p.X(i, j) >= ds.specs[static_cast<std::size_t>(j)].lower);
      REQUIRE(p.X(i, j) <= ds.specs[static_cast<std::size_t>(j)].upper);
    }
}

TEST_CASE("phase2 clamps time into the observed window and flips some deltas") {
  auto ds = load_named("lung");
  Rng rng{42, 2};
  auto p = phase2(ds, 1.0, rng);
  for (Eigen::Index i = 0; i < p.n(); ++i) {
    REQUIRE(p.T(i) >= ds.t_min);
    REQUIRE(p.T(i) <= ds.t_max);
    REQUIRE(p.T(i) > 0);
  }
  CHECK(p.delta != ds.delta);
}

TEST_CASE("all four methods are exact identities at eps = infinity") {
  auto ds = load_named("lung");
  Rng r1{1}, r2{2}, r3{3}, r4{4};
  auto p1 = phase1(ds, kInfinity, r1);
  CHECK(p1.X == ds.X);
  CHECK(p1.T == ds.T);
  CHECK(p1.delta == ds.delta);
  auto p2 = phase2(ds, kInfinity, r2);
  CHECK(p2.X == ds.X);
  CHECK(p2.T == ds.T);
  CHECK(p2.delta == ds.delta);

  auto p3 = phase3(ds, kInfinity, r3);
  auto si = sturges_intervals(ds);
  CHECK(p3.stacked.kprime == exit_intervals(ds, si.cuts));
  CHECK(p3.stacked.dprime == ds.delta);

  auto clean = fit_cox(ds);
  auto noisy = output_dfbeta(ds, kInfinity, r4);
  CHECK(noisy.beta == clean.beta);
  CHECK(noisy.p_value == clean.p_value);

  // identity consumed no randomness anywhere
  CHECK(r1.draws() == 0);
  CHECK(r2.draws() == 0);
  CHECK(r3.draws() == 0);
  CHECK(r4.draws() == 0);
}

TEST_CASE("eps=infinity phase1/2 reproduce the baseline fit bit-for-bit") {
  auto ds = load_named("lung");
  auto base = fit_cox(ds);
  Rng r1{9}, r2{10};
  auto f1 = fit_cox(phase1(ds, kInfinity, r1));
  auto f2 = fit_cox(phase2(ds, kInfinity, r2));
  CHECK(f1.beta == base.beta);
  CHECK(f1.p_value == base.p_value);
  CHECK(f2.beta == base.beta);
}

TEST_CASE("sturges K per fixture matches the design table") {
  const std::vector<std::pair<std::string, int>> expected = {
      {"lung", 8}, {"pbc", 9}, {"colon", 10}, {"rotterdam", 12}, {"flchain", 13}};
  for (const auto& [name, k] : expected) {
    auto ds = load_named(name);
    CHECK(sturges_intervals(ds).K == k);
  }
}

TEST_CASE("sturges K binds on unique event times") {
  SurvivalDataset ds;
  ds.name = "threetimes";
  const int n = 1000;
  ds.X.resize(n, 1);
  ds.T.resize(n);
  ds.delta.resize(n);
  Rng rng{55};
  for (int i = 0; i < n; ++i) {
    ds.X(i, 0) = rng.next_unit();
    ds.T(i) = 1.0 + static_cast<double>(i % 3);  // three unique times
    ds.delta(i) = 1;
  }
  ds.specs.push_back({"x", Kind::Continuous});
  derive_bounds(ds);
  auto si = sturges_intervals(ds);
  CHECK(si.K == 3);  // d_unique = 3 < 1 + floor(log2 1000) = 10
  CHECK(si.cuts.size() == 2);
}

TEST_CASE("every subject maps to exactly one exit interval") {
  auto ds = load_named("colon");
  auto si = sturges_intervals(ds);
  auto k = exit_intervals(ds, si.cuts);
  for (Eigen::Index i = 0; i < ds.n(); ++i) {
    REQUIRE(k(i) >= 1);
    REQUIRE(k(i) <= si.K);
  }
  // boundary semantics: T <= first cut -> interval 1; T > last cut -> K
  CHECK(exit_interval(si.cuts[0], si.cuts) == 1);
  CHECK(exit_interval(si.cuts.back() + 1.0, si.cuts) == si.K);
}

TEST_CASE("stacking expansion rule") {
  Eigen::MatrixXd X(3, 2);
  X << 1, 2, 3, 4, 5, 6;
  Eigen::VectorXi kstar(3), delta(3);
  kstar << 1, 3, 2;
  delta << 1, 0, 1;
  auto st = stack_dataset(X, kstar, delta, 4);
  REQUIRE(st.D.rows() == 6);
  REQUIRE(st.D.cols() == 2 + 4);
  // subject 0: k*=1, delta=1 -> exactly one row with y=1
  CHECK(st.y(0) == 1.0);
  CHECK(st.D(0, 2) == 1.0);  // interval-1 dummy
  CHECK(st.subject(0) == 0);
  // subject 1: three rows, all y=0
  CHECK(st.y(1) == 0.0);
  CHECK(st.y(2) == 0.0);
  CHECK(st.y(3) == 0.0);
  CHECK(st.D(3, 2 + 2) == 1.0);  // third row carries interval-3 dummy
  // subject 2: y=delta on the last row only
  CHECK(st.y(4) == 0.0);
  CHECK(st.y(5) == 1.0);
  // covariates replicated on every person-period row
  CHECK(st.D(1, 0) == 3);
  CHECK(st.D(3, 1) == 4);

  Eigen::VectorXi bad(3);
  bad << 0, 1, 1;
  CHECK_THROWS_AS(stack_dataset(X, bad, delta, 4), InvalidLevel);
}

TEST_CASE("phase3 randomness budget: q+2 draws per subject, none for stacking") {
  auto ds = load_named("lung");
  auto si = sturges_intervals(ds);
  auto kstar = exit_intervals(ds, si.cuts);
  Rng rng{77, 3};
  auto res = phase3(ds, si, kstar, 2.0, rng);
  // q covariate draws + 1 categorical + 1 binary per subject; the expansion
  // and GLM fit consume nothing
  CHECK(rng.draws() == static_cast<std::uint64_t>(ds.n() * (ds.q() + 2)));
  CHECK(res.stacked.D.rows() == res.stacked.kprime.cast<long>().sum());
}

TEST_CASE("output perturbation: scale arithmetic and clean SEs") {
  auto ds = load_named("lung");
  auto clean = fit_cox(ds);
  auto sens = dfbeta_sensitivity(compute_dfbeta(clean, ds));

  // share eps/q: eps=5, q=7, Delta=0.02 -> scale 0.028
  const double share = budget_for(Method::OutputDfbeta, 5.0, 7).share();
  CHECK(0.02 / share == doctest::Approx(0.02 * 7.0 / 5.0));
  CHECK(0.02 * 7.0 / 5.0 == doctest::Approx(0.028));

  Rng rng{5, 1};
  auto noisy = output_dfbeta(clean, sens, 1.0, rng);
  CHECK(noisy.se == clean.se);               // SEs carried over unperturbed
  CHECK(noisy.covariance == clean.covariance);
  CHECK(noisy.beta != clean.beta);
  for (Eigen::Index j = 0; j < ds.q(); ++j) {
    CHECK(noisy.hr(j) == doctest::Approx(std::exp(noisy.beta(j))));
    CHECK(noisy.p_value(j) == doctest::Approx(wald_p(noisy.beta(j), clean.se(j))));
  }

  CoxFit unconverged;
  CHECK_THROWS_AS(output_dfbeta(unconverged, sens, 1.0, rng), NotConverged);
}

TEST_CASE("noise distribution shifts with the dfbeta sensitivity") {
  // empirical absolute-noise mean for one coefficient ~ sens*q/eps
  auto ds = load_named("lung");
  auto clean = fit_cox(ds);
  Eigen::VectorXd sens = Eigen::VectorXd::Constant(ds.q(), 0.05);
  const double eps = 2.0;
  const double b = 0.05 * static_cast<double>(ds.q()) / eps;
  double sum = 0.0;
  const int reps = 20000;
  Rng rng{31};
  for (int r = 0; r < reps; ++r) {
    auto noisy = output_dfbeta(clean, sens, eps, rng);
    sum += std::abs(noisy.beta(0) - clean.beta(0));
  }
  const double se = b / std::sqrt(static_cast<double>(reps));
  CHECK(std::abs(sum / reps - b) < 4 * se);
}
