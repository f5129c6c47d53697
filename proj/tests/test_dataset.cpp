#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <string>

#include "dpsurv/dataset.hpp"

using namespace dpsurv;

namespace {

std::string fixture(const std::string& name) {
  return std::string(FIXTURE_DIR) + "/" + name;
}

SurvivalDataset load_named(const std::string& name) {
  return load_dataset(fixture(name + ".csv"), fixture(name + ".meta.json"),
                      find_registry(name));
}

void write_temp(const std::string& path, const std::string& body) {
  std::ofstream out(path);
  out << body;
}

}  // namespace

TEST_CASE("all five registry fixtures load and match Table-I shape") {
  for (const auto& e : dataset_registry()) {
    auto ds = load_named(e.name);
    CHECK(static_cast<int>(ds.n()) == e.n);
    CHECK(ds.events() == e.events);
    CHECK(static_cast<int>(ds.q()) == e.q);
    // event rate consistent with the registry
    CHECK(std::abs(static_cast<double>(ds.events()) / ds.n() - e.event_rate) < 0.005);
  }
}

TEST_CASE("derive_bounds takes observed min/max and flags constants") {
  SurvivalDataset ds;
  ds.name = "toy";
  ds.X.resize(3, 1);
  ds.X << 2, 5, 9;
  ds.T.resize(3);
  ds.T << 1, 2, 3;
  ds.delta.resize(3);
  ds.delta << 1, 0, 1;
  ds.specs.push_back({"x", Kind::Continuous});
  derive_bounds(ds);
  CHECK(ds.specs[0].lower == 2);
  CHECK(ds.specs[0].upper == 9);
  CHECK(ds.specs[0].range() == 7);
  CHECK(ds.t_min == 1);
  CHECK(ds.t_max == 3);

  ds.X << 4, 4, 4;
  CHECK_THROWS_AS(derive_bounds(ds), DegenerateRange);
}

TEST_CASE("lung bounds equal sample min/max recomputed independently") {
  auto ds = load_named("lung");
  for (Eigen::Index j = 0; j < ds.q(); ++j) {
    double lo = ds.X(0, j), hi = ds.X(0, j);
    for (Eigen::Index i = 1; i < ds.n(); ++i) {
      lo = std::min(lo, ds.X(i, j));
      hi = std::max(hi, ds.X(i, j));
    }
    CHECK(ds.specs[j].lower == lo);
    CHECK(ds.specs[j].upper == hi);
  }
}

TEST_CASE("complete-case drop removes rows with missing cells") {
  const std::string csv = "/tmp/dpsurv_cc.csv";
  const std::string meta = "/tmp/dpsurv_cc.meta.json";
  write_temp(csv, "x,time,status\n1,5,1\n,6,0\n3,7,1\n");
  write_temp(meta, R"({"name":"cc","covariates":[{"name":"x","kind":"continuous"}]})");
  auto ds = load_dataset(csv, meta, nullptr);
  CHECK(ds.n() == 2);
  CHECK(ds.X(0, 0) == 1);
  CHECK(ds.X(1, 0) == 3);
  std::remove(csv.c_str());
  std::remove(meta.c_str());
}

TEST_CASE("schema violations are rejected") {
  const std::string csv = "/tmp/dpsurv_schema.csv";
  const std::string meta = "/tmp/dpsurv_schema.meta.json";
  write_temp(meta, R"({"name":"s","covariates":[{"name":"x","kind":"continuous"}]})");
  write_temp(csv, "y,time,status\n1,5,1\n");
  CHECK_THROWS_AS(load_dataset(csv, meta, nullptr), SchemaMismatch);
  write_temp(csv, "x,time,status\n1,bad,1\n");
  CHECK_THROWS_AS(load_dataset(csv, meta, nullptr), ParseError);
  std::remove(csv.c_str());
  std::remove(meta.c_str());
}

TEST_CASE("registry validation catches shape drift") {
  const std::string csv = "/tmp/dpsurv_reg.csv";
  const std::string meta = "/tmp/dpsurv_reg.meta.json";
  write_temp(meta, R"({"name":"lung","covariates":[{"name":"x","kind":"continuous"}]})");
  write_temp(csv, "x,time,status\n1,5,1\n2,4,0\n");
  CHECK_THROWS_AS(load_dataset(csv, meta, find_registry("lung")),
                  ValidationFailure);
  std::remove(csv.c_str());
  std::remove(meta.c_str());
}

TEST_CASE("CSV round-trip is bit exact") {
  auto ds = load_named("pbc");
  const std::string tmp = "/tmp/dpsurv_rt.csv";
  write_csv(ds, tmp);
  auto ds2 = load_dataset(tmp, fixture("pbc.meta.json"), find_registry("pbc"));
  CHECK(ds.X == ds2.X);
  CHECK(ds.T == ds2.T);
  CHECK(ds.delta == ds2.delta);
  std::remove(tmp.c_str());
}

TEST_CASE("stratified split follows the floor rounding rule") {
  SurvivalDataset ds;
  ds.name = "toy";
  ds.X.resize(10, 1);
  ds.T.resize(10);
  ds.delta.resize(10);
  for (int i = 0; i < 10; ++i) {
    ds.X(i, 0) = i;
    ds.T(i) = i + 1;
    ds.delta(i) = i < 5 ? 1 : 0;
  }
  ds.specs.push_back({"x", Kind::Continuous});
  derive_bounds(ds);

  Rng rng{42, 0};
  auto idx = stratified_split_indices(ds, 0.7, rng);
  int train_events = 0, train_cens = 0;
  for (auto i : idx.train) (ds.delta(i) == 1 ? train_events : train_cens) += 1;
  CHECK(train_events == 3);  // floor(0.7 * 5)
  CHECK(train_cens == 3);
  CHECK(idx.train.size() + idx.test.size() == 10);

  // disjoint and exhaustive
  std::vector<int> seen(10, 0);
  for (auto i : idx.train) seen[static_cast<std::size_t>(i)] += 1;
  for (auto i : idx.test) seen[static_cast<std::size_t>(i)] += 1;
  for (int s : seen) CHECK(s == 1);

  // same seed -> identical partition
  Rng rng2{42, 0};
  auto idx2 = stratified_split_indices(ds, 0.7, rng2);
  CHECK(idx.train == idx2.train);
  CHECK(idx.test == idx2.test);
}

TEST_CASE("split raises TooSmall when a stratum would empty") {
  SurvivalDataset ds;
  ds.name = "toy";
  ds.X.resize(3, 1);
  ds.X << 1, 2, 3;
  ds.T.resize(3);
  ds.T << 1, 2, 3;
  ds.delta.resize(3);
  ds.delta << 1, 0, 0;
  ds.specs.push_back({"x", Kind::Continuous});
  derive_bounds(ds);
  Rng rng{1};
  CHECK_THROWS_AS(stratified_split_indices(ds, 0.7, rng), TooSmall);
}

TEST_CASE("lung 70/30 split keeps the event rate") {
  auto ds = load_named("lung");
  Rng rng{42, 9};
  auto [train, test] = stratified_split(ds, 0.7, rng);
  // floor rule: train events = floor(0.7*121) = 84 of floor-based train size
  CHECK(train.events() == 84);
  const double rate = static_cast<double>(train.events()) / train.n();
  // within one subject of the full-data event rate 0.720
  CHECK(std::abs(rate - 0.720) < 1.0 / train.n() + 1e-9);
  // splits inherit the full-data clamp window
  CHECK(train.t_min == ds.t_min);
  CHECK(test.t_max == ds.t_max);
}
