#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dpsurv/error.hpp"
#include "dpsurv/rng.hpp"

namespace dpsurv {

enum class Kind { Continuous, Binary, Categorical };

inline std::string kind_name(Kind k) {
  switch (k) {
    case Kind::Continuous: return "continuous";
    case Kind::Binary: return "binary";
    case Kind::Categorical: return "categorical";
  }
  return "?";
}

inline Kind kind_from_name(const std::string& s) {
  if (s == "continuous") return Kind::Continuous;
  if (s == "binary") return Kind::Binary;
  if (s == "categorical") return Kind::Categorical;
  throw ParseError("unknown covariate kind: " + s);
}

struct CovariateSpec {
  std::string name;
  Kind kind = Kind::Continuous;
  int k = 0;  // category count, Categorical only
  double lower = 0.0;  // observed min (data-driven bound L_j)
  double upper = 0.0;  // observed max (data-driven bound U_j)
  std::vector<std::string> category_labels;

  double range() const { return upper - lower; }
};

struct SurvivalDataset {
  std::string name;
  Eigen::MatrixXd X;       // n x q, original scale (no standardization)
  Eigen::VectorXd T;       // observation times, > 0
  Eigen::VectorXi delta;   // event indicators in {0,1}
  std::vector<CovariateSpec> specs;
  double t_min = 0.0;      // observed min/max of T, for Phase-2 clamping
  double t_max = 0.0;

  Eigen::Index n() const { return X.rows(); }
  Eigen::Index q() const { return X.cols(); }
  int events() const { return delta.sum(); }

  std::vector<std::string> covariate_names() const {
    std::vector<std::string> out;
    for (const auto& s : specs) out.push_back(s.name);
    return out;
  }
};

struct DatasetRegistryEntry {
  std::string name;
  int n = 0;
  int events = 0;
  int q = 0;
  double event_rate = 0.0;
  std::vector<std::string> significant;  // baseline Cox significant set
};

// The five vendored clinical fixtures (baseline characteristics table).
inline const std::vector<DatasetRegistryEntry>& dataset_registry() {
  static const std::vector<DatasetRegistryEntry> reg = {
      {"lung", 168, 121, 7, 0.720, {"sex", "ph.ecog", "ph.karno"}},
      {"pbc", 312, 125, 17, 0.401,
       {"age", "edema", "bili", "albumin", "copper", "ast", "protime",
        "stage"}},
      {"colon", 929, 468, 11, 0.504,
       {"rxLev+5FU", "nodes", "extent", "surg", "node4"}},
      {"rotterdam", 2982, 1518, 9, 0.509,
       {"age", "meno", "size20-50", "size>50", "grade", "nodes"}},
      {"flchain", 6524, 1962, 7, 0.301,
       {"age", "sex", "sample.yr", "lambda"}},
  };
  return reg;
}

inline const DatasetRegistryEntry* find_registry(const std::string& name) {
  for (const auto& e : dataset_registry())
    if (e.name == name) return &e;
  return nullptr;
}

// Observed min/max bounds; throws DegenerateRange on a constant covariate
// (surfaced, not silently fixed). Also refreshes the T clamp window.
inline void derive_bounds(SurvivalDataset& ds) {
  if (ds.n() == 0) throw ValidationFailure("derive_bounds: empty dataset");
  for (Eigen::Index j = 0; j < ds.q(); ++j) {
    double lo = ds.X.col(j).minCoeff();
    double hi = ds.X.col(j).maxCoeff();
    if (lo == hi)
      throw DegenerateRange("constant covariate: " + ds.specs[j].name);
    ds.specs[j].lower = lo;
    ds.specs[j].upper = hi;
  }
  ds.t_min = ds.T.minCoeff();
  ds.t_max = ds.T.maxCoeff();
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::stringstream ss(line);
  while (std::getline(ss, cur, ',')) out.push_back(cur);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

}  // namespace detail

// Loads a canonical CSV fixture (covariate columns + `time` + `status`)
// with its sidecar metadata JSON. Rows containing empty cells are dropped
// (complete-case). Validates against the registry entry when given one.
inline SurvivalDataset load_dataset(const std::string& csv_path,
                                    const std::string& meta_path,
                                    const DatasetRegistryEntry* expect = nullptr) {
  std::ifstream meta_in(meta_path);
  if (!meta_in) throw ParseError("cannot open metadata: " + meta_path);
  nlohmann::json meta;
  try {
    meta_in >> meta;
  } catch (const std::exception& e) {
    throw ParseError("metadata JSON parse failure: " + std::string(e.what()));
  }

  SurvivalDataset ds;
  ds.name = meta.value("name", std::string{});
  std::vector<CovariateSpec> specs;
  for (const auto& c : meta.at("covariates")) {
    CovariateSpec s;
    s.name = c.at("name").get<std::string>();
    s.kind = kind_from_name(c.at("kind").get<std::string>());
    if (s.kind == Kind::Categorical) {
      s.category_labels = c.at("labels").get<std::vector<std::string>>();
      s.k = static_cast<int>(s.category_labels.size());
      if (s.k < 3) throw ValidationFailure("categorical needs k >= 3: " + s.name);
    }
    specs.push_back(std::move(s));
  }

  std::ifstream in(csv_path);
  if (!in) throw ParseError("cannot open fixture: " + csv_path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty fixture: " + csv_path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  auto header = detail::split_csv_line(line);
  const std::size_t q = specs.size();
  if (header.size() != q + 2)
    throw SchemaMismatch("expected " + std::to_string(q + 2) + " columns, got " +
                         std::to_string(header.size()));
  for (std::size_t j = 0; j < q; ++j)
    if (header[j] != specs[j].name)
      throw SchemaMismatch("column " + std::to_string(j) + " is '" + header[j] +
                           "', expected '" + specs[j].name + "'");
  if (header[q] != "time" || header[q + 1] != "status")
    throw SchemaMismatch("last two columns must be time,status");

  std::vector<std::vector<double>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = detail::split_csv_line(line);
    if (cells.size() != q + 2)
      throw SchemaMismatch("row " + std::to_string(lineno) + ": wrong cell count");
    bool missing = false;
    std::vector<double> vals;
    vals.reserve(q + 2);
    for (const auto& c : cells) {
      if (c.empty() || c == "NA") {
        missing = true;
        break;
      }
      try {
        std::size_t used = 0;
        vals.push_back(std::stod(c, &used));
        if (used != c.size()) throw std::invalid_argument(c);
      } catch (const std::exception&) {
        throw ParseError("row " + std::to_string(lineno) + ": bad number '" + c + "'");
      }
    }
    if (missing) continue;  // complete-case drop
    rows.push_back(std::move(vals));
  }

  const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
  if (n == 0) throw ValidationFailure("no complete rows in " + csv_path);
  ds.X.resize(n, static_cast<Eigen::Index>(q));
  ds.T.resize(n);
  ds.delta.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < q; ++j) ds.X(i, static_cast<Eigen::Index>(j)) = rows[i][j];
    ds.T(i) = rows[i][q];
    ds.delta(i) = static_cast<int>(rows[i][q + 1]);
    if (!(ds.T(i) > 0)) throw ValidationFailure("nonpositive time at row " + std::to_string(i));
    if (ds.delta(i) != 0 && ds.delta(i) != 1)
      throw ValidationFailure("status not in {0,1} at row " + std::to_string(i));
  }
  ds.specs = std::move(specs);
  derive_bounds(ds);

  for (Eigen::Index j = 0; j < ds.q(); ++j) {
    const auto& s = ds.specs[j];
    if (s.kind == Kind::Binary) {
      for (Eigen::Index i = 0; i < n; ++i)
        if (ds.X(i, j) != 0.0 && ds.X(i, j) != 1.0)
          throw ValidationFailure("binary covariate " + s.name + " outside {0,1}");
    } else if (s.kind == Kind::Categorical) {
      for (Eigen::Index i = 0; i < n; ++i) {
        double v = ds.X(i, j);
        if (v != std::floor(v) || v < 0 || v >= s.k)
          throw ValidationFailure("categorical covariate " + s.name + " bad level");
      }
    }
  }

  if (expect) {
    if (static_cast<int>(ds.n()) != expect->n || ds.events() != expect->events ||
        static_cast<int>(ds.q()) != expect->q)
      throw ValidationFailure(
          ds.name + ": (n,events,q)=(" + std::to_string(ds.n()) + "," +
          std::to_string(ds.events()) + "," + std::to_string(ds.q()) +
          ") differs from registry (" + std::to_string(expect->n) + "," +
          std::to_string(expect->events) + "," + std::to_string(expect->q) + ")");
  }
  return ds;
}

// Serializes with enough digits for a bit-exact round-trip.
inline void write_csv(const SurvivalDataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write: " + path);
  for (Eigen::Index j = 0; j < ds.q(); ++j) out << ds.specs[j].name << ",";
  out << "time,status\n";
  out.precision(17);
  for (Eigen::Index i = 0; i < ds.n(); ++i) {
    for (Eigen::Index j = 0; j < ds.q(); ++j) out << ds.X(i, j) << ",";
    out << ds.T(i) << "," << ds.delta(i) << "\n";
  }
}

inline SurvivalDataset subset(const SurvivalDataset& ds,
                              const std::vector<Eigen::Index>& idx) {
  SurvivalDataset out;
  out.name = ds.name;
  out.specs = ds.specs;
  out.t_min = ds.t_min;  // splits inherit the full-data clamp window
  out.t_max = ds.t_max;
  out.X.resize(static_cast<Eigen::Index>(idx.size()), ds.q());
  out.T.resize(static_cast<Eigen::Index>(idx.size()));
  out.delta.resize(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t r = 0; r < idx.size(); ++r) {
    out.X.row(static_cast<Eigen::Index>(r)) = ds.X.row(idx[r]);
    out.T(static_cast<Eigen::Index>(r)) = ds.T(idx[r]);
    out.delta(static_cast<Eigen::Index>(r)) = ds.delta(idx[r]);
  }
  return out;
}

struct SplitIndices {
  std::vector<Eigen::Index> train;
  std::vector<Eigen::Index> test;
};

// 70/30 split stratified on event status. Deterministic rounding rule:
// floor(fraction * stratum size) rows per stratum go to train, the
// remainder to test.
inline SplitIndices stratified_split_indices(const SurvivalDataset& ds,
                                             double train_fraction, Rng& rng) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw ValidationFailure("train_fraction must be in (0,1)");
  std::vector<Eigen::Index> ev, cen;
  for (Eigen::Index i = 0; i < ds.n(); ++i)
    (ds.delta(i) == 1 ? ev : cen).push_back(i);

  auto shuffle = [&rng](std::vector<Eigen::Index>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(rng.next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  };
  shuffle(ev);
  shuffle(cen);

  auto ntr_ev = static_cast<std::size_t>(std::floor(train_fraction * ev.size()));
  auto ntr_cen = static_cast<std::size_t>(std::floor(train_fraction * cen.size()));
  if (ntr_ev == 0 || ntr_ev == ev.size() || ntr_cen == 0 || ntr_cen == cen.size())
    throw TooSmall("a stratum would be empty in train or test");

  SplitIndices out;
  out.train.assign(ev.begin(), ev.begin() + static_cast<std::ptrdiff_t>(ntr_ev));
  out.train.insert(out.train.end(), cen.begin(),
                   cen.begin() + static_cast<std::ptrdiff_t>(ntr_cen));
  out.test.assign(ev.begin() + static_cast<std::ptrdiff_t>(ntr_ev), ev.end());
  out.test.insert(out.test.end(), cen.begin() + static_cast<std::ptrdiff_t>(ntr_cen),
                  cen.end());
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

inline std::pair<SurvivalDataset, SurvivalDataset> stratified_split(
    const SurvivalDataset& ds, double train_fraction, Rng& rng) {
  auto idx = stratified_split_indices(ds, train_fraction, rng);
  return {subset(ds, idx.train), subset(ds, idx.test)};
}

}  // namespace dpsurv
