#pragma once

#include <Eigen/Dense>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "dpsurv/cox.hpp"
#include "dpsurv/dataset.hpp"
#include "dpsurv/error.hpp"
#include "dpsurv/glm.hpp"
#include "dpsurv/metrics.hpp"
#include "dpsurv/perturb.hpp"
#include "dpsurv/rng.hpp"

namespace dpsurv {

inline constexpr const char* kVersion = "1.0.0";

// The 15-value epsilon grid (infinity last).
inline const std::vector<double>& full_epsilon_grid() {
  static const std::vector<double> grid = {0.1, 0.5, 1.0,  2.0,  3.0,
                                           5.0, 7.0, 10.0, 15.0, 30.0,
                                           60.0, 100.0, 250.0, 1000.0,
                                           kInfinity};
  return grid;
}

struct SimulationPlan {
  std::vector<std::string> datasets;
  std::vector<Method> methods = {Method::Phase1, Method::Phase2,
                                 Method::Phase3, Method::OutputDfbeta};
  std::vector<double> epsilons = full_epsilon_grid();
  int iterations = 1000;
  std::uint64_t base_seed = 42;
  double train_fraction = 0.7;
  int workers = 1;
};

// ---------- deterministic stream keying ----------

// Streams are keyed by *values*, not plan positions: the dataset key is a
// hash of its name and the epsilon key is the IEEE-754 bit pattern, so a run
// restricted to a subset of conditions reproduces exactly the records of the
// full grid.
inline std::uint64_t dataset_key(const std::string& name) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : name) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t eps_key(double eps) {
  std::uint64_t bits;
  std::memcpy(&bits, &eps, sizeof(bits));
  return bits;
}

inline std::uint64_t method_key(Method m) {
  return static_cast<std::uint64_t>(m);
}

// Substream ids within one (dataset, method, eps, b) cell.
enum class Substream : std::uint64_t { Split = 0, FullFit = 1, TrainFit = 2 };

// The split substream deliberately omits the method key so that, at fixed
// (dataset, eps, b), every method sees the same 70/30 partition and method
// comparisons are paired.
inline Rng split_stream(std::uint64_t seed, std::uint64_t dskey, double eps,
                        int b) {
  return Rng{seed, dskey, eps_key(eps), static_cast<std::uint64_t>(b),
             static_cast<std::uint64_t>(Substream::Split)};
}

inline Rng method_stream(std::uint64_t seed, std::uint64_t dskey, Method m,
                         double eps, int b, Substream sub) {
  return Rng{seed, dskey, method_key(m), eps_key(eps),
             static_cast<std::uint64_t>(b), static_cast<std::uint64_t>(sub)};
}

// ---------- per-dataset precomputation ----------

struct DatasetContext {
  SurvivalDataset ds;
  CoxFit clean;               // full-data Cox baseline
  Eigen::VectorXd sens;       // dfbeta sensitivity per coefficient
  SturgesIntervals intervals; // from the full dataset; subsets reuse them
  Eigen::VectorXi kstar;      // full-data exit intervals
  MetricsConfig baseline;     // Cox + eps=inf GLM references
  std::uint64_t key = 0;
};

inline DatasetContext make_context(SurvivalDataset ds) {
  DatasetContext ctx;
  ctx.ds = std::move(ds);
  ctx.key = dataset_key(ctx.ds.name);
  ctx.baseline = compute_baseline(ctx.ds);
  ctx.clean = fit_cox(ctx.ds);
  ctx.sens = dfbeta_sensitivity(compute_dfbeta(ctx.clean, ctx.ds));
  ctx.intervals = sturges_intervals(ctx.ds);
  ctx.kstar = exit_intervals(ctx.ds, ctx.intervals.cuts);
  return ctx;
}

// ---------- one simulation iteration ----------

namespace detail {

inline Eigen::VectorXi gather_int(const Eigen::VectorXi& v,
                                  const std::vector<Eigen::Index>& idx) {
  Eigen::VectorXi out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out(static_cast<Eigen::Index>(i)) = v(idx[i]);
  return out;
}

// Cox fit that degrades to "not converged" instead of throwing on the
// numerical failures DP noise can provoke.
inline bool try_fit_cox(const SurvivalDataset& ds, CoxFit* out) {
  try {
    *out = fit_cox(ds);
    return out->converged;
  } catch (const Error&) {
    return false;
  }
}

inline double safe_concordance(const Eigen::VectorXd& T,
                               const Eigen::VectorXi& delta,
                               const Eigen::VectorXd& risk) {
  try {
    return concordance(T, delta, risk);
  } catch (const Error&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

}  // namespace detail

// Runs the full protocol for one (method, eps, b): p-values/HRs from a fit on
// the perturbed full dataset; train/test C from a fit on the perturbed train
// part scored on clean covariates and clean test outcomes.
inline SimulationRecord run_iteration(const DatasetContext& ctx, Method method,
                                      double eps, int b, std::uint64_t seed,
                                      double train_fraction) {
  const SurvivalDataset& ds = ctx.ds;
  const Eigen::Index q = ds.q();

  SimulationRecord rec;
  rec.dataset = ds.name;
  rec.method = method;
  rec.epsilon = eps;
  rec.iter = b;
  rec.p_value = Eigen::VectorXd::Constant(q, std::numeric_limits<double>::quiet_NaN());
  rec.hr = Eigen::VectorXd::Constant(q, std::numeric_limits<double>::quiet_NaN());

  Rng rsplit = split_stream(seed, ctx.key, eps, b);
  SplitIndices split = stratified_split_indices(ds, train_fraction, rsplit);
  SurvivalDataset train = subset(ds, split.train);
  SurvivalDataset test = subset(ds, split.test);

  Rng rfull = method_stream(seed, ctx.key, method, eps, b, Substream::FullFit);
  Rng rtrain = method_stream(seed, ctx.key, method, eps, b, Substream::TrainFit);

  auto score_train_test = [&](const Eigen::VectorXd& beta) {
    rec.train_c = detail::safe_concordance(train.T, train.delta, train.X * beta);
    rec.test_c = detail::safe_concordance(test.T, test.delta, test.X * beta);
  };

  switch (method) {
    case Method::Phase1: {
      SurvivalDataset pf = phase1(ds, eps, rfull);
      CoxFit f;
      if (detail::try_fit_cox(pf, &f)) {
        rec.converged = true;
        rec.p_value = f.p_value;
        rec.hr = f.hr;
      }
      SurvivalDataset pt = phase1(train, eps, rtrain);
      CoxFit ft;
      if (detail::try_fit_cox(pt, &ft)) score_train_test(ft.beta);
      break;
    }
    case Method::Phase2: {
      SurvivalDataset pf = phase2(ds, eps, rfull);
      CoxFit f;
      if (detail::try_fit_cox(pf, &f)) {
        rec.converged = true;
        rec.p_value = f.p_value;
        rec.hr = f.hr;
      }
      SurvivalDataset pt = phase2(train, eps, rtrain);
      CoxFit ft;
      if (detail::try_fit_cox(pt, &ft)) score_train_test(ft.beta);
      break;
    }
    case Method::Phase3: {
      try {
        Phase3Result pf = phase3(ds, ctx.intervals, ctx.kstar, eps, rfull);
        rec.separation = pf.fit.separation;
        if (pf.fit.converged) {
          rec.converged = true;
          rec.p_value = pf.fit.p_value.head(q);
          rec.hr = pf.fit.coefficients.head(q).array().exp();
        }
      } catch (const Error&) {
      }
      try {
        Eigen::VectorXi ktr = detail::gather_int(ctx.kstar, split.train);
        Phase3Result pt = phase3(train, ctx.intervals, ktr, eps, rtrain);
        // risk scores from covariate coefficients only; interval effects are
        // baseline-hazard analogues, not subject risk
        if (pt.fit.converged) score_train_test(pt.fit.coefficients.head(q));
      } catch (const Error&) {
      }
      break;
    }
    case Method::OutputDfbeta: {
      CoxFit noisy = output_dfbeta(ctx.clean, ctx.sens, eps, rfull);
      rec.converged = true;
      rec.p_value = noisy.p_value;
      rec.hr = noisy.hr;
      CoxFit ftr;
      if (detail::try_fit_cox(train, &ftr)) {
        try {
          Eigen::VectorXd s = dfbeta_sensitivity(compute_dfbeta(ftr, train));
          CoxFit nt = output_dfbeta(ftr, s, eps, rtrain);
          score_train_test(nt.beta);
        } catch (const Error&) {
        }
      }
      break;
    }
  }
  return rec;
}

// ---------- grid runner ----------

// Work items are preassigned record slots; workers claim items from an atomic
// counter and write only their own slot, so the record vector is a pure
// function of (plan, fixtures) regardless of worker count or scheduling.
inline std::vector<SimulationRecord> run_dataset(
    const DatasetContext& ctx, const SimulationPlan& plan,
    const std::function<void(int, int)>& progress = {}) {
  const int nm = static_cast<int>(plan.methods.size());
  const int ne = static_cast<int>(plan.epsilons.size());
  const int B = plan.iterations;
  const int total = nm * ne * B;
  std::vector<SimulationRecord> records(static_cast<std::size_t>(total));

  std::atomic<int> next{0};
  std::atomic<int> done{0};
  auto worker = [&]() {
    for (;;) {
      const int slot = next.fetch_add(1);
      if (slot >= total) return;
      const int mi = slot / (ne * B);
      const int ei = (slot / B) % ne;
      const int b = slot % B;
      records[static_cast<std::size_t>(slot)] =
          run_iteration(ctx, plan.methods[static_cast<std::size_t>(mi)],
                        plan.epsilons[static_cast<std::size_t>(ei)], b,
                        plan.base_seed, plan.train_fraction);
      const int d = done.fetch_add(1) + 1;
      if (progress && (d % B == 0 || d == total)) progress(d, total);
    }
  };
  const int nw = std::max(1, plan.workers);
  if (nw == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(nw));
    for (int i = 0; i < nw; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return records;
}

// ---------- number formatting (shortest round-trip) ----------

namespace detail {

inline std::string fmt_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s) {
  if (s == "inf") return kInfinity;
  if (s == "-inf") return -kInfinity;
  if (s == "nan" || s.empty()) return std::numeric_limits<double>::quiet_NaN();
  try {
    return std::stod(s);
  } catch (const std::exception&) {
    throw ParseError("bad number: '" + s + "'");
  }
}

}  // namespace detail

inline std::string format_epsilon(double eps) {
  return detail::fmt_double(eps);
}

inline double parse_epsilon(const std::string& s) {
  double v = detail::parse_double(s);
  if (std::isnan(v) || v <= 0) throw ValidationFailure("epsilon must be > 0 or inf");
  return v;
}

// ---------- record persistence ----------

// Long-format record CSV: one row per (iteration, variable); the C columns
// repeat the per-iteration values on each of its variable rows.
inline void write_records_csv(const std::vector<SimulationRecord>& records,
                              const std::vector<std::string>& variables,
                              const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write: " + path);
  out << "dataset,method,epsilon,iter,variable,p_value,hr,converged,train_c,test_c\n";
  for (const auto& r : records) {
    for (std::size_t j = 0; j < variables.size(); ++j) {
      out << r.dataset << ',' << method_name(r.method) << ','
          << format_epsilon(r.epsilon) << ',' << r.iter << ',' << variables[j]
          << ',' << detail::fmt_double(r.p_value(static_cast<Eigen::Index>(j)))
          << ',' << detail::fmt_double(r.hr(static_cast<Eigen::Index>(j)))
          << ',' << (r.converged ? 1 : 0) << ','
          << detail::fmt_double(r.train_c) << ','
          << detail::fmt_double(r.test_c) << '\n';
    }
  }
}

inline std::vector<SimulationRecord> read_records_csv(
    const std::string& path, const std::vector<std::string>& variables) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open records: " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty records file: " + path);
  const Eigen::Index q = static_cast<Eigen::Index>(variables.size());
  std::map<std::string, Eigen::Index> varidx;
  for (Eigen::Index j = 0; j < q; ++j) varidx[variables[static_cast<std::size_t>(j)]] = j;

  std::vector<SimulationRecord> out;
  std::map<std::string, std::size_t> slot;  // (method|eps|iter) -> record
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = dpsurv::detail::split_csv_line(line);
    if (cells.size() != 10) throw ParseError("bad record row: " + line);
    const std::string key = cells[1] + "|" + cells[2] + "|" + cells[3];
    auto it = slot.find(key);
    if (it == slot.end()) {
      SimulationRecord r;
      r.dataset = cells[0];
      r.method = method_from_name(cells[1]);
      r.epsilon = detail::parse_double(cells[2]);
      r.iter = std::stoi(cells[3]);
      r.p_value = Eigen::VectorXd::Constant(q, std::numeric_limits<double>::quiet_NaN());
      r.hr = Eigen::VectorXd::Constant(q, std::numeric_limits<double>::quiet_NaN());
      it = slot.emplace(key, out.size()).first;
      out.push_back(std::move(r));
    }
    SimulationRecord& r = out[it->second];
    auto vj = varidx.find(cells[4]);
    if (vj == varidx.end()) throw SchemaMismatch("unknown variable: " + cells[4]);
    r.p_value(vj->second) = detail::parse_double(cells[5]);
    r.hr(vj->second) = detail::parse_double(cells[6]);
    r.converged = cells[7] == "1";
    r.train_c = detail::parse_double(cells[8]);
    r.test_c = detail::parse_double(cells[9]);
  }
  return out;
}

// ---------- summaries over the grid ----------

struct GridSummary {
  // per (method, eps) in plan order
  std::vector<Method> methods;
  std::vector<double> epsilons;
  std::map<std::pair<int, int>, MetricSummary> cells;  // (method idx, eps idx)

  const MetricSummary& at(int mi, int ei) const { return cells.at({mi, ei}); }
};

inline GridSummary summarize_grid(const std::vector<SimulationRecord>& records,
                                  const MetricsConfig& cfg) {
  GridSummary gs;
  std::map<std::pair<std::string, double>, std::vector<SimulationRecord>> groups;
  for (const auto& r : records)
    groups[{method_name(r.method), r.epsilon}].push_back(r);

  std::map<std::string, int> mseen;
  std::map<double, int> eseen;
  for (Method m : {Method::Phase1, Method::Phase2, Method::Phase3,
                   Method::OutputDfbeta}) {
    if (std::any_of(groups.begin(), groups.end(), [&](const auto& g) {
          return g.first.first == method_name(m);
        })) {
      mseen[method_name(m)] = static_cast<int>(gs.methods.size());
      gs.methods.push_back(m);
    }
  }
  for (const auto& [k, v] : groups)
    if (!eseen.count(k.second)) eseen[k.second] = 0;
  // epsilons ascending with infinity last (map order already does that)
  for (const auto& [e, _] : eseen) gs.epsilons.push_back(e);
  for (std::size_t i = 0; i < gs.epsilons.size(); ++i) eseen[gs.epsilons[i]] = static_cast<int>(i);

  for (const auto& [k, v] : groups) {
    const int mi = mseen[k.first];
    const int ei = eseen[k.second];
    gs.cells[{mi, ei}] = summarize_cell(v, cfg, method_from_name(k.first), k.second);
  }
  return gs;
}

// ---------- thresholds (practical-epsilon table) ----------

struct ThresholdRow {
  std::string dataset;
  Method method = Method::Phase1;
  std::string eps_dc05;   // grid value, ">1000", or "-"
  std::string eps_lsr50;
  std::string eps_lsr10;
  std::string eps_fpr10;
};

namespace detail {

inline std::string grid_label(double e) { return fmt_double(e); }

}  // namespace detail

// Requires summaries over the complete canonical grid (IncompleteGrid
// otherwise). eps_fpr10 uses the permanent-below rule: the first finite grid
// epsilon from which mean FPR stays <= 0.10 through the end of the grid;
// "-" when FPR <= 0.10 everywhere (or metric not applicable: Output rows).
inline ThresholdRow threshold_row(const GridSummary& gs, int mi,
                                  const std::string& dataset) {
  const auto& grid = full_epsilon_grid();
  std::vector<int> eidx;
  for (double g : grid) {
    auto it = std::find(gs.epsilons.begin(), gs.epsilons.end(), g);
    if (it == gs.epsilons.end())
      throw IncompleteGrid("missing epsilon " + detail::fmt_double(g));
    eidx.push_back(static_cast<int>(it - gs.epsilons.begin()));
  }
  const int nfin = static_cast<int>(grid.size()) - 1;  // infinity last

  ThresholdRow row;
  row.dataset = dataset;
  row.method = gs.methods[static_cast<std::size_t>(mi)];
  const double c_inf = gs.at(mi, eidx.back()).mean_test_c;

  row.eps_dc05 = ">1000";
  for (int i = 0; i < nfin; ++i) {
    const double tc = gs.at(mi, eidx[static_cast<std::size_t>(i)]).mean_test_c;
    if (c_inf - tc <= 0.05) {
      row.eps_dc05 = detail::grid_label(grid[static_cast<std::size_t>(i)]);
      break;
    }
  }
  auto first_below = [&](double cut) -> std::string {
    for (int i = 0; i < nfin; ++i) {
      if (gs.at(mi, eidx[static_cast<std::size_t>(i)]).mean_lsr <= cut)
        return detail::grid_label(grid[static_cast<std::size_t>(i)]);
    }
    return ">1000";
  };
  row.eps_lsr50 = first_below(0.50);
  row.eps_lsr10 = first_below(0.10);

  if (row.method == Method::OutputDfbeta) {
    row.eps_fpr10 = "-";  // output perturbation never flips nonsignificant SEs
  } else {
    int ok_from = -1;
    bool all_ok = true;
    for (int i = 0; i < nfin; ++i) {
      const double f = gs.at(mi, eidx[static_cast<std::size_t>(i)]).mean_fpr;
      if (std::isnan(f) || f <= 0.10) {
        if (ok_from < 0) ok_from = i;
      } else {
        ok_from = -1;
        all_ok = false;
      }
    }
    if (all_ok)
      row.eps_fpr10 = "-";
    else if (ok_from < 0)
      row.eps_fpr10 = ">1000";
    else
      row.eps_fpr10 = detail::grid_label(grid[static_cast<std::size_t>(ok_from)]);
  }
  return row;
}

inline std::vector<ThresholdRow> thresholds(const GridSummary& gs,
                                            const std::string& dataset) {
  std::vector<ThresholdRow> out;
  for (std::size_t mi = 0; mi < gs.methods.size(); ++mi)
    out.push_back(threshold_row(gs, static_cast<int>(mi), dataset));
  return out;
}

inline void write_thresholds_csv(const std::vector<ThresholdRow>& rows,
                                 const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write: " + path);
  out << "dataset,method,eps_dc05,eps_lsr50,eps_lsr10,eps_fpr10\n";
  for (const auto& r : rows)
    out << r.dataset << ',' << method_name(r.method) << ',' << r.eps_dc05 << ','
        << r.eps_lsr50 << ',' << r.eps_lsr10 << ',' << r.eps_fpr10 << '\n';
}

// ---------- summary / plot-data emission ----------

inline void write_summary_csv(const GridSummary& gs, const std::string& dataset,
                              const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write: " + path);
  out << "dataset,method,epsilon,records,mean_lsr,mean_fpr,mean_train_c,"
         "mean_test_c,sd_test_c,delta_c,nonconverged_rate\n";
  for (std::size_t mi = 0; mi < gs.methods.size(); ++mi) {
    double c_inf = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t ei = 0; ei < gs.epsilons.size(); ++ei)
      if (std::isinf(gs.epsilons[ei]))
        c_inf = gs.at(static_cast<int>(mi), static_cast<int>(ei)).mean_test_c;
    for (std::size_t ei = 0; ei < gs.epsilons.size(); ++ei) {
      const auto& s = gs.at(static_cast<int>(mi), static_cast<int>(ei));
      out << dataset << ',' << method_name(gs.methods[mi]) << ','
          << format_epsilon(gs.epsilons[ei]) << ',' << s.records << ','
          << detail::fmt_double(s.mean_lsr) << ','
          << detail::fmt_double(s.mean_fpr) << ','
          << detail::fmt_double(s.mean_train_c) << ','
          << detail::fmt_double(s.mean_test_c) << ','
          << detail::fmt_double(s.sd_test_c) << ','
          << detail::fmt_double(c_inf - s.mean_test_c) << ','
          << detail::fmt_double(s.nonconverged_rate) << '\n';
    }
  }
}

// Plot-ready data: per-variable LSR/FPR/bias curves (Figs. 1 and 4), the
// C-index ribbons (Fig. 2), and HR summaries for the top-5 covariates by
// descending baseline coefficient (Fig. 3).
inline void write_plot_data(const GridSummary& gs, const MetricsConfig& cfg,
                            const Eigen::VectorXd& clean_beta,
                            const std::string& dataset,
                            const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  {
    std::ofstream out(dir + "/lsr_fpr_by_variable.csv");
    out << "dataset,method,epsilon,variable,lsr,fpr,signed_hr_bias,abs_hr_bias\n";
    for (std::size_t mi = 0; mi < gs.methods.size(); ++mi)
      for (std::size_t ei = 0; ei < gs.epsilons.size(); ++ei) {
        const auto& s = gs.at(static_cast<int>(mi), static_cast<int>(ei));
        for (std::size_t j = 0; j < cfg.variables.size(); ++j) {
          const auto J = static_cast<Eigen::Index>(j);
          out << dataset << ',' << method_name(gs.methods[mi]) << ','
              << format_epsilon(gs.epsilons[ei]) << ',' << cfg.variables[j]
              << ',' << detail::fmt_double(s.lsr(J)) << ','
              << detail::fmt_double(s.fpr(J)) << ','
              << detail::fmt_double(s.bias(J)) << ','
              << detail::fmt_double(s.abs_bias(J)) << '\n';
        }
      }
  }
  {
    std::ofstream out(dir + "/cindex_ribbon.csv");
    out << "dataset,method,epsilon,mean_test_c,sd_test_c,mean_train_c\n";
    for (std::size_t mi = 0; mi < gs.methods.size(); ++mi)
      for (std::size_t ei = 0; ei < gs.epsilons.size(); ++ei) {
        const auto& s = gs.at(static_cast<int>(mi), static_cast<int>(ei));
        out << dataset << ',' << method_name(gs.methods[mi]) << ','
            << format_epsilon(gs.epsilons[ei]) << ','
            << detail::fmt_double(s.mean_test_c) << ','
            << detail::fmt_double(s.sd_test_c) << ','
            << detail::fmt_double(s.mean_train_c) << '\n';
      }
  }
  {
    // top-5 covariates by descending baseline coefficient
    std::vector<Eigen::Index> ord(static_cast<std::size_t>(clean_beta.size()));
    std::iota(ord.begin(), ord.end(), Eigen::Index{0});
    std::stable_sort(ord.begin(), ord.end(), [&](Eigen::Index a, Eigen::Index b) {
      return clean_beta(a) > clean_beta(b);
    });
    if (ord.size() > 5) ord.resize(5);
    std::ofstream out(dir + "/hr_top5.csv");
    out << "dataset,method,epsilon,variable,baseline_hr,mean_hr\n";
    for (std::size_t mi = 0; mi < gs.methods.size(); ++mi)
      for (std::size_t ei = 0; ei < gs.epsilons.size(); ++ei) {
        const auto& s = gs.at(static_cast<int>(mi), static_cast<int>(ei));
        for (Eigen::Index j : ord) {
          out << dataset << ',' << method_name(gs.methods[mi]) << ','
              << format_epsilon(gs.epsilons[ei]) << ','
              << cfg.variables[static_cast<std::size_t>(j)] << ','
              << detail::fmt_double(cfg.hr_cox(j)) << ','
              << detail::fmt_double(s.mean_hr(j)) << '\n';
        }
      }
  }
}

// ---------- run manifest ----------

inline nlohmann::json plan_manifest(const SimulationPlan& plan,
                                    const std::map<std::string, std::string>& fixture_hashes) {
  nlohmann::json j;
  j["version"] = kVersion;
  j["base_seed"] = plan.base_seed;
  j["iterations"] = plan.iterations;
  j["train_fraction"] = plan.train_fraction;
  j["datasets"] = plan.datasets;
  std::vector<std::string> ms;
  for (Method m : plan.methods) ms.push_back(method_name(m));
  j["methods"] = ms;
  std::vector<std::string> es;
  for (double e : plan.epsilons) es.push_back(format_epsilon(e));
  j["epsilons"] = es;
  j["fixtures"] = fixture_hashes;
  return j;
}

inline std::string file_hash_hex(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open for hashing: " + path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[8192];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
    if (!in) break;
  }
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

}  // namespace dpsurv
