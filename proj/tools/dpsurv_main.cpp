// Command-line entry point: fit, perturb, simulate, summarize, thresholds,
// report. Exit codes: 0 success, 1 usage error, 2 data/validation error,
// 3 fatal numerical failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "dpsurv/cox.hpp"
#include "dpsurv/dataset.hpp"
#include "dpsurv/harness.hpp"
#include "dpsurv/metrics.hpp"
#include "dpsurv/perturb.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct DatasetArgs {
  std::string dataset;   // registry name or CSV path
  std::string meta;      // sidecar metadata (derived from csv path if empty)
  std::string data_dir = "data";
};

void add_dataset_flags(CLI::App* cmd, DatasetArgs* args) {
  cmd->add_option("--dataset", args->dataset,
                  "Registry dataset name or path to a CSV fixture")
      ->required();
  cmd->add_option("--meta", args->meta,
                  "Sidecar metadata JSON (defaults to <csv>.meta.json)");
  cmd->add_option("--data-dir", args->data_dir,
                  "Directory holding the vendored fixtures");
}

dpsurv::SurvivalDataset load_from_args(const DatasetArgs& args) {
  const auto* reg = dpsurv::find_registry(args.dataset);
  if (reg) {
    const std::string csv = args.data_dir + "/" + args.dataset + ".csv";
    const std::string meta =
        args.meta.empty() ? args.data_dir + "/" + args.dataset + ".meta.json"
                          : args.meta;
    return dpsurv::load_dataset(csv, meta, reg);
  }
  if (!fs::exists(args.dataset)) {
    std::string names;
    for (const auto& e : dpsurv::dataset_registry()) names += " " + e.name;
    throw dpsurv::ValidationFailure("unknown dataset '" + args.dataset +
                                    "' (registry:" + names +
                                    "), and no such file exists");
  }
  std::string meta = args.meta;
  if (meta.empty()) {
    meta = args.dataset;
    const auto dot = meta.rfind(".csv");
    if (dot != std::string::npos) meta.erase(dot);
    meta += ".meta.json";
  }
  return dpsurv::load_dataset(args.dataset, meta, nullptr);
}

std::vector<double> parse_eps_list(const std::vector<std::string>& raw) {
  std::vector<double> out;
  for (const auto& s : raw) {
    if (s == "all") {
      for (double e : dpsurv::full_epsilon_grid()) out.push_back(e);
    } else {
      out.push_back(dpsurv::parse_epsilon(s));
    }
  }
  if (out.empty())
    for (double e : dpsurv::full_epsilon_grid()) out.push_back(e);
  return out;
}

std::string default_out_dir() {
  const char* env = std::getenv("DPSURV_OUT");
  return env ? env : "out";
}

json fit_to_json(const dpsurv::CoxFit& fit,
                 const std::vector<std::string>& names) {
  json j;
  j["converged"] = fit.converged;
  j["iterations"] = fit.iterations;
  j["log_partial_likelihood"] = fit.log_partial_likelihood;
  json vars = json::array();
  for (Eigen::Index i = 0; i < fit.beta.size(); ++i) {
    vars.push_back({{"name", names[static_cast<std::size_t>(i)]},
                    {"beta", fit.beta(i)},
                    {"se", fit.se(i)},
                    {"z", fit.wald_z(i)},
                    {"p", fit.p_value(i)},
                    {"hr", fit.hr(i)}});
  }
  j["coefficients"] = vars;
  return j;
}

void print_fit_table(const dpsurv::SurvivalDataset& ds,
                     const dpsurv::CoxFit& fit) {
  const double c = dpsurv::concordance(ds.T, ds.delta, ds.X * fit.beta);
  std::cout << "dataset: " << ds.name << "  n=" << ds.n()
            << "  events=" << ds.events() << "  q=" << ds.q() << "\n";
  std::cout << "converged: " << (fit.converged ? "yes" : "no")
            << "  iterations: " << fit.iterations
            << "  log-partial-likelihood: " << std::setprecision(6)
            << fit.log_partial_likelihood << "\n";
  std::cout << "in-sample C-index: " << std::fixed << std::setprecision(3) << c
            << "\n\n";
  std::cout << std::left << std::setw(14) << "variable" << std::right
            << std::setw(10) << "beta" << std::setw(10) << "se" << std::setw(9)
            << "z" << std::setw(11) << "p" << std::setw(9) << "HR"
            << "  sig\n";
  int nsig = 0;
  for (Eigen::Index j = 0; j < ds.q(); ++j) {
    const bool sig = fit.p_value(j) < 0.05;
    nsig += sig;
    std::cout << std::left << std::setw(14) << ds.specs[static_cast<std::size_t>(j)].name
              << std::right << std::fixed << std::setprecision(4)
              << std::setw(10) << fit.beta(j) << std::setw(10) << fit.se(j)
              << std::setw(9) << std::setprecision(2) << fit.wald_z(j)
              << std::setw(11) << std::scientific << std::setprecision(2)
              << fit.p_value(j) << std::setw(9) << std::fixed
              << std::setprecision(3) << fit.hr(j) << (sig ? "    *" : "")
              << "\n";
  }
  std::cout << "\nsignificant (p<0.05): " << nsig << "/" << ds.q() << "\n";
}

std::string records_path(const std::string& dir, const std::string& dataset,
                         dpsurv::Method m) {
  return dir + "/records_" + dataset + "_" + dpsurv::method_name(m) + ".csv";
}

std::vector<dpsurv::SimulationRecord> read_all_records(
    const std::string& dir, const dpsurv::SurvivalDataset& ds,
    const std::vector<dpsurv::Method>& methods) {
  std::vector<dpsurv::SimulationRecord> all;
  std::vector<std::string> missing;
  for (dpsurv::Method m : methods) {
    const std::string p = records_path(dir, ds.name, m);
    if (!fs::exists(p)) {
      missing.push_back(p);
      continue;
    }
    auto recs = dpsurv::read_records_csv(p, ds.covariate_names());
    all.insert(all.end(), recs.begin(), recs.end());
  }
  if (all.empty()) {
    std::string msg = "no record files found in " + dir + " for " + ds.name;
    for (const auto& p : missing) msg += "\n  looked for: " + p;
    throw dpsurv::ValidationFailure(msg);
  }
  return all;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Privacy-preserving survival analysis benchmark"};
  app.require_subcommand(1);

  // ---- fit ----
  DatasetArgs fit_args;
  bool fit_json = false;
  auto* cmd_fit = app.add_subcommand("fit", "Fit the Cox baseline and print a coefficient table");
  add_dataset_flags(cmd_fit, &fit_args);
  cmd_fit->add_flag("--json", fit_json, "Emit machine-readable JSON");

  // ---- perturb ----
  DatasetArgs pert_args;
  std::string pert_method = "phase1";
  std::string pert_eps = "1";
  std::uint64_t pert_seed = 42;
  int pert_iter = 0;
  std::string pert_out;
  auto* cmd_pert = app.add_subcommand("perturb", "Apply one perturbation method once and write the result");
  add_dataset_flags(cmd_pert, &pert_args);
  cmd_pert->add_option("--method", pert_method, "phase1|phase2|phase3|output")->required();
  cmd_pert->add_option("--eps", pert_eps, "Privacy budget (inf for identity)")->required();
  cmd_pert->add_option("--seed", pert_seed, "Base seed (default 42)");
  cmd_pert->add_option("--iter", pert_iter, "Iteration index for the RNG stream");
  cmd_pert->add_option("--out", pert_out, "Output file (CSV for input phases, JSON for output)")->required();

  // ---- simulate ----
  DatasetArgs sim_args;
  std::vector<std::string> sim_methods = {"phase1", "phase2", "phase3", "output"};
  std::vector<std::string> sim_eps;
  int sim_iters = 1000;
  std::uint64_t sim_seed = 42;
  double sim_frac = 0.7;
  int sim_workers = 1;
  std::string sim_out = default_out_dir();
  auto* cmd_sim = app.add_subcommand("simulate", "Run the Monte Carlo grid and persist records");
  add_dataset_flags(cmd_sim, &sim_args);
  cmd_sim->add_option("--method", sim_methods, "Methods to run");
  cmd_sim->add_option("--eps", sim_eps, "Epsilon values ('all' for the 15-value grid, 'inf' allowed)");
  cmd_sim->add_option("--iters", sim_iters, "Iterations per condition (default 1000)");
  cmd_sim->add_option("--seed", sim_seed, "Base seed (default 42)");
  cmd_sim->add_option("--train-fraction", sim_frac, "Train fraction (default 0.7)");
  cmd_sim->add_option("--workers", sim_workers, "Worker threads (results are worker-count invariant)");
  cmd_sim->add_option("--out", sim_out, "Output directory (or $DPSURV_OUT)");

  // ---- summarize ----
  DatasetArgs sum_args;
  std::string sum_records = default_out_dir();
  std::string sum_out;
  auto* cmd_sum = app.add_subcommand("summarize", "Aggregate records into per-condition metrics");
  add_dataset_flags(cmd_sum, &sum_args);
  cmd_sum->add_option("--records", sum_records, "Directory with record CSVs");
  cmd_sum->add_option("--out", sum_out, "Summary CSV path (default <records>/summary_<dataset>.csv)");

  // ---- thresholds ----
  DatasetArgs thr_args;
  std::string thr_records = default_out_dir();
  std::string thr_out;
  auto* cmd_thr = app.add_subcommand("thresholds", "Extract practical-epsilon threshold rows");
  add_dataset_flags(cmd_thr, &thr_args);
  cmd_thr->add_option("--records", thr_records, "Directory with record CSVs");
  cmd_thr->add_option("--out", thr_out, "Threshold CSV path (default <records>/thresholds_<dataset>.csv)");

  // ---- report ----
  DatasetArgs rep_args;
  std::string rep_records = default_out_dir();
  std::string rep_out;
  auto* cmd_rep = app.add_subcommand("report", "Emit summary + plot-data bundle from records");
  add_dataset_flags(cmd_rep, &rep_args);
  cmd_rep->add_option("--records", rep_records, "Directory with record CSVs");
  cmd_rep->add_option("--out", rep_out, "Report directory (default <records>/report_<dataset>)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (cmd_fit->parsed()) {
      auto ds = load_from_args(fit_args);
      auto fit = dpsurv::fit_cox(ds);
      if (fit_json)
        std::cout << fit_to_json(fit, ds.covariate_names()).dump(2) << "\n";
      else
        print_fit_table(ds, fit);
      return 0;
    }

    if (cmd_pert->parsed()) {
      auto ds = load_from_args(pert_args);
      const auto method = dpsurv::method_from_name(pert_method);
      const double eps = dpsurv::parse_epsilon(pert_eps);
      dpsurv::Rng rng = dpsurv::method_stream(
          pert_seed, dpsurv::dataset_key(ds.name), method, eps, pert_iter,
          dpsurv::Substream::FullFit);
      switch (method) {
        case dpsurv::Method::Phase1:
          dpsurv::write_csv(dpsurv::phase1(ds, eps, rng), pert_out);
          break;
        case dpsurv::Method::Phase2:
          dpsurv::write_csv(dpsurv::phase2(ds, eps, rng), pert_out);
          break;
        case dpsurv::Method::Phase3: {
          auto res = dpsurv::phase3(ds, eps, rng);
          std::ofstream out(pert_out);
          if (!out) throw dpsurv::ParseError("cannot write: " + pert_out);
          for (const auto& s : ds.specs) out << s.name << ",";
          for (int k = 1; k <= res.stacked.K; ++k) out << "interval" << k << ",";
          out << "y,subject\n";
          out.precision(17);
          for (Eigen::Index r = 0; r < res.stacked.D.rows(); ++r) {
            for (Eigen::Index c = 0; c < res.stacked.D.cols(); ++c)
              out << res.stacked.D(r, c) << ",";
            out << res.stacked.y(r) << "," << res.stacked.subject(r) << "\n";
          }
          break;
        }
        case dpsurv::Method::OutputDfbeta: {
          auto noisy = dpsurv::output_dfbeta(ds, eps, rng);
          std::ofstream out(pert_out);
          if (!out) throw dpsurv::ParseError("cannot write: " + pert_out);
          out << fit_to_json(noisy, ds.covariate_names()).dump(2) << "\n";
          break;
        }
      }
      std::cout << "wrote " << pert_out << "\n";
      return 0;
    }

    if (cmd_sim->parsed()) {
      auto ds = load_from_args(sim_args);
      dpsurv::SimulationPlan plan;
      plan.datasets = {ds.name};
      plan.methods.clear();
      for (const auto& m : sim_methods)
        plan.methods.push_back(dpsurv::method_from_name(m));
      plan.epsilons = parse_eps_list(sim_eps);
      plan.iterations = sim_iters;
      plan.base_seed = sim_seed;
      plan.train_fraction = sim_frac;
      plan.workers = sim_workers;

      fs::create_directories(sim_out);
      auto ctx = dpsurv::make_context(ds);
      auto records = dpsurv::run_dataset(ctx, plan, [&](int d, int t) {
        std::cout << "\r" << ds.name << ": " << d << "/" << t << std::flush;
      });
      std::cout << "\n";

      // one record CSV per (dataset, method)
      for (std::size_t mi = 0; mi < plan.methods.size(); ++mi) {
        std::vector<dpsurv::SimulationRecord> part;
        for (const auto& r : records)
          if (r.method == plan.methods[mi]) part.push_back(r);
        dpsurv::write_records_csv(part, ds.covariate_names(),
                                  records_path(sim_out, ds.name, plan.methods[mi]));
      }
      std::map<std::string, std::string> hashes;
      const auto* reg = dpsurv::find_registry(sim_args.dataset);
      if (reg) {
        const std::string csv = sim_args.data_dir + "/" + ds.name + ".csv";
        if (fs::exists(csv)) hashes[ds.name] = dpsurv::file_hash_hex(csv);
      }
      std::ofstream mf(sim_out + "/manifest_" + ds.name + ".json");
      mf << dpsurv::plan_manifest(plan, hashes).dump(2) << "\n";
      std::cout << "wrote records for " << plan.methods.size()
                << " method(s) to " << sim_out << "\n";
      return 0;
    }

    const bool do_sum = cmd_sum->parsed();
    const bool do_thr = cmd_thr->parsed();
    const bool do_rep = cmd_rep->parsed();
    if (do_sum || do_thr || do_rep) {
      const DatasetArgs& da = do_sum ? sum_args : (do_thr ? thr_args : rep_args);
      const std::string rdir = do_sum ? sum_records : (do_thr ? thr_records : rep_records);
      auto ds = load_from_args(da);
      auto cfg = dpsurv::compute_baseline(ds);
      auto all = read_all_records(rdir, ds,
                                  {dpsurv::Method::Phase1, dpsurv::Method::Phase2,
                                   dpsurv::Method::Phase3, dpsurv::Method::OutputDfbeta});
      auto gs = dpsurv::summarize_grid(all, cfg);

      if (do_sum) {
        const std::string out =
            sum_out.empty() ? rdir + "/summary_" + ds.name + ".csv" : sum_out;
        dpsurv::write_summary_csv(gs, ds.name, out);
        std::cout << "wrote " << out << "\n";
      } else if (do_thr) {
        auto rows = dpsurv::thresholds(gs, ds.name);
        const std::string out =
            thr_out.empty() ? rdir + "/thresholds_" + ds.name + ".csv" : thr_out;
        dpsurv::write_thresholds_csv(rows, out);
        std::cout << std::left << std::setw(11) << "dataset" << std::setw(9)
                  << "method" << std::setw(10) << "dc05" << std::setw(10)
                  << "lsr50" << std::setw(10) << "lsr10" << std::setw(10)
                  << "fpr10" << "\n";
        for (const auto& r : rows)
          std::cout << std::left << std::setw(11) << r.dataset << std::setw(9)
                    << dpsurv::method_name(r.method) << std::setw(10)
                    << r.eps_dc05 << std::setw(10) << r.eps_lsr50
                    << std::setw(10) << r.eps_lsr10 << std::setw(10)
                    << r.eps_fpr10 << "\n";
        std::cout << "wrote " << out << "\n";
      } else {
        const std::string out =
            rep_out.empty() ? rdir + "/report_" + ds.name : rep_out;
        fs::create_directories(out);
        dpsurv::write_summary_csv(gs, ds.name, out + "/summary.csv");
        auto clean = dpsurv::fit_cox(ds);
        dpsurv::write_plot_data(gs, cfg, clean.beta, ds.name, out);
        try {
          auto rows = dpsurv::thresholds(gs, ds.name);
          dpsurv::write_thresholds_csv(rows, out + "/thresholds.csv");
        } catch (const dpsurv::IncompleteGrid&) {
          // partial-grid reports still emit summary + plot data
        }
        std::cout << "wrote report bundle to " << out << "\n";
      }
      return 0;
    }
  } catch (const dpsurv::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
