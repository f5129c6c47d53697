#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "dpsurv/dataset.hpp"
#include "dpsurv/harness.hpp"

using namespace dpsurv;
namespace fs = std::filesystem;

namespace {

std::string fixture_dir() { return FIXTURE_DIR; }

// Runs the CLI binary with stdout/stderr redirected to a file; returns the
// process exit code.
int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(CLI_PATH) + " " + args + " > " +
                          log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

const fs::path& work_dir() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / "dpsurv_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

}  // namespace

TEST_CASE("fit --json emits a parseable coefficient block") {
  const auto log = work_dir() / "fit.json";
  const int rc = run_cli("fit --dataset lung --data-dir " + fixture_dir() + " --json", log);
  REQUIRE(rc == 0);
  auto j = nlohmann::json::parse(slurp(log));
  CHECK(j["converged"] == true);
  REQUIRE(j["coefficients"].size() == 7);
  CHECK(j["coefficients"][0]["name"] == "age");
  int nsig = 0;
  for (const auto& c : j["coefficients"])
    if (c["p"].get<double>() < 0.05) ++nsig;
  CHECK(nsig == 3);
}

TEST_CASE("fit table mode prints the significance summary") {
  const auto log = work_dir() / "fit.txt";
  REQUIRE(run_cli("fit --dataset lung --data-dir " + fixture_dir(), log) == 0);
  const std::string out = slurp(log);
  CHECK(out.find("significant (p<0.05): 3/7") != std::string::npos);
  CHECK(out.find("in-sample C-index: 0.646") != std::string::npos);
}

TEST_CASE("exit code 1 on usage errors") {
  const auto log = work_dir() / "usage.txt";
  CHECK(run_cli("", log) == 1);                       // missing subcommand
  CHECK(run_cli("fit", log) == 1);                    // missing --dataset
  CHECK(run_cli("fit --dataset lung --bogus", log) == 1);
}

TEST_CASE("exit code 2 on data errors, with the registry listed") {
  const auto log = work_dir() / "data_err.txt";
  CHECK(run_cli("fit --dataset nosuch --data-dir " + fixture_dir(), log) == 2);
  const std::string out = slurp(log);
  CHECK(out.find("lung") != std::string::npos);
  CHECK(out.find("flchain") != std::string::npos);
}

TEST_CASE("perturb at eps=inf writes back the original data") {
  const auto out_csv = work_dir() / "lung_inf.csv";
  const auto log = work_dir() / "perturb.txt";
  REQUIRE(run_cli("perturb --dataset lung --data-dir " + fixture_dir() +
                      " --method phase2 --eps inf --out " + out_csv.string(),
                  log) == 0);
  auto orig = load_dataset(fixture_dir() + "/lung.csv",
                           fixture_dir() + "/lung.meta.json", find_registry("lung"));
  auto back = load_dataset(out_csv.string(), fixture_dir() + "/lung.meta.json",
                           find_registry("lung"));
  CHECK(back.X == orig.X);
  CHECK(back.T == orig.T);
  CHECK(back.delta == orig.delta);
}

TEST_CASE("perturb is deterministic in (seed, iter) and spelled 'inf' parses") {
  const auto a = work_dir() / "p_a.csv";
  const auto b = work_dir() / "p_b.csv";
  const auto c = work_dir() / "p_c.csv";
  const auto log = work_dir() / "perturb2.txt";
  const std::string base = "perturb --dataset lung --data-dir " + fixture_dir() +
                           " --method phase1 --eps 1 ";
  REQUIRE(run_cli(base + "--seed 7 --iter 3 --out " + a.string(), log) == 0);
  REQUIRE(run_cli(base + "--seed 7 --iter 3 --out " + b.string(), log) == 0);
  REQUIRE(run_cli(base + "--seed 7 --iter 4 --out " + c.string(), log) == 0);
  CHECK(slurp(a) == slurp(b));
  CHECK(slurp(a) != slurp(c));
}

TEST_CASE("simulate + summarize + report round-trip; thresholds demand the grid") {
  const auto out = work_dir() / "sim_partial";
  const auto log = work_dir() / "sim.txt";
  const std::string common = "--dataset lung --data-dir " + fixture_dir();
  REQUIRE(run_cli("simulate " + common +
                      " --method phase1 output --eps 1 inf --iters 2 --out " +
                      out.string(),
                  log) == 0);
  CHECK(fs::exists(out / "records_lung_phase1.csv"));
  CHECK(fs::exists(out / "records_lung_output.csv"));
  CHECK(fs::exists(out / "manifest_lung.json"));
  auto mf = nlohmann::json::parse(slurp(out / "manifest_lung.json"));
  CHECK(mf["iterations"] == 2);
  CHECK(mf["epsilons"].back() == "inf");
  CHECK(!mf["fixtures"]["lung"].get<std::string>().empty());

  REQUIRE(run_cli("summarize " + common + " --records " + out.string(), log) == 0);
  CHECK(fs::exists(out / "summary_lung.csv"));

  // thresholds on a partial grid must fail with the data exit code
  CHECK(run_cli("thresholds " + common + " --records " + out.string(), log) == 2);

  // report tolerates the partial grid and still writes the bundle
  REQUIRE(run_cli("report " + common + " --records " + out.string(), log) == 0);
  CHECK(fs::exists(out / "report_lung" / "summary.csv"));
  CHECK(fs::exists(out / "report_lung" / "cindex_ribbon.csv"));
  CHECK(!fs::exists(out / "report_lung" / "thresholds.csv"));
}

TEST_CASE("--eps all covers the canonical grid and thresholds then succeed") {
  const auto out = work_dir() / "sim_full";
  const auto log = work_dir() / "sim_full.txt";
  const std::string common = "--dataset lung --data-dir " + fixture_dir();
  REQUIRE(run_cli("simulate " + common +
                      " --method phase1 --eps all --iters 2 --workers 2 --out " +
                      out.string(),
                  log) == 0);
  REQUIRE(run_cli("thresholds " + common + " --records " + out.string(),
                  log) == 0);
  const std::string table = slurp(log);
  CHECK(table.find("lung") != std::string::npos);
  CHECK(table.find("phase1") != std::string::npos);
  CHECK(fs::exists(out / "thresholds_lung.csv"));
  const std::string csv = slurp(out / "thresholds_lung.csv");
  CHECK(csv.rfind("dataset,method,eps_dc05,eps_lsr50,eps_lsr10,eps_fpr10", 0) == 0);
}

TEST_CASE("simulate records are byte-identical across repeat runs") {
  const auto o1 = work_dir() / "rep1";
  const auto o2 = work_dir() / "rep2";
  const auto log = work_dir() / "rep.txt";
  const std::string cmd = "simulate --dataset lung --data-dir " + fixture_dir() +
                          " --method phase2 --eps 1 --iters 3 --out ";
  REQUIRE(run_cli(cmd + o1.string(), log) == 0);
  REQUIRE(run_cli(cmd + o2.string() + " --workers 3", log) == 0);
  CHECK(slurp(o1 / "records_lung_phase2.csv") ==
        slurp(o2 / "records_lung_phase2.csv"));
}
