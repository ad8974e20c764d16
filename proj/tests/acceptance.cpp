// Acceptance suite: one PASS/FAIL line per criterion. Runtime budgets are
// part of each criterion.
//
//   acceptance [--expect-fail N,...]
//
// Exits 0 when every criterion passes, or when exactly the listed criteria
// fail. A listed criterion that passes is reported and makes the run fail.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <fmt/format.h>

#include "deepfactor/experiment.hpp"
#include "deepfactor/validation.hpp"

namespace fs = std::filesystem;
using namespace deepfactor;
using validation::CheckResult;

namespace {

constexpr std::uint64_t kSeed = 20130901;

struct Outcome {
  bool passed = true;
  std::string detail;
};

std::set<int> failed;

void report(int number, const std::string& title, double budget_s, const std::function<Outcome()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("threw: ") + e.what()};
  }
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::string detail = o.detail;
  if (budget_s > 0.0 && s > budget_s) {
    o.passed = false;
    detail += fmt::format("; over the {:.0f} s budget", budget_s);
  }
  if (!o.passed) failed.insert(number);
  fmt::print("{} criterion {}: {} [{:.1f} s] {}\n", o.passed ? "PASS" : "FAIL", number, title, s, detail);
  std::fflush(stdout);
}

// Folds check results into one outcome listing every measured value.
Outcome fold(const std::vector<CheckResult>& checks) {
  Outcome o;
  for (const auto& c : checks) {
    o.passed = o.passed && c.passed;
    if (!o.detail.empty()) o.detail += "; ";
    o.detail += fmt::format("{}{} {:.4g} (tol {:.3g})", c.passed ? "" : "FAILED ", c.name, c.measured, c.tolerance);
  }
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + DEEPFACTOR_CLI + "\" " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// Every *.csv under a, compared byte for byte with its counterpart under b.
bool same_csv_tree(const fs::path& a, const fs::path& b, std::size_t& compared, std::string& first_diff) {
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (e.path().extension() != ".csv") continue;
    const fs::path rel = fs::relative(e.path(), a);
    ++compared;
    if (!fs::exists(b / rel) || slurp(e.path()) != slurp(b / rel)) {
      first_diff = rel.string();
      return false;
    }
  }
  return compared > 0;
}

Outcome fig2_reproduction() {
  experiment::ExperimentConfig cfg;
  cfg.N = 16;
  cfg.T = 200;
  cfg.priors = {3.0, 2.0, 1.0};
  cfg.K_true = {3, 5, 8};
  cfg.replicates = 10;
  cfg.iterations = 200;
  cfg.base_seed = kSeed;
  const std::size_t jobs = std::max(1U, std::thread::hardware_concurrency());
  const auto result = experiment::run_experiment(cfg, jobs);

  Outcome o;
  std::vector<double> pooled;
  std::size_t over = 0;
  bool in_band = true, init_order = true;
  for (std::size_t k : cfg.K_true) {
    double sum = 0.0;
    for (std::size_t i = 0; i < cfg.inits.size(); ++i) sum += result.summary.find(k, i)->mean;
    const double mean = sum / static_cast<double>(cfg.inits.size());
    pooled.push_back(mean);
    const double kd = static_cast<double>(k);
    in_band = in_band && mean >= kd - 1.0 && mean <= kd + 5.0;
    if (mean > kd) ++over;
    const double lo = result.summary.find(k, 0)->mean, hi = result.summary.find(k, 1)->mean;
    init_order = init_order && hi >= lo;
    std::size_t active = 0;
    for (const auto& d : result.datasets)
      if (d.K_true == k) active = d.active_K;
    o.detail += fmt::format("K={} ({} active): mean {:.2f} (init2 {:.2f}, init10 {:.2f}, uniform {:.2f}); ", k, active,
                            mean, lo, hi, result.summary.find(k, 2)->mean);
  }
  const bool monotone = std::is_sorted(pooled.begin(), pooled.end());
  o.passed = in_band && monotone && over >= 2 && init_order;
  o.detail += fmt::format("(a) band {} (b) nondecreasing {} (c) over-estimated {}/3 (d) init10>=init2 {}",
                          in_band ? "ok" : "NO", monotone ? "ok" : "NO", over, init_order ? "ok" : "NO");
  return o;
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "deepfactor_acceptance_determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  const fs::path cfg = root / "config.json";
  std::ofstream(cfg) << R"({"data": {"N": 10, "T": 60},
    "inference": {"iterations": 20},
    "experiment": {"K_true": [3, 5], "iterations": 10, "replicates": 3}})";
  const std::string c = "--config \"" + cfg.string() + "\" --seed 77 ";

  bool ok = true;
  std::string detail;
  auto twice = [&](const std::string& what, const std::string& a_args, const std::string& b_args,
                   const std::string& a_dir, const std::string& b_dir) {
    fs::create_directories(root / a_dir);
    fs::create_directories(root / b_dir);
    if (run_cli(a_args) != 0 || run_cli(b_args) != 0) {
      ok = false;
      detail += what + ": command failed; ";
      return;
    }
    std::size_t n = 0;
    std::string diff;
    const bool same = same_csv_tree(root / a_dir, root / b_dir, n, diff);
    ok = ok && same;
    detail += same ? fmt::format("{}: {} CSV files identical; ", what, n) : fmt::format("{}: {} differs; ", what, diff);
  };

  const std::string data = "\"" + (root / "gen1" / "data.csv").string() + "\"";
  twice("generate", c + "--out " + data + " generate",
        c + "--out \"" + (root / "gen2" / "data.csv").string() + "\" generate", "gen1", "gen2");
  twice("infer", c + "--out \"" + (root / "inf1").string() + "\" infer " + data,
        c + "--out \"" + (root / "inf2").string() + "\" infer " + data, "inf1", "inf2");
  twice("infer depth 2", c + "--depth 2 --out \"" + (root / "deep1").string() + "\" infer " + data,
        c + "--depth 2 --out \"" + (root / "deep2").string() + "\" infer " + data, "deep1", "deep2");
  twice("experiment rerun", c + "--jobs 2 --out \"" + (root / "exp1").string() + "\" experiment",
        c + "--jobs 2 --out \"" + (root / "exp2").string() + "\" experiment", "exp1", "exp2");
  twice("experiment --jobs 1 vs 8", c + "--jobs 1 --out \"" + (root / "jobs1").string() + "\" experiment",
        c + "--jobs 8 --out \"" + (root / "jobs8").string() + "\" experiment", "jobs1", "jobs8");
  fs::remove_all(root);
  return {ok, detail};
}

std::set<int> parse_expected(int argc, char** argv) {
  std::set<int> out;
  for (int i = 1; i < argc; ++i) {
    if (std::string(argv[i]) != "--expect-fail" || i + 1 >= argc) {
      fmt::print(stderr, "usage: acceptance [--expect-fail N,...]\n");
      std::exit(2);
    }
    std::stringstream list(argv[++i]);
    std::string item;
    while (std::getline(list, item, ',')) out.insert(std::stoi(item));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  const std::set<int> expected = parse_expected(argc, argv);
  report(1, "finite mask law sums to 1 over all 64 masks (N=3, K=2)", 1.0,
         [] { return fold(validation::check_mask_marginal_normalization()); });
  report(2, "IBP law of the sequential sampler", 30.0, [] { return fold(validation::check_ibp_law(kSeed)); });
  report(3, "spike posterior closed form vs quadrature on a 5x5 grid", 60.0,
         [] { return fold({validation::check_spike_closed_form()}); });
  report(4, "weight and factor kernels vs grid targets (TV < 1e-2)", 120.0, [] {
    return fold({validation::check_weight_kernel(kSeed), validation::check_factor_kernel(kSeed)});
  });
  report(5, "Geweke prior path vs successive-conditional path", 120.0,
         [] { return fold(validation::check_geweke(kSeed)); });
  report(6, "desk-scale recovery study (N=16, T=200, K_true 3/5/8)", 900.0, fig2_reproduction);
  report(7, "byte-identical CSV output on reruns and across --jobs", 0.0, determinism);
  report(8, "add/delete reciprocity on 100 random state pairs", 0.0,
         [] { return fold(validation::check_add_delete_reciprocity(kSeed)); });
  fmt::print("{} of 8 criteria passed\n", 8 - failed.size());
  for (int n : expected)
    if (!failed.count(n)) fmt::print("criterion {} was expected to fail but passed\n", n);
  for (int n : failed)
    if (expected.count(n)) fmt::print("criterion {} failed as expected (known failure, see README)\n", n);
  return failed == expected ? 0 : 1;
}
