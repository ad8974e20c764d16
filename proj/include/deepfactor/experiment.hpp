#pragma once

// Recovery study: sweep the true number of factors, generate one dataset per
// value, and run repeated chains from several initializations.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "deepfactor/inference.hpp"
#include "deepfactor/model.hpp"

namespace deepfactor::experiment {

struct ExperimentConfig {
  std::size_t N = 16;
  std::size_t T = 200;
  std::vector<std::size_t> K_true{3, 4, 5, 6, 7, 8, 9, 10};
  std::vector<infer::InitStrategy> inits{infer::InitStrategy::fixed(2),
                                         infer::InitStrategy::fixed(10),
                                         infer::InitStrategy::uniform(3, 10)};
  std::size_t iterations = 200;
  std::size_t replicates = 10;
  double burn_in = 0.5;
  std::uint64_t base_seed = 0;
  LayerHyper priors{3.0, 2.0, 1.0};
  double sigma_top = 1.0;
  double sigma_floor = 1e-6;
  double gibbs_step_scale = 0.5;

  void validate() const;
  HyperParams hyper(std::size_t k_true) const;
};

struct TrialResult {
  std::size_t K_true = 0;
  std::size_t init_index = 0;
  std::string init_label;
  std::size_t replicate = 0;
  std::uint64_t seed = 0;
  std::size_t init_K = 0;
  std::vector<infer::TraceRow> trace;
  double K_hat = 0.0;
  double seconds = 0.0;
};

struct CellStats {
  std::size_t K_true = 0;
  std::size_t init_index = 0;
  std::string init_label;
  std::size_t count = 0;
  double mean = 0.0;
  double variance = 0.0;
};

struct SummaryStats {
  std::vector<CellStats> cells;  // ordered by (K_true, init_index)

  const CellStats* find(std::size_t k_true, std::size_t init_index) const;
};

struct DatasetInfo {
  std::size_t K_true = 0;
  std::uint64_t seed = 0;
  std::size_t active_K = 0;  // columns of the true mask with m_k > 0
};

struct ExperimentResult {
  std::vector<DatasetInfo> datasets;
  std::vector<TrialResult> trials;
  SummaryStats summary;
};

std::uint64_t dataset_seed(std::uint64_t base_seed, std::size_t k_true);
std::uint64_t trial_seed(std::uint64_t base_seed, std::size_t k_true, std::size_t init_index,
                         std::size_t replicate);

/// Mean of K over the final (1 − burn_in) fraction of the trace.
double point_estimate(const std::vector<infer::TraceRow>& trace, double burn_in);

/// Runs every trial on up to `jobs` threads. Results do not depend on `jobs`.
ExperimentResult run_experiment(const ExperimentConfig& cfg, std::size_t jobs = 1);

/// Sample mean and unbiased sample variance of K̂ per (K_true, init) cell.
SummaryStats summarize(const std::vector<TrialResult>& results);

std::string summary_csv(const SummaryStats& stats);
SummaryStats parse_summary_csv(const std::string& text);

std::string trace_file_name(std::size_t k_true, std::size_t init_index, std::size_t replicate);

/// Writes summary.csv, traces/Ktrue{k}_init{i}_rep{r}.csv and manifest.json
/// under `dir`. `config_json` is echoed into the manifest.
void emit_report(const ExperimentResult& result, const ExperimentConfig& cfg,
                 const std::string& config_json, const std::filesystem::path& dir);

/// Checks a manifest document against the documented layout; returns an
/// empty string when valid, otherwise the first problem found.
std::string manifest_problem(const std::string& manifest_text);

}  // namespace deepfactor::experiment
