// Command-line front end. Talks to the library only through its C interface.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "deepfactor/deepfactor.h"

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitError = 2;

struct Options {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::size_t jobs = 1;
  std::optional<std::size_t> depth;
  std::string data;
  double perturb = 0.0;
};

class Failure {
 public:
  explicit Failure(int code) : code_(code) {}
  int code() const { return code_; }

 private:
  int code_;
};

void check(df_status s, const char* what) {
  if (s == DF_OK) return;
  std::fprintf(stderr, "deepfactor: %s: %s (%s)\n", what, df_last_error(), df_status_name(s));
  throw Failure(s == DF_ERR_VALIDATION_FAILED ? kExitValidation : kExitError);
}

// Owns a df_config for the duration of a command.
struct Config {
  df_config* handle = nullptr;
  explicit Config(const std::string& path) {
    if (path.empty())
      check(df_config_default(&handle), "default config");
    else
      check(df_config_load(path.c_str(), &handle), "loading config");
  }
  ~Config() { df_config_free(handle); }
  Config(const Config&) = delete;
  Config& operator=(const Config&) = delete;
};

std::uint64_t resolve_seed(const Options& o, const Config& cfg) {
  if (o.seed) return *o.seed;
  int has = 0;
  std::uint64_t seed = 0;
  check(df_config_seed(cfg.handle, &has, &seed), "reading seed");
  if (has) return seed;
  seed = df_entropy_seed();
  std::fprintf(stderr, "deepfactor: no --seed given, drew %llu from system entropy\n",
               static_cast<unsigned long long>(seed));
  return seed;
}

int cmd_generate(const Options& o) {
  Config cfg(o.config);
  const std::uint64_t seed = resolve_seed(o, cfg);
  const std::string out = o.out.empty() ? "data.csv" : o.out;
  const std::string sidecar = std::filesystem::path(out).replace_extension(".json").string();
  df_dataset* data = nullptr;
  check(df_generate(cfg.handle, seed, &data), "generating dataset");
  const df_status s = df_dataset_write(data, out.c_str(), sidecar.c_str());
  std::size_t rows = 0, cols = 0;
  df_dataset_shape(data, &rows, &cols);
  df_dataset_free(data);
  check(s, "writing dataset");
  std::printf("wrote %s (%zu x %zu) and %s, seed %llu\n", out.c_str(), rows, cols, sidecar.c_str(),
              static_cast<unsigned long long>(seed));
  return 0;
}

int cmd_infer(const Options& o) {
  Config cfg(o.config);
  const std::uint64_t seed = resolve_seed(o, cfg);
  std::size_t depth = 1;
  check(df_config_depth(cfg.handle, &depth), "reading depth");
  if (o.depth) depth = *o.depth;
  const std::string out = o.out.empty() ? "infer_out" : o.out;

  df_dataset* data = nullptr;
  check(df_dataset_read_csv(o.data.c_str(), &data), "reading data");
  df_inference* run = nullptr;
  const df_status s = df_infer(data, cfg.handle, seed, depth, &run);
  df_dataset_free(data);
  check(s, "inference");
  const df_status w = df_inference_write(run, out.c_str());
  if (w == DF_OK) {
    std::size_t layers = 0;
    df_inference_num_layers(run, &layers);
    for (std::size_t l = 0; l < layers; ++l) {
      std::size_t K = 0, K_plus = 0, len = 0;
      df_inference_final_k(run, l, &K, &K_plus);
      df_inference_trace_length(run, l, &len);
      std::printf("layer %zu: %zu iterations, final K = %zu (%zu linked)\n", l + 1, len, K, K_plus);
    }
    std::printf("wrote %s, seed %llu\n", out.c_str(), static_cast<unsigned long long>(seed));
  }
  df_inference_free(run);
  check(w, "writing results");
  return 0;
}

int cmd_experiment(const Options& o) {
  Config cfg(o.config);
  const std::uint64_t seed = resolve_seed(o, cfg);
  const std::string out = o.out.empty() ? "experiment_out" : o.out;
  df_experiment* exp = nullptr;
  check(df_experiment_run(cfg.handle, seed, o.jobs, &exp), "experiment");
  const df_status w = df_experiment_write(exp, out.c_str());
  if (w == DF_OK) {
    std::size_t cells = 0;
    df_experiment_num_cells(exp, &cells);
    std::printf("%-7s %-5s %-10s %-10s\n", "K_true", "init", "mean", "variance");
    for (std::size_t i = 0; i < cells; ++i) {
      std::size_t k = 0, init = 0;
      double mean = 0.0, var = 0.0;
      df_experiment_cell(exp, i, &k, &init, &mean, &var);
      std::printf("%-7zu %-5zu %-10.4f %-10.4f\n", k, init, mean, var);
    }
    std::printf("wrote %s, seed %llu\n", out.c_str(), static_cast<unsigned long long>(seed));
  }
  df_experiment_free(exp);
  check(w, "writing report");
  return 0;
}

int cmd_validate(const Options& o) {
  const std::uint64_t seed = o.seed.value_or(20130901);
  df_report* report = nullptr;
  check(df_validate(seed, o.perturb, &report), "validation");
  char* text = nullptr;
  const df_status s = df_report_text(report, &text);
  if (s == DF_OK) std::fputs(text, stdout);
  df_string_free(text);
  const int ok = df_report_all_passed(report);
  df_report_free(report);
  check(s, "formatting report");
  return ok ? 0 : kExitValidation;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical spike-and-slab factor model: generation, inference and recovery studies"};
  app.set_version_flag("--version", df_version());
  app.require_subcommand(1);
  app.fallthrough();

  Options o;
  app.add_option("--config", o.config, "JSON run configuration (defaults when omitted)")->check(CLI::ExistingFile);
  app.add_option("--out", o.out, "Output file (generate) or directory (infer, experiment)");
  app.add_option("--seed", o.seed, "Random seed; drawn from system entropy when omitted");
  app.add_option("--jobs", o.jobs, "Worker threads for the experiment")->check(CLI::PositiveNumber);
  app.add_option("--depth", o.depth, "Number of hidden layers to infer")->check(CLI::PositiveNumber);

  auto* generate = app.add_subcommand("generate", "Draw a synthetic dataset from the generative model");
  auto* inference = app.add_subcommand("infer", "Infer hidden factors of a CSV dataset");
  inference->add_option("data", o.data, "Dataset CSV (rows = dimensions, header t0,t1,...)")->required();
  auto* exp = app.add_subcommand("experiment", "Run the factor-recovery study");
  auto* validate = app.add_subcommand("validate", "Run the oracle agreement checks");
  validate->add_option("--perturb-closed-form", o.perturb, "Test hook")->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitError;
  }

  try {
    if (generate->parsed()) return cmd_generate(o);
    if (inference->parsed()) return cmd_infer(o);
    if (exp->parsed()) return cmd_experiment(o);
    if (validate->parsed()) return cmd_validate(o);
  } catch (const Failure& f) {
    return f.code();
  }
  return kExitError;
}
