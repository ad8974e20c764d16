#include "deepfactor/deepfactor.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <optional>
#include <string>

#include "deepfactor/config.hpp"
#include "deepfactor/error.hpp"
#include "deepfactor/experiment.hpp"
#include "deepfactor/inference.hpp"
#include "deepfactor/io.hpp"
#include "deepfactor/validation.hpp"
#include "deepfactor/version.hpp"

using namespace deepfactor;

struct df_config {
  config::RunConfig cfg;
};

struct df_dataset {
  FactorMatrix X;
  std::optional<GenerativeModel> model;
  std::vector<FactorMatrix> layers;
  std::uint64_t seed = 0;
};

struct df_inference {
  std::vector<infer::LayerRun> layers;
  std::uint64_t seed = 0;
  std::string config_json;
};

struct df_experiment {
  experiment::ExperimentResult result;
  experiment::ExperimentConfig cfg;
  std::string config_json;
};

struct df_report {
  std::vector<validation::CheckResult> checks;
};

namespace {

thread_local std::string last_error;

df_status fail(df_status status, const std::string& message) {
  last_error = message;
  return status;
}

template <typename F>
df_status guard(F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    switch (e.code()) {
      case ErrorCode::InvalidArgument: return fail(DF_ERR_INVALID_ARGUMENT, e.what());
      case ErrorCode::Parse: return fail(DF_ERR_PARSE, e.what());
      case ErrorCode::Io: return fail(DF_ERR_IO, e.what());
    }
    return fail(DF_ERR_INTERNAL, e.what());
  } catch (const std::bad_alloc&) {
    return fail(DF_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(DF_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(DF_ERR_INTERNAL, "unknown error");
  }
}

#define DF_REQUIRE(cond, what) \
  if (!(cond)) return fail(DF_ERR_INVALID_ARGUMENT, what)

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

std::string config_echo(const config::RunConfig& cfg, std::uint64_t seed) {
  config::RunConfig copy = cfg;
  copy.seed = seed;
  return config::to_json(copy);
}

}  // namespace

extern "C" {

const char* df_version(void) { return kVersion; }

const char* df_last_error(void) { return last_error.c_str(); }

const char* df_status_name(df_status status) {
  switch (status) {
    case DF_OK: return "ok";
    case DF_ERR_INVALID_ARGUMENT: return "invalid argument";
    case DF_ERR_PARSE: return "parse error";
    case DF_ERR_IO: return "i/o error";
    case DF_ERR_VALIDATION_FAILED: return "validation failed";
    case DF_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

uint64_t df_entropy_seed(void) { return entropy_seed(); }

void df_string_free(char* s) { std::free(s); }

df_status df_config_default(df_config** out) {
  DF_REQUIRE(out, "df_config_default: out is NULL");
  return guard([&] {
    *out = new df_config{};
    return DF_OK;
  });
}

df_status df_config_parse(const char* json_text, df_config** out) {
  DF_REQUIRE(json_text && out, "df_config_parse: NULL argument");
  return guard([&] {
    *out = new df_config{config::parse_run_config(json_text)};
    return DF_OK;
  });
}

df_status df_config_load(const char* path, df_config** out) {
  DF_REQUIRE(path && out, "df_config_load: NULL argument");
  return guard([&] {
    *out = new df_config{config::load_run_config(path)};
    return DF_OK;
  });
}

df_status df_config_seed(const df_config* cfg, int* has_seed, uint64_t* seed) {
  DF_REQUIRE(cfg && has_seed && seed, "df_config_seed: NULL argument");
  *has_seed = cfg->cfg.seed ? 1 : 0;
  *seed = cfg->cfg.seed.value_or(0);
  return DF_OK;
}

df_status df_config_depth(const df_config* cfg, size_t* depth) {
  DF_REQUIRE(cfg && depth, "df_config_depth: NULL argument");
  *depth = cfg->cfg.depth;
  return DF_OK;
}

df_status df_config_to_json(const df_config* cfg, char** out_json) {
  DF_REQUIRE(cfg && out_json, "df_config_to_json: NULL argument");
  return guard([&] {
    *out_json = copy_string(config::to_json(cfg->cfg));
    return DF_OK;
  });
}

void df_config_free(df_config* cfg) { delete cfg; }

df_status df_generate(const df_config* cfg, uint64_t seed, df_dataset** out) {
  DF_REQUIRE(cfg && out, "df_generate: NULL argument");
  return guard([&] {
    Rng rng(seed);
    auto ds = std::make_unique<df_dataset>();
    ds->model = sample_model(cfg->cfg.hyper, cfg->cfg.N, rng);
    ds->layers = generate_dataset(*ds->model, cfg->cfg.T, rng);
    ds->X = ds->layers.back();
    ds->seed = seed;
    *out = ds.release();
    return DF_OK;
  });
}

df_status df_dataset_from_buffer(const double* values, size_t rows, size_t cols, df_dataset** out) {
  DF_REQUIRE(out && (values || rows * cols == 0), "df_dataset_from_buffer: NULL argument");
  return guard([&] {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (size_t r = 0; r < rows; ++r)
      for (size_t c = 0; c < cols; ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = values[r * cols + c];
    auto ds = std::make_unique<df_dataset>();
    ds->X = FactorMatrix(std::move(m));
    *out = ds.release();
    return DF_OK;
  });
}

df_status df_dataset_read_csv(const char* path, df_dataset** out) {
  DF_REQUIRE(path && out, "df_dataset_read_csv: NULL argument");
  return guard([&] {
    auto ds = std::make_unique<df_dataset>();
    ds->X = io::read_matrix_csv(path);
    *out = ds.release();
    return DF_OK;
  });
}

df_status df_dataset_write(const df_dataset* data, const char* csv_path, const char* sidecar_path) {
  DF_REQUIRE(data && csv_path, "df_dataset_write: NULL argument");
  DF_REQUIRE(!sidecar_path || data->model, "df_dataset_write: a sidecar needs a generated dataset");
  return guard([&] {
    io::atomic_write(csv_path, io::matrix_csv(data->X));
    if (sidecar_path) io::atomic_write(sidecar_path, io::dataset_sidecar_json(*data->model, data->layers, data->seed));
    return DF_OK;
  });
}

df_status df_dataset_shape(const df_dataset* data, size_t* rows, size_t* cols) {
  DF_REQUIRE(data && rows && cols, "df_dataset_shape: NULL argument");
  *rows = data->X.rows();
  *cols = data->X.cols();
  return DF_OK;
}

df_status df_dataset_copy_values(const df_dataset* data, double* out, size_t len) {
  DF_REQUIRE(data && (out || len == 0), "df_dataset_copy_values: NULL argument");
  DF_REQUIRE(len >= data->X.rows() * data->X.cols(), "df_dataset_copy_values: buffer too small");
  for (size_t r = 0; r < data->X.rows(); ++r)
    for (size_t c = 0; c < data->X.cols(); ++c) out[r * data->X.cols() + c] = data->X(r, c);
  return DF_OK;
}

df_status df_dataset_true_k(const df_dataset* data, size_t* out, size_t len, size_t* num_layers) {
  DF_REQUIRE(data && num_layers, "df_dataset_true_k: NULL argument");
  DF_REQUIRE(data->model, "df_dataset_true_k: dataset was not generated");
  const auto& widths = data->model->hyper.layer_widths;
  *num_layers = widths.size();
  DF_REQUIRE(out || len == 0, "df_dataset_true_k: NULL buffer");
  for (size_t i = 0; i < widths.size() && i < len; ++i) out[i] = widths[i];
  return DF_OK;
}

void df_dataset_free(df_dataset* data) { delete data; }

df_status df_infer(const df_dataset* data, const df_config* cfg, uint64_t seed, size_t depth, df_inference** out) {
  DF_REQUIRE(data && cfg && out, "df_infer: NULL argument");
  DF_REQUIRE(depth >= 1, "df_infer: depth must be at least 1");
  return guard([&] {
    infer::InferenceConfig ic = cfg->cfg.inference;
    ic.seed = seed;
    auto run = std::make_unique<df_inference>();
    if (depth == 1) {
      run->layers.push_back(infer::run_mh_layer(data->X, ic, cfg->cfg.hyper));
    } else {
      run->layers = infer::run_layerwise(data->X, depth, ic, cfg->cfg.hyper).layers;
    }
    run->seed = seed;
    config::RunConfig echo = cfg->cfg;
    echo.depth = depth;
    run->config_json = config_echo(echo, seed);
    *out = run.release();
    return DF_OK;
  });
}

df_status df_inference_num_layers(const df_inference* run, size_t* num_layers) {
  DF_REQUIRE(run && num_layers, "df_inference_num_layers: NULL argument");
  *num_layers = run->layers.size();
  return DF_OK;
}

df_status df_inference_trace_length(const df_inference* run, size_t layer, size_t* length) {
  DF_REQUIRE(run && length, "df_inference_trace_length: NULL argument");
  DF_REQUIRE(layer < run->layers.size(), "df_inference_trace_length: layer out of range");
  *length = run->layers[layer].trace.size();
  return DF_OK;
}

df_status df_inference_trace_k(const df_inference* run, size_t layer, size_t* out, size_t len) {
  DF_REQUIRE(run && (out || len == 0), "df_inference_trace_k: NULL argument");
  DF_REQUIRE(layer < run->layers.size(), "df_inference_trace_k: layer out of range");
  const auto& trace = run->layers[layer].trace;
  for (size_t i = 0; i < trace.size() && i < len; ++i) out[i] = trace[i].K;
  return DF_OK;
}

df_status df_inference_final_k(const df_inference* run, size_t layer, size_t* K, size_t* K_plus) {
  DF_REQUIRE(run && K && K_plus, "df_inference_final_k: NULL argument");
  DF_REQUIRE(layer < run->layers.size(), "df_inference_final_k: layer out of range");
  *K = run->layers[layer].state.K();
  *K_plus = run->layers[layer].state.K_plus();
  return DF_OK;
}

df_status df_inference_write(const df_inference* run, const char* out_dir) {
  DF_REQUIRE(run && out_dir, "df_inference_write: NULL argument");
  return guard([&] {
    const std::filesystem::path dir(out_dir);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw_io("cannot create " + dir.string() + ": " + ec.message());
    for (size_t l = 0; l < run->layers.size(); ++l) {
      const std::string name = l == 0 ? "trace.csv" : "trace_layer" + std::to_string(l + 1) + ".csv";
      io::atomic_write(dir / name, io::trace_csv(run->layers[l].trace));
    }
    io::atomic_write(dir / "state.json", io::state_snapshot_json(run->layers, run->seed, run->config_json));
    return DF_OK;
  });
}

void df_inference_free(df_inference* run) { delete run; }

df_status df_experiment_run(const df_config* cfg, uint64_t seed, size_t jobs, df_experiment** out) {
  DF_REQUIRE(cfg && out, "df_experiment_run: NULL argument");
  return guard([&] {
    auto exp = std::make_unique<df_experiment>();
    exp->cfg = cfg->cfg.experiment;
    exp->cfg.base_seed = seed;
    exp->result = experiment::run_experiment(exp->cfg, jobs == 0 ? 1 : jobs);
    exp->config_json = config_echo(cfg->cfg, seed);
    *out = exp.release();
    return DF_OK;
  });
}

df_status df_experiment_num_cells(const df_experiment* exp, size_t* count) {
  DF_REQUIRE(exp && count, "df_experiment_num_cells: NULL argument");
  *count = exp->result.summary.cells.size();
  return DF_OK;
}

df_status df_experiment_cell(const df_experiment* exp, size_t index, size_t* K_true, size_t* init_index,
                             double* mean, double* variance) {
  DF_REQUIRE(exp && K_true && init_index && mean && variance, "df_experiment_cell: NULL argument");
  DF_REQUIRE(index < exp->result.summary.cells.size(), "df_experiment_cell: index out of range");
  const auto& c = exp->result.summary.cells[index];
  *K_true = c.K_true;
  *init_index = c.init_index;
  *mean = c.mean;
  *variance = c.variance;
  return DF_OK;
}

df_status df_experiment_write(const df_experiment* exp, const char* out_dir) {
  DF_REQUIRE(exp && out_dir, "df_experiment_write: NULL argument");
  return guard([&] {
    experiment::emit_report(exp->result, exp->cfg, exp->config_json, out_dir);
    return DF_OK;
  });
}

void df_experiment_free(df_experiment* exp) { delete exp; }

df_status df_validate(uint64_t seed, double closed_form_perturbation, df_report** out) {
  DF_REQUIRE(out, "df_validate: out is NULL");
  return guard([&] {
    validation::ValidationOptions opts;
    opts.seed = seed;
    opts.closed_form_perturbation = closed_form_perturbation;
    *out = new df_report{validation::run_all(opts)};
    return DF_OK;
  });
}

size_t df_report_num_checks(const df_report* report) { return report ? report->checks.size() : 0; }

df_status df_report_check(const df_report* report, size_t index, const char** name, double* measured,
                          double* tolerance, int* passed) {
  DF_REQUIRE(report && name && measured && tolerance && passed, "df_report_check: NULL argument");
  DF_REQUIRE(index < report->checks.size(), "df_report_check: index out of range");
  const auto& c = report->checks[index];
  *name = c.name.c_str();
  *measured = c.measured;
  *tolerance = c.tolerance;
  *passed = c.passed ? 1 : 0;
  return DF_OK;
}

int df_report_all_passed(const df_report* report) {
  if (!report) return 0;
  for (const auto& c : report->checks)
    if (!c.passed) return 0;
  return 1;
}

df_status df_report_text(const df_report* report, char** out) {
  DF_REQUIRE(report && out, "df_report_text: NULL argument");
  return guard([&] {
    *out = copy_string(validation::format_report(report->checks));
    return DF_OK;
  });
}

void df_report_free(df_report* report) { delete report; }

}  // extern "C"
