/*
 * C interface to the deepfactor library.
 *
 * All objects are opaque handles created by a df_* constructor and released
 * with the matching df_*_free function (NULL is accepted). Every fallible
 * call returns a df_status; on failure df_last_error() describes the problem.
 * The message is thread-local and stays valid until the next failing call on
 * the same thread.
 */
#ifndef DEEPFACTOR_H
#define DEEPFACTOR_H

#include <stddef.h>
#include <stdint.h>

#if defined(DEEPFACTOR_BUILDING_LIBRARY)
#define DF_API __attribute__((visibility("default")))
#else
#define DF_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum df_status {
  DF_OK = 0,
  DF_ERR_INVALID_ARGUMENT = 1,
  DF_ERR_PARSE = 2,
  DF_ERR_IO = 3,
  DF_ERR_VALIDATION_FAILED = 4,
  DF_ERR_INTERNAL = 5
} df_status;

typedef struct df_config df_config;
typedef struct df_dataset df_dataset;
typedef struct df_inference df_inference;
typedef struct df_experiment df_experiment;
typedef struct df_report df_report;

DF_API const char* df_version(void);
DF_API const char* df_last_error(void);
DF_API const char* df_status_name(df_status status);
DF_API uint64_t df_entropy_seed(void);
DF_API void df_string_free(char* s);

/* Run configuration (JSON). Unknown keys are rejected. */
DF_API df_status df_config_default(df_config** out);
DF_API df_status df_config_parse(const char* json_text, df_config** out);
DF_API df_status df_config_load(const char* path, df_config** out);
/* *has_seed is set to 1 when the file carries a "seed" entry. */
DF_API df_status df_config_seed(const df_config* cfg, int* has_seed, uint64_t* seed);
DF_API df_status df_config_depth(const df_config* cfg, size_t* depth);
/* Canonical JSON echo; release with df_string_free. */
DF_API df_status df_config_to_json(const df_config* cfg, char** out_json);
DF_API void df_config_free(df_config* cfg);

/* Datasets. Values are exchanged row-major (rows = dimensions). */
DF_API df_status df_generate(const df_config* cfg, uint64_t seed, df_dataset** out);
DF_API df_status df_dataset_from_buffer(const double* values, size_t rows, size_t cols,
                                        df_dataset** out);
DF_API df_status df_dataset_read_csv(const char* path, df_dataset** out);
/* sidecar_path may be NULL; a sidecar requires a generated dataset. */
DF_API df_status df_dataset_write(const df_dataset* data, const char* csv_path,
                                  const char* sidecar_path);
DF_API df_status df_dataset_shape(const df_dataset* data, size_t* rows, size_t* cols);
DF_API df_status df_dataset_copy_values(const df_dataset* data, double* out, size_t len);
/* Nominal K per hidden layer (first hidden layer first) of a generated dataset. */
DF_API df_status df_dataset_true_k(const df_dataset* data, size_t* out, size_t len,
                                   size_t* num_layers);
DF_API void df_dataset_free(df_dataset* data);

/* Inference. depth == 1 runs a single layer. */
DF_API df_status df_infer(const df_dataset* data, const df_config* cfg, uint64_t seed,
                          size_t depth, df_inference** out);
DF_API df_status df_inference_num_layers(const df_inference* run, size_t* num_layers);
DF_API df_status df_inference_trace_length(const df_inference* run, size_t layer, size_t* length);
DF_API df_status df_inference_trace_k(const df_inference* run, size_t layer, size_t* out,
                                      size_t len);
DF_API df_status df_inference_final_k(const df_inference* run, size_t layer, size_t* K,
                                      size_t* K_plus);
/* Writes trace.csv (first hidden layer), trace_layer{i}.csv for upper layers
 * and state.json into out_dir, creating it if needed. */
DF_API df_status df_inference_write(const df_inference* run, const char* out_dir);
DF_API void df_inference_free(df_inference* run);

/* Recovery experiment. jobs == 0 means one thread. */
DF_API df_status df_experiment_run(const df_config* cfg, uint64_t seed, size_t jobs,
                                   df_experiment** out);
DF_API df_status df_experiment_num_cells(const df_experiment* exp, size_t* count);
DF_API df_status df_experiment_cell(const df_experiment* exp, size_t index, size_t* K_true,
                                    size_t* init_index, double* mean, double* variance);
/* Writes summary.csv, traces/ and manifest.json into out_dir. */
DF_API df_status df_experiment_write(const df_experiment* exp, const char* out_dir);
DF_API void df_experiment_free(df_experiment* exp);

/* Oracle agreement suite. closed_form_perturbation is a test hook and should
 * be 0 in normal use. */
DF_API df_status df_validate(uint64_t seed, double closed_form_perturbation, df_report** out);
DF_API size_t df_report_num_checks(const df_report* report);
DF_API df_status df_report_check(const df_report* report, size_t index, const char** name,
                                 double* measured, double* tolerance, int* passed);
DF_API int df_report_all_passed(const df_report* report);
/* Pass/fail table; release with df_string_free. */
DF_API df_status df_report_text(const df_report* report, char** out);
DF_API void df_report_free(df_report* report);

#ifdef __cplusplus
}
#endif

#endif /* DEEPFACTOR_H */
