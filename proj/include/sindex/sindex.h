#ifndef SINDEX_SINDEX_H
#define SINDEX_SINDEX_H

/* C interface of the streaming single-index inference engine.
 *
 * Every fallible call returns a sindex_status. On failure the message is available from
 * sindex_last_error() on the calling thread until the next failing call there. Handles are opaque and
 * owned by the caller; pass them to the matching *_free function (NULL is accepted). A handle may be used
 * from one thread at a time; distinct handles are independent. */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define SINDEX_API __declspec(dllexport)
#else
#define SINDEX_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum sindex_status {
    SINDEX_OK = 0,
    SINDEX_E_INVALID_ARGUMENT = 1,
    SINDEX_E_DOMAIN = 2,
    SINDEX_E_IO = 3,
    SINDEX_E_PARSE = 4,
    SINDEX_E_VERSION_MISMATCH = 5,
    SINDEX_E_INVARIANT = 6,
    SINDEX_E_DIMENSION = 7,
    SINDEX_E_CONVERGENCE = 8,
    SINDEX_E_INFEASIBLE = 9,
    SINDEX_E_STATE = 10,
    SINDEX_E_INTERNAL = 11,
    SINDEX_E_NOMEM = 12,
} sindex_status;

typedef enum sindex_field {
    SINDEX_FIELD_BETA1 = 0,
    SINDEX_FIELD_BETA2,
    SINDEX_FIELD_BETA_AVE,
    SINDEX_FIELD_BETA_D1,
    SINDEX_FIELD_BETA_D2,
    SINDEX_FIELD_BETA_DA,
    SINDEX_FIELD_SIGMA,
    SINDEX_FIELD_CI_LO,
    SINDEX_FIELD_CI_HI,
    SINDEX_FIELD_P_VALUE,
} sindex_field;

/* Indices into the array filled by sindex_report_tunings. */
enum { SINDEX_TUNE_LAMBDA = 0, SINDEX_TUNE_GAMMA, SINDEX_TUNE_H, SINDEX_TUNE_KAPPA, SINDEX_TUNE_TAU, SINDEX_TUNE_COUNT };

typedef struct sindex_config sindex_config;
typedef struct sindex_engine sindex_engine;
typedef struct sindex_batch sindex_batch;
typedef struct sindex_report sindex_report;
typedef struct sindex_report_list sindex_report_list;
typedef struct sindex_source sindex_source;
typedef struct sindex_simulator sindex_simulator;
typedef struct sindex_manifest sindex_manifest;
typedef struct sindex_runlog sindex_runlog;

SINDEX_API const char* sindex_version(void);
SINDEX_API const char* sindex_status_name(sindex_status status);
SINDEX_API const char* sindex_last_error(void);
/* One of trace, debug, info, warn, error, off. */
SINDEX_API sindex_status sindex_set_log_level(const char* level);
/* Worker count from SINDEX_THREADS, else the hardware concurrency. */
SINDEX_API unsigned sindex_thread_count(void);
SINDEX_API void sindex_string_free(char* s);

/* Engine configuration as string key/value pairs:
 *   loss                huber | logistic
 *   tau                 adaptive | positive number (fixed Huber threshold)
 *   tau_coverage        fraction of |residuals| inside tau, default 0.8
 *   alpha               significance level, default 0.05
 *   surrogate           gradient_corrected | taylor
 *   infer_at            all | comma separated steps
 *   lambda_grid_size, lambda_grid_ratio, bic_c, cv_folds, h_patience
 *   h_grid              LO:HI:COUNT (log spaced) | comma separated ascending radii
 *   rolling_raw_scaling true | false
 *   lasso_kkt_tol, lasso_max_iter
 *   seed */
SINDEX_API sindex_status sindex_config_new(sindex_config** out);
SINDEX_API void sindex_config_free(sindex_config* cfg);
SINDEX_API sindex_status sindex_config_set(sindex_config* cfg, const char* key, const char* value);
/* Applies every member of a flat JSON object; numbers and booleans are converted to their text form. */
SINDEX_API sindex_status sindex_config_load_json(sindex_config* cfg, const char* path);

/* x is row major: x[i * p + j] is covariate j of observation i. */
SINDEX_API sindex_status sindex_batch_new(const double* y, const double* x, size_t n, size_t p, sindex_batch** out);
SINDEX_API void sindex_batch_free(sindex_batch* batch);
SINDEX_API size_t sindex_batch_rows(const sindex_batch* batch);
SINDEX_API size_t sindex_batch_cols(const sindex_batch* batch);
/* *out is NULL for an empty file (end of stream). */
SINDEX_API sindex_status sindex_batch_read_csv(const char* path, sindex_batch** out);
SINDEX_API sindex_status sindex_batch_write_csv(const sindex_batch* batch, const char* path);

/* CSV files of a directory in lexicographic order, or records on standard input with blank lines
 * between batches. sindex_source_next sets *out to NULL at end of stream. */
SINDEX_API sindex_status sindex_source_open_dir(const char* dir, sindex_source** out);
SINDEX_API sindex_status sindex_source_open_stdin(sindex_source** out);
SINDEX_API sindex_status sindex_source_next(sindex_source* src, sindex_batch** out);
SINDEX_API void sindex_source_free(sindex_source* src);

SINDEX_API sindex_status sindex_engine_new(const sindex_config* cfg, sindex_engine** out);
/* Continues a stream from a saved state file. */
SINDEX_API sindex_status sindex_engine_resume(const sindex_config* cfg, const char* state_path, sindex_engine** out);
SINDEX_API void sindex_engine_free(sindex_engine* engine);
/* Processes one batch. *report receives the step's report when inference is configured for it, else NULL.
 * On failure the engine keeps its previous state. report may be NULL to discard. */
SINDEX_API sindex_status sindex_engine_ingest(sindex_engine* engine, const sindex_batch* batch, sindex_report** report);
SINDEX_API sindex_status sindex_engine_infer(sindex_engine* engine, sindex_report** out);
SINDEX_API sindex_status sindex_engine_save_state(const sindex_engine* engine, const char* path);
SINDEX_API uint64_t sindex_engine_step(const sindex_engine* engine);
SINDEX_API size_t sindex_engine_dim(const sindex_engine* engine);
SINDEX_API size_t sindex_engine_state_bytes(const sindex_engine* engine);

SINDEX_API void sindex_report_free(sindex_report* report);
SINDEX_API uint64_t sindex_report_step(const sindex_report* report);
SINDEX_API uint64_t sindex_report_n_total(const sindex_report* report);
SINDEX_API double sindex_report_alpha(const sindex_report* report);
SINDEX_API size_t sindex_report_dim(const sindex_report* report);
/* Copies a length-p field into out; len must equal the dimension. */
SINDEX_API sindex_status sindex_report_get(const sindex_report* report, sindex_field field, double* out, size_t len);
SINDEX_API void sindex_report_tunings(const sindex_report* report, double out[SINDEX_TUNE_COUNT]);
SINDEX_API sindex_status sindex_report_to_json(const sindex_report* report, char** out);
SINDEX_API sindex_status sindex_report_from_json(const char* json, sindex_report** out);
SINDEX_API sindex_status sindex_report_write(const sindex_report* report, const char* path);

/* JSON-lines log, one report per line. */
SINDEX_API sindex_status sindex_runlog_open(const char* path, int append, sindex_runlog** out);
SINDEX_API sindex_status sindex_runlog_append(sindex_runlog* log, const sindex_report* report);
SINDEX_API void sindex_runlog_free(sindex_runlog* log);
SINDEX_API sindex_status sindex_runlog_read(const char* path, sindex_report_list** out);
SINDEX_API size_t sindex_report_list_size(const sindex_report_list* list);
/* Borrowed pointer, valid until the list is freed. */
SINDEX_API const sindex_report* sindex_report_list_at(const sindex_report_list* list, size_t i);
SINDEX_API void sindex_report_list_free(sindex_report_list* list);

/* model: 1 or 2; error: gaussian | lognormal | t3 | weibull; cov: identity | toeplitz:RHO. */
SINDEX_API sindex_status sindex_simulator_new(int model, const char* error, const char* cov, size_t p, size_t s0,
                                              uint64_t seed, sindex_simulator** out);
SINDEX_API void sindex_simulator_free(sindex_simulator* sim);
/* Deterministic in (seed, replication, batch_index). */
SINDEX_API sindex_status sindex_simulator_generate(const sindex_simulator* sim, size_t n, uint64_t replication,
                                                   uint64_t batch_index, sindex_batch** out);
SINDEX_API sindex_status sindex_simulator_beta0(const sindex_simulator* sim, double* out, size_t len);
SINDEX_API sindex_status sindex_simulator_write_manifest(const sindex_simulator* sim, uint64_t replication, size_t m,
                                                         size_t n_batch, const char* path);

SINDEX_API sindex_status sindex_manifest_read(const char* path, sindex_manifest** out);
SINDEX_API void sindex_manifest_free(sindex_manifest* manifest);
SINDEX_API size_t sindex_manifest_dim(const sindex_manifest* manifest);
SINDEX_API size_t sindex_manifest_s0(const sindex_manifest* manifest);
SINDEX_API size_t sindex_manifest_batches(const sindex_manifest* manifest);
SINDEX_API sindex_status sindex_manifest_beta0(const sindex_manifest* manifest, double* out, size_t len);

/* 1 - cos(a, b). */
SINDEX_API sindex_status sindex_sine_distance(const double* a, const double* b, size_t p, double* out);
/* Rejection rates at p <= alpha over `count` reports; coordinates 1..s0 are signals. tpr has length s0. */
SINDEX_API sindex_status sindex_fpr_tpr(const sindex_report* const* reports, size_t count, size_t s0, double alpha,
                                        double* fpr, double* tpr);

#ifdef __cplusplus
}
#endif

#endif
