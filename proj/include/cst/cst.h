/* C interface to libcst.
 *
 * All objects are opaque handles created and destroyed by the library.
 * Every fallible call returns a cst_status; on failure the calling thread's
 * cst_last_error() describes the problem until its next failing call.
 * Strings returned through char** out-parameters are owned by the caller and
 * released with cst_string_free. Paths are UTF-8.
 */
#ifndef CST_CST_H
#define CST_CST_H

#include <stddef.h>
#include <stdint.h>

#if defined(CST_BUILDING_LIBRARY)
#define CST_API __attribute__((visibility("default")))
#else
#define CST_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum cst_status {
  CST_OK = 0,
  CST_PARTIAL = 1,          /* stage finished with excluded or failed items */
  CST_ERR_INVALID_ARGUMENT = 2,
  CST_ERR_IO = 3,
  CST_ERR_PARSE = 4,
  CST_ERR_VALIDATION = 5,
  CST_ERR_DIVERGENCE = 6,
  CST_ERR_TRANSPORT = 7,
  CST_ERR_INTERNAL = 8,
  CST_ERR_STAGE_FAILED = 9  /* pipeline stage failed; details went to the log */
} cst_status;

typedef enum cst_log_level { CST_LOG_INFO = 0, CST_LOG_WARNING = 1, CST_LOG_ERROR = 2 } cst_log_level;

typedef void (*cst_log_fn)(cst_log_level level, const char* message, void* user);

typedef struct cst_config cst_config;
typedef struct cst_pipeline cst_pipeline;
typedef struct cst_model cst_model;
typedef struct cst_reference cst_reference;
typedef struct cst_dataset cst_dataset;

CST_API const char* cst_version(void);
CST_API const char* cst_last_error(void);
CST_API const char* cst_status_name(cst_status status);
/* Process exit code for a status: 0 ok, 2 partial, 1 otherwise. */
CST_API int cst_exit_code(cst_status status);
CST_API void cst_string_free(char* s);

/* Run configuration (JSON). Unknown keys are rejected. */
CST_API cst_status cst_config_default(cst_config** out);
CST_API cst_status cst_config_parse(const char* json, cst_config** out);
CST_API cst_status cst_config_load(const char* path, cst_config** out);
CST_API cst_status cst_config_to_json(const cst_config* cfg, char** out);
CST_API cst_status cst_config_set_seed(cst_config* cfg, uint64_t seed);
CST_API cst_status cst_config_set_out_dir(cst_config* cfg, const char* path);
CST_API cst_status cst_config_set_data_dir(cst_config* cfg, const char* path);
CST_API void cst_config_free(cst_config* cfg);

/* File-based pipeline stages. `log` may be NULL. The pipeline copies the
 * configuration, so later edits to `cfg` do not affect it. */
CST_API cst_status cst_pipeline_new(const cst_config* cfg, cst_log_fn log, void* user,
                                    cst_pipeline** out);
CST_API void cst_pipeline_free(cst_pipeline* p);

/* task: "safety" or "persona"; mode: "cst" or "dpo-only". */
CST_API cst_status cst_toy_prompts(cst_pipeline* p, const char* task, const char* train_out,
                                   const char* test_out);
CST_API cst_status cst_synth(cst_pipeline* p, const char* task, const char* prompts, const char* out,
                             int remote, int allow_partial);
CST_API cst_status cst_augment(cst_pipeline* p, const char* task, const char* mode, const char* in,
                               const char* out);
CST_API cst_status cst_mix(cst_pipeline* p, const char* const* inputs, size_t n_inputs,
                           const char* out);
CST_API cst_status cst_pretrain(cst_pipeline* p, const char* const* pair_files, size_t n_files,
                                const char* out);
/* init may be NULL (random init). */
CST_API cst_status cst_train(cst_pipeline* p, const char* data, const char* init, const char* out_dir);
/* Either prompt file may be NULL, not both. */
CST_API cst_status cst_eval(cst_pipeline* p, const char* model, const char* safety_prompts,
                            const char* persona_prompts, const char* name, const char* out_dir,
                            int remote);
CST_API cst_status cst_report(cst_pipeline* p, const char* const* score_files, size_t n_files,
                              const char* out_dir);

/* Models and checkpoints. */
CST_API cst_status cst_model_load(const char* path, cst_model** out);
CST_API cst_status cst_model_save(const cst_model* m, const char* path);
CST_API void cst_model_free(cst_model* m);
CST_API size_t cst_model_vocab_size(const cst_model* m);
CST_API size_t cst_model_param_count(const cst_model* m);
/* log pi(y | s, x) in nats. */
CST_API cst_status cst_model_seq_logprob(const cst_model* m, const char* system, const char* prompt,
                                         const char* answer, double* out);
CST_API cst_status cst_model_generate(const cst_model* m, const char* system, const char* prompt,
                                      int max_len, char** out);

/* Frozen copy of a model. */
CST_API cst_status cst_model_snapshot(const cst_model* m, cst_reference** out);
CST_API void cst_reference_free(cst_reference* r);
CST_API cst_status cst_reference_seq_logprob(const cst_reference* r, const char* system,
                                             const char* prompt, const char* answer, double* out);

/* Preference tuples (JSONL). */
CST_API cst_status cst_dataset_load(const char* path, cst_dataset** out);
CST_API cst_status cst_dataset_save(const cst_dataset* d, const char* path);
CST_API size_t cst_dataset_size(const cst_dataset* d);
CST_API void cst_dataset_free(cst_dataset* d);

/* Mean DPO loss of `policy` against `reference` over `data`. */
CST_API cst_status cst_dpo_loss(const cst_model* policy, const cst_reference* reference,
                                const cst_dataset* data, double beta, double* out);

#ifdef __cplusplus
}
#endif

#endif /* CST_CST_H */
