#ifndef VDGR_VDGR_H
#define VDGR_VDGR_H

/* C interface to the vdgr library. Every call returns a vdgr_status; on
 * failure vdgr_last_error() describes the problem (per thread). Strings
 * returned through char** out-parameters are owned by the caller and must be
 * released with vdgr_string_free. */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define VDGR_API __declspec(dllexport)
#else
#define VDGR_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum vdgr_status {
  VDGR_OK = 0,
  VDGR_ERR_INVALID_ARGUMENT = 1,
  VDGR_ERR_IO = 2,
  VDGR_ERR_PARSE = 3,
  VDGR_ERR_CONFIG_MISMATCH = 4,
  VDGR_ERR_NUMERIC = 5,
  VDGR_ERR_SKIPPED = 6,
  VDGR_ERR_INTERNAL = 7
} vdgr_status;

typedef struct vdgr_config vdgr_config;
typedef struct vdgr_dataset vdgr_dataset;
typedef struct vdgr_model vdgr_model;

VDGR_API const char* vdgr_version(void);
VDGR_API const char* vdgr_last_error(void);
VDGR_API const char* vdgr_status_name(vdgr_status status);
VDGR_API void vdgr_string_free(char* s);

/* ---- configuration ---- */

/* stage: "warmup", "sparse" or "dense"; picks the stage defaults. */
VDGR_API vdgr_status vdgr_config_default(const char* stage, vdgr_config** out);
VDGR_API vdgr_status vdgr_config_load(const char* path, const char* stage, vdgr_config** out);
VDGR_API vdgr_status vdgr_config_set(vdgr_config* cfg, const char* key, const char* value);
VDGR_API vdgr_status vdgr_config_get(const vdgr_config* cfg, const char* key, char** value);
/* Architecture hash (16 hex digits). */
VDGR_API vdgr_status vdgr_config_hash(const vdgr_config* cfg, char** hash);
VDGR_API void vdgr_config_free(vdgr_config* cfg);

/* ---- data ---- */

VDGR_API vdgr_status vdgr_generate_toy_dataset(const char* out_dir, const char* split, uint64_t seed, int dialogs,
                                               int regions, int candidates, int rounds, int region_dim);
/* Reads data_dir from the config and the files of `split`. */
VDGR_API vdgr_status vdgr_dataset_load(const vdgr_config* cfg, const char* split, vdgr_dataset** out);
VDGR_API size_t vdgr_dataset_size(const vdgr_dataset* data);
VDGR_API vdgr_status vdgr_dataset_rounds(const vdgr_dataset* data, size_t dialog, int* rounds);
VDGR_API void vdgr_dataset_free(vdgr_dataset* data);

/* Any of parses / corefs may be NULL. Writes image_graphs.jsonl,
 * question_graphs.jsonl and history_graphs.jsonl into out_dir. */
VDGR_API vdgr_status vdgr_build_graphs(const char* boxes_path, const char* parses_path, const char* corefs_path,
                                       const char* out_dir);
/* Relation-class histogram of DIR/<modality>_graphs.jsonl as JSON. */
VDGR_API vdgr_status vdgr_graph_stats(const char* graphs_dir, const char* modality, char** json);

/* ---- models ---- */

/* Fresh model; the vocabulary is built from `vocab_source`. */
VDGR_API vdgr_status vdgr_model_create(const vdgr_config* cfg, const vdgr_dataset* vocab_source, vdgr_model** out);
VDGR_API vdgr_status vdgr_model_load(const char* checkpoint_path, vdgr_model** out);
VDGR_API vdgr_status vdgr_model_save(const vdgr_model* model, const char* checkpoint_path);
/* Rejects with VDGR_ERR_CONFIG_MISMATCH if the architectures differ. */
VDGR_API vdgr_status vdgr_model_check_config(const vdgr_model* model, const vdgr_config* cfg);
VDGR_API size_t vdgr_model_parameter_count(const vdgr_model* model);
VDGR_API void vdgr_model_free(vdgr_model* model);

/* Runs the stage configured in `cfg`. Loss and learning-rate logs go to
 * log_dir when it is not NULL. */
VDGR_API vdgr_status vdgr_train(vdgr_model* model, const vdgr_config* cfg, const vdgr_dataset* data,
                                const char* log_dir);

/* Writes `n` NSP probabilities for round (1-based) of dialog `dialog`. */
VDGR_API vdgr_status vdgr_score_candidates(const vdgr_model* model, const vdgr_dataset* data, size_t dialog, int round,
                                           double* scores, size_t capacity, size_t* n);

/* Metric report JSON. If out_dir is not NULL writes metrics.json, ranks.txt
 * and (with dump_attention) attention.jsonl there. */
VDGR_API vdgr_status vdgr_evaluate(const vdgr_model* model, const vdgr_dataset* data, int dump_attention,
                                   const char* out_dir, char** report);
VDGR_API vdgr_status vdgr_evaluate_ensemble(const vdgr_model* const* models, size_t count, const vdgr_dataset* data,
                                            const char* out_dir, char** report);

/* name: lambda0, no_warmup, no_sharing or no_hub. config_path is read for
 * both the warm-up and the sparse stage. */
VDGR_API vdgr_status vdgr_run_ablation(const char* config_path, const char* name, const vdgr_dataset* data,
                                       const uint64_t* seeds, size_t seed_count, char** report_json, char** table);

#ifdef __cplusplus
}
#endif

#endif
