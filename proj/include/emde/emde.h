/*
 * C interface to the emde library.
 *
 * Every object is an opaque handle created by a *_load / *_fit / *_create
 * style call and released with the matching *_free. Functions return an
 * emde_status; on failure emde_last_error() holds a message for the calling
 * thread until its next failing call.
 */
#ifndef EMDE_EMDE_H_
#define EMDE_EMDE_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(EMDE_BUILDING_LIBRARY)
#    define EMDE_API __declspec(dllexport)
#  else
#    define EMDE_API __declspec(dllimport)
#  endif
#else
#  define EMDE_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum emde_status {
  EMDE_OK = 0,
  EMDE_ERR_INVALID_ARGUMENT = 1,
  EMDE_ERR_IO = 2,
  EMDE_ERR_FORMAT = 3,
  EMDE_ERR_SHAPE = 4,
  EMDE_ERR_NUMERIC = 5,
  EMDE_ERR_NOT_FOUND = 6,
  EMDE_ERR_INTERNAL = 99
} emde_status;

typedef enum emde_aggregator {
  EMDE_AGG_GMEAN = 0,
  EMDE_AGG_MIN = 1,
  EMDE_AGG_MEAN = 2,
  EMDE_AGG_HMEAN = 3
} emde_aggregator;

typedef enum emde_norm { EMDE_NORM_L1 = 0, EMDE_NORM_L2 = 1 } emde_norm;

typedef struct emde_embeddings emde_embeddings;
typedef struct emde_partitioning emde_partitioning;
typedef struct emde_codes emde_codes;
typedef struct emde_sketch emde_sketch;
typedef struct emde_config emde_config;

EMDE_API const char* emde_version(void);
EMDE_API const char* emde_last_error(void);
/* Worker threads for parallel loops; n <= 0 restores the EMDE_THREADS default. */
EMDE_API void emde_set_threads(int n);

/* Embedding tables */
EMDE_API emde_status emde_embeddings_load(const char* path, const char* modality, emde_embeddings** out);
EMDE_API emde_status emde_embeddings_save(const emde_embeddings* emb, const char* path);
EMDE_API size_t emde_embeddings_count(const emde_embeddings* emb);
EMDE_API size_t emde_embeddings_dim(const emde_embeddings* emb);
EMDE_API void emde_embeddings_free(emde_embeddings* emb);

/* DLSH partitionings. width <= 0 selects 2^bits. */
EMDE_API emde_status emde_partitioning_fit(const emde_embeddings* emb, int depth, int bits, int width, uint64_t seed,
                                           emde_partitioning** out);
EMDE_API emde_status emde_partitioning_load(const char* path, emde_partitioning** out);
EMDE_API emde_status emde_partitioning_save(const emde_partitioning* p, const char* path);
/* codes_out receives depth entries. */
EMDE_API emde_status emde_partitioning_hash(const emde_partitioning* p, const double* point, size_t dim,
                                            int32_t* codes_out);
EMDE_API void emde_partitioning_free(emde_partitioning* p);

/* Codes matrices */
EMDE_API emde_status emde_codes_assign(const emde_partitioning* p, const emde_embeddings* emb, emde_codes** out);
EMDE_API emde_status emde_codes_random(const char* const* item_ids, size_t n_items, int depth, int width,
                                       uint64_t seed, emde_codes** out);
EMDE_API emde_status emde_codes_load(const char* path, emde_codes** out);
EMDE_API emde_status emde_codes_save(const emde_codes* codes, const char* path);
EMDE_API size_t emde_codes_count(const emde_codes* codes);
EMDE_API int emde_codes_depth(const emde_codes* codes);
EMDE_API int emde_codes_width(const emde_codes* codes);
/* Item id of a row; the pointer stays valid while the handle lives. */
EMDE_API const char* emde_codes_item_id(const emde_codes* codes, size_t row);
EMDE_API emde_status emde_codes_row(const emde_codes* codes, const char* item_id, int32_t* codes_out);
EMDE_API void emde_codes_free(emde_codes* codes);

/* Sketches */
EMDE_API emde_status emde_sketch_create(int depth, int width, emde_sketch** out);
EMDE_API emde_status emde_sketch_encode(const emde_codes* codes, const char* item_id, emde_sketch** out);
/* weights may be NULL for unit weights. */
EMDE_API emde_status emde_sketch_aggregate(const emde_codes* codes, const char* const* item_ids, const double* weights,
                                           size_t n_items, emde_sketch** out);
/* dst += weight * src */
EMDE_API emde_status emde_sketch_add(emde_sketch* dst, const emde_sketch* src, double weight);
EMDE_API emde_status emde_sketch_normalize(emde_sketch* s, emde_norm norm);
EMDE_API emde_status emde_sketch_decay(emde_sketch* s, double alpha, double w, double dt);
/* scores_out receives emde_codes_count(codes) values in row order. */
EMDE_API emde_status emde_sketch_decode(const emde_sketch* s, const emde_codes* codes, emde_aggregator agg,
                                        double* scores_out, size_t n_scores);
EMDE_API int emde_sketch_depth(const emde_sketch* s);
EMDE_API int emde_sketch_width(const emde_sketch* s);
EMDE_API const double* emde_sketch_values(const emde_sketch* s, size_t* length);
EMDE_API emde_status emde_sketch_load(const char* path, emde_sketch** out);
EMDE_API emde_status emde_sketch_save(const emde_sketch* s, const char* path);
EMDE_API void emde_sketch_free(emde_sketch* s);

/* Experiment configs and commands. Overrides use "section.key" names, e.g.
 * "experiment.seed" or "modality.meta.depth". The file is re-read by every
 * command with the overrides applied on top. */
EMDE_API emde_status emde_config_load(const char* path, emde_config** out);
EMDE_API emde_status emde_config_set(emde_config* cfg, const char* key, const char* value);
EMDE_API void emde_config_free(emde_config* cfg);

/* Each command writes artifacts into the configured output directory. When
 * summary is non-NULL it receives a malloc'ed text summary to release with
 * emde_string_free. */
EMDE_API emde_status emde_cmd_fit_partitions(emde_config* cfg, char** summary);
EMDE_API emde_status emde_cmd_encode(emde_config* cfg, const char* modality, const char* const* item_ids,
                                     const double* weights, size_t n_items, const char* out_path, char** summary);
/* resume_checkpoint may be NULL; max_epochs <= 0 trains to the configured epoch count. */
EMDE_API emde_status emde_cmd_train(emde_config* cfg, const char* resume_checkpoint, int max_epochs, char** summary);
/* checkpoint may be NULL (defaults to <output_dir>/model.ckpt; unused by non-conditional modes). */
EMDE_API emde_status emde_cmd_evaluate(emde_config* cfg, const char* checkpoint, char** summary);
EMDE_API emde_status emde_cmd_density_sweep(emde_config* cfg, char** summary);
EMDE_API emde_status emde_cmd_ablate(emde_config* cfg, char** summary);
EMDE_API emde_status emde_make_toy_dataset(const char* dir, uint64_t seed, char** summary);
EMDE_API void emde_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif /* EMDE_EMDE_H_ */
