#ifndef PLAUSIBLE_H
#define PLAUSIBLE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result of every fallible call.
 */
typedef enum PlStatus {
  PL_STATUS_OK = 0,
  PL_STATUS_NULL_POINTER = 1,
  PL_STATUS_INVALID_UTF8 = 2,
  PL_STATUS_IO = 3,
  PL_STATUS_PARSE = 4,
  PL_STATUS_EMPTY = 5,
  PL_STATUS_INVALID_ARGUMENT = 6,
  /*
   A word of the triple has no vector.
   */
  PL_STATUS_OOV = 7,
  PL_STATUS_PANIC = 8,
} PlStatus;

typedef struct PlEmbeddings PlEmbeddings;

typedef struct PlModel PlModel;

typedef struct PlSampler PlSampler;

typedef struct PlStore PlStore;

/*
 Confusion counts; `fp_share` is NaN when there are no errors.
 */
typedef struct PlReport {
  double accuracy;
  uint64_t tp;
  uint64_t fp;
  uint64_t tn;
  uint64_t fn_;
  double fp_share;
} PlReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message for the last failed call on this thread. Empty if none. Valid
 until the next failing call on the same thread.
 */
const char *pl_last_error_message(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *pl_version(void);

/*
 Release a string returned by this library. Null is ignored.

 # Safety
 `s` must come from this library and not have been freed.
 */
void pl_string_free(char *s);

/*
 Load a `subject\tverb\tobject\tcount` file.

 # Safety
 `path` must be a NUL-terminated string; `out` must be writable.
 */
enum PlStatus pl_store_load(const char *path, struct PlStore **out);

/*
 Extract triples from `n_paths` CoNLL-U files. Malformed sentences are
 skipped unless `strict` is set.

 # Safety
 `paths` must point to `n_paths` NUL-terminated strings; `out` must be
 writable.
 */
enum PlStatus pl_store_from_conllu(const char *const *paths,
                                   size_t n_paths,
                                   bool include_passive,
                                   bool strict,
                                   struct PlStore **out);

/*
 # Safety
 `store` must be a live handle; `path` a NUL-terminated string.
 */
enum PlStatus pl_store_save(const struct PlStore *store, const char *path);

/*
 Count of one triple; 0 if unattested.

 # Safety
 `store` must be a live handle; the lemmas NUL-terminated; `out` writable.
 */
enum PlStatus pl_store_count(const struct PlStore *store,
                             const char *subject,
                             const char *verb,
                             const char *object,
                             uint64_t *out);

/*
 Number of distinct triples; 0 for a null handle.

 # Safety
 `store` must be null or a live handle.
 */
size_t pl_store_unique_len(const struct PlStore *store);

/*
 Sum of all counts; 0 for a null handle.

 # Safety
 `store` must be null or a live handle.
 */
uint64_t pl_store_total(const struct PlStore *store);

/*
 # Safety
 `store` must be null or a handle not yet freed.
 */
void pl_store_free(struct PlStore *store);

/*
 Write a balanced self-supervised dataset of `2 * n_positive` rows.

 # Safety
 `store` must be a live handle; `path` a NUL-terminated string.
 */
enum PlStatus pl_dataset_build(const struct PlStore *store,
                               size_t n_positive,
                               uint64_t seed,
                               const char *path);

/*
 Negative sampler over a copy of `store`. `max_resample = 0` disables
 rejection of attested draws.

 # Safety
 `store` must be a live handle; `out` writable.
 */
enum PlStatus pl_sampler_new(const struct PlStore *store,
                             size_t max_resample,
                             uint64_t seed,
                             struct PlSampler **out);

/*
 Draw one negative as `subject\tverb\tobject` into `*triple_out` (free
 with `pl_string_free`). `*collision` is set when the draw is attested.

 # Safety
 `sampler` must be a live handle; the out pointers writable.
 */
enum PlStatus pl_sampler_sample(struct PlSampler *sampler, char **triple_out, bool *collision);

/*
 # Safety
 `sampler` must be null or a handle not yet freed.
 */
void pl_sampler_free(struct PlSampler *sampler);

/*
 Load text vectors. Triples with an unknown word are not scored.

 # Safety
 `path` must be a NUL-terminated string; `out` writable.
 */
enum PlStatus pl_embeddings_load(const char *path, struct PlEmbeddings **out);

/*
 Vector dimension; 0 for a null handle.

 # Safety
 `emb` must be null or a live handle.
 */
size_t pl_embeddings_dim(const struct PlEmbeddings *emb);

/*
 # Safety
 `emb` must be null or a handle not yet freed.
 */
void pl_embeddings_free(struct PlEmbeddings *emb);

/*
 Load a classifier checkpoint.

 # Safety
 `path` must be a NUL-terminated string; `out` writable.
 */
enum PlStatus pl_model_load(const char *path, struct PlModel **out);

/*
 Input vector dimension the model expects; 0 for a null handle.

 # Safety
 `model` must be null or a live handle.
 */
size_t pl_model_dim(const struct PlModel *model);

/*
 Plausibility probability of a triple and its label (1 plausible, 0 not).
 Returns `Oov` when a word has no vector.

 # Safety
 Handles must be live; lemmas NUL-terminated; out pointers writable.
 */
enum PlStatus pl_model_predict(const struct PlModel *model,
                               const struct PlEmbeddings *emb,
                               const char *subject,
                               const char *verb,
                               const char *object,
                               double *probability,
                               int32_t *label);

/*
 # Safety
 `model` must be null or a handle not yet freed.
 */
void pl_model_free(struct PlModel *model);

/*
 Accuracy and confusion counts of `n` predictions against labels, both
 given as 0/1 bytes.

 # Safety
 `predictions` and `labels` must point to `n` readable bytes; `out`
 writable.
 */
enum PlStatus pl_report_compute(const uint8_t *predictions,
                                const uint8_t *labels,
                                size_t n,
                                struct PlReport *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PLAUSIBLE_H */
