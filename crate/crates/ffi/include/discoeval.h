#ifndef DISCOEVAL_H
#define DISCOEVAL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DeAblation {
  DE_ABLATION_FULL = 0,
  DE_ABLATION_NO_REL = 1,
  DE_ABLATION_NO_NUC = 2,
  DE_ABLATION_NO_NUC_NO_REL = 3,
  DE_ABLATION_NO_DISCOURSE = 4,
} DeAblation;

typedef enum DeRepresentation {
  DE_REPRESENTATION_DR = 0,
  DE_REPRESENTATION_DR_LEX = 1,
  DE_REPRESENTATION_DR_LEX1 = 2,
  DE_REPRESENTATION_DR_LEX11 = 3,
  DE_REPRESENTATION_DR_LEX_E = 4,
} DeRepresentation;

typedef enum DeStatus {
  DE_STATUS_OK = 0,
  DE_STATUS_NULL_POINTER = 1,
  DE_STATUS_INVALID_UTF8 = 2,
  DE_STATUS_PARSE_ERROR = 3,
  DE_STATUS_INVALID_ARGUMENT = 4,
  DE_STATUS_COMPUTATION_ERROR = 5,
  DE_STATUS_IO_ERROR = 6,
  DE_STATUS_PANIC = 7,
} DeStatus;

/**
 * A trained metric combination.
 */
typedef struct DeModel DeModel;

/**
 * A parsed discourse tree.
 */
typedef struct DeTree DeTree;

typedef struct DeTreeStats {
  size_t depth;
  size_t edu_count;
  size_t token_count;
} DeTreeStats;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *de_version(void);

/**
 * Message of the last failed call on this thread, or NULL. Valid until the
 * next failing call on the same thread.
 */
const char *de_last_error(void);

/**
 * Parses one tree from its JSON form.
 *
 * # Safety
 * `json` must be a valid NUL-terminated string and `out` a valid pointer.
 */
enum DeStatus de_tree_parse(const char *json, bool strict, struct DeTree **out);

/**
 * # Safety
 * `tree` must come from `de_tree_parse` and not have been freed. NULL is a
 * no-op.
 */
void de_tree_free(struct DeTree *tree);

/**
 * # Safety
 * `tree` and `out` must be valid pointers.
 */
enum DeStatus de_tree_stats(const struct DeTree *tree, struct DeTreeStats *out);

/**
 * Renders the kernel-side representation of a tree as text. With an
 * ablation other than `Full` the representation argument is ignored.
 *
 * # Safety
 * `tree` and `out` must be valid pointers. The string stored in `*out`
 * must be released with `de_string_free`.
 */
enum DeStatus de_tree_render(const struct DeTree *tree,
                             enum DeRepresentation rep,
                             enum DeAblation abl,
                             char **out);

/**
 * Normalized kernel similarity. A NULL tree stands for a missing parse and
 * yields 0.
 *
 * # Safety
 * Non-null tree pointers must be valid; `out` must be valid.
 */
enum DeStatus de_similarity(const struct DeTree *reference,
                            const struct DeTree *hypothesis,
                            enum DeRepresentation rep,
                            enum DeAblation abl,
                            double decay,
                            double *out);

/**
 * # Safety
 * `x` and `y` must point to `n` doubles; `out` must be valid.
 */
enum DeStatus de_pearson(const double *x, const double *y, size_t n, double *out);

/**
 * Spearman's rho with average ranks for ties.
 *
 * # Safety
 * `x` and `y` must point to `n` doubles; `out` must be valid.
 */
enum DeStatus de_spearman(const double *x, const double *y, size_t n, double *out);

/**
 * Loads a model from a JSON file written by `discoeval tune`.
 *
 * # Safety
 * `path` must be a valid NUL-terminated string and `out` a valid pointer.
 */
enum DeStatus de_model_load(const char *path, struct DeModel **out);

/**
 * # Safety
 * `model` must be a valid handle or NULL.
 */
size_t de_model_metric_count(const struct DeModel *model);

/**
 * Name of the model's `index`-th metric, owned by the model. NULL when out
 * of range.
 *
 * # Safety
 * `model` must be a valid handle or NULL.
 */
const char *de_model_metric_name(const struct DeModel *model, size_t index);

/**
 * Combined score from `n` raw metric scores given in model metric order.
 *
 * # Safety
 * `model` must be a valid handle, `raw` must point to `n` doubles and
 * `out` must be valid.
 */
enum DeStatus de_model_score(const struct DeModel *model, const double *raw, size_t n, double *out);

/**
 * # Safety
 * `model` must come from `de_model_load` and not have been freed. NULL is
 * a no-op.
 */
void de_model_free(struct DeModel *model);

/**
 * # Safety
 * `s` must be a string returned by this library, or NULL.
 */
void de_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DISCOEVAL_H */
