#ifndef LIBERTYLEX_H
#define LIBERTYLEX_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes. Library failures use the same numbers as the CLI exit codes.
 */
typedef enum LlxStatus {
  LLX_STATUS_OK = 0,
  LLX_STATUS_NULL_POINTER = 1,
  LLX_STATUS_INVALID_ARGUMENT = 2,
  LLX_STATUS_IO = 3,
  LLX_STATUS_PARSE = 4,
  LLX_STATUS_NOT_FOUND = 5,
  LLX_STATUS_CORPUS = 10,
  LLX_STATUS_EMBEDDING = 11,
  LLX_STATUS_SEED_SELECTION = 12,
  LLX_STATUS_WE_LEXICON = 13,
  LLX_STATUS_CS_LEXICON = 14,
  LLX_STATUS_LEXICON_CORE = 15,
  LLX_STATUS_FEATURIZE = 16,
  LLX_STATUS_LEARN = 17,
  LLX_STATUS_EXPERIMENTS = 18,
  LLX_STATUS_OTHER = 19,
  LLX_STATUS_PANIC = 99,
} LlxStatus;

typedef struct LlxDataset LlxDataset;

typedef struct LlxLexicon LlxLexicon;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. Valid until the next
 * failing call on the same thread.
 */
const char *llx_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *llx_version(void);

/**
 * Loads a JSONL dataset. `scheme` is `ternary`, `binary_moral` or `binary_side`.
 *
 * # Safety
 * `path` and `scheme` must be NUL-terminated strings; `out` must be writable.
 */
enum LlxStatus llx_dataset_load(const char *path, const char *scheme, struct LlxDataset **out);

/**
 * Tokenizes every document into a new dataset. `stopwords` is `english`,
 * `none` or a file path.
 *
 * # Safety
 * `dataset` must be a live handle; `stopwords` a NUL-terminated string; `out` writable.
 */
enum LlxStatus llx_dataset_preprocess(const struct LlxDataset *dataset,
                                      const char *stopwords,
                                      struct LlxDataset **out);

/**
 * Number of documents, or 0 for a null handle.
 *
 * # Safety
 * `dataset` must be null or a live handle.
 */
size_t llx_dataset_len(const struct LlxDataset *dataset);

/**
 * # Safety
 * `dataset` must be null or a handle not yet freed.
 */
void llx_dataset_free(struct LlxDataset *dataset);

/**
 * Builds the compositional lexicon of a tokenized binary dataset.
 *
 * # Safety
 * `dataset` must be a live handle; `out` writable.
 */
enum LlxStatus llx_generate_cs(const struct LlxDataset *dataset,
                               uint64_t min_frequency,
                               struct LlxLexicon **out);

/**
 * # Safety
 * `path` must be a NUL-terminated string; `out` writable.
 */
enum LlxStatus llx_lexicon_load(const char *path, struct LlxLexicon **out);

/**
 * # Safety
 * `lexicon` must be a live handle; `path` a NUL-terminated string.
 */
enum LlxStatus llx_lexicon_save(const struct LlxLexicon *lexicon, const char *path);

/**
 * Number of entries, or 0 for a null handle.
 *
 * # Safety
 * `lexicon` must be null or a live handle.
 */
size_t llx_lexicon_len(const struct LlxLexicon *lexicon);

/**
 * Writes the score of `token` to `score`; `NotFound` if absent.
 *
 * # Safety
 * `lexicon` must be a live handle; `token` a NUL-terminated string; `score` writable.
 */
enum LlxStatus llx_lexicon_score(const struct LlxLexicon *lexicon,
                                 const char *token,
                                 double *score);

/**
 * Overlap merge of `count` lexicons. `rescale` is `none`,
 * `minmax_symmetric` or `zscore`.
 *
 * # Safety
 * `lexicons` must point to `count` live handles; `rescale` a NUL-terminated
 * string; `out` writable.
 */
enum LlxStatus llx_lexicon_merge(const struct LlxLexicon *const *lexicons,
                                 size_t count,
                                 double selection,
                                 const char *rescale,
                                 struct LlxLexicon **out);

/**
 * # Safety
 * `lexicon` must be null or a handle not yet freed.
 */
void llx_lexicon_free(struct LlxLexicon *lexicon);

/**
 * Friedman test over a row-major `blocks × methods` score table (higher is
 * better). Writes the average rank of each method to `average_ranks`.
 *
 * # Safety
 * `scores` must hold `blocks * methods` values; `average_ranks` room for
 * `methods`; `statistic` and `p_value` must be writable.
 */
enum LlxStatus llx_friedman(const double *scores,
                            size_t blocks,
                            size_t methods,
                            double alpha,
                            double *average_ranks,
                            double *statistic,
                            double *p_value);

/**
 * Macro-averaged F1 over integer class labels.
 *
 * # Safety
 * `truth` and `predicted` must each hold `n` values; `out` writable.
 */
enum LlxStatus llx_f1_macro(const int32_t *truth, const int32_t *predicted, size_t n, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LIBERTYLEX_H */
