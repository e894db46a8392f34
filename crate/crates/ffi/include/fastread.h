/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef FASTREAD_H
#define FASTREAD_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  FR_STATUS_OK = 0,
  FR_STATUS_NULL_POINTER = 1,
  FR_STATUS_INVALID_ARGUMENT = 2,
  FR_STATUS_IO = 3,
  FR_STATUS_CORPUS = 4,
  FR_STATUS_REVIEW = 5,
  FR_STATUS_EXHAUSTED = 6,
  FR_STATUS_PANIC = 7,
} FrStatus;

typedef enum {
  FR_PHASE_RANDOM = 0,
  FR_PHASE_UNCERTAINTY = 1,
  FR_PHASE_CERTAINTY = 2,
} FrPhase;

/**
 * A loaded candidate-study list.
 */
typedef struct FrCorpus FrCorpus;

/**
 * An interactive review over a corpus.
 */
typedef struct FrReview FrReview;

/**
 * Outcome of one simulated review.
 */
typedef struct {
  size_t candidates;
  size_t relevant;
  size_t x95;
  double wss95;
  size_t missed;
} FrSimSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. The pointer is
 * valid until the next call into this library on the same thread.
 */
const char *fr_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *fr_version(void);

/**
 * Loads a CSV file with the standard study columns.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
FrStatus fr_corpus_load_csv(const char *path, FrCorpus **out);

/**
 * # Safety
 * `corpus` must be a live handle; `out_len` must be writable.
 */
FrStatus fr_corpus_len(const FrCorpus *corpus, size_t *out_len);

/**
 * Number of studies labeled relevant, or an error if the corpus has no
 * labels.
 *
 * # Safety
 * `corpus` must be a live handle; `out` must be writable.
 */
FrStatus fr_corpus_relevant(const FrCorpus *corpus, size_t *out);

/**
 * # Safety
 * `corpus` must be null or a handle not yet freed.
 */
void fr_corpus_free(FrCorpus *corpus);

/**
 * Starts a review of `corpus` with `treatment` (e.g. "HUTM" or "linear").
 * The corpus handle may be freed afterwards.
 *
 * # Safety
 * `corpus` must be a live handle, `treatment` a NUL-terminated string and
 * `out` writable.
 */
FrStatus fr_review_new(const FrCorpus *corpus,
                       const char *treatment,
                       uint64_t seed,
                       FrReview **out);

/**
 * Selects up to `cap` studies to review next, writing their ids to `ids`
 * and the count to `out_len`. Returns `Exhausted` when nothing is left.
 *
 * # Safety
 * `review` must be a live handle; `ids` must have room for `cap` values;
 * `out_len` and `out_phase` must be writable (`out_phase` may be null).
 */
FrStatus fr_review_next(FrReview *review,
                        size_t *ids,
                        size_t cap,
                        size_t *out_len,
                        FrPhase *out_phase);

/**
 * Records a decision; re-labeling overwrites.
 *
 * # Safety
 * `review` must be a live handle.
 */
FrStatus fr_review_label(FrReview *review, size_t id, bool relevant);

/**
 * # Safety
 * `review` must be a live handle; the out pointers must be writable.
 */
FrStatus fr_review_status(const FrReview *review, size_t *found, size_t *coded, size_t *total);

/**
 * # Safety
 * `review` must be null or a handle not yet freed.
 */
void fr_review_free(FrReview *review);

/**
 * Simulates one review of a fully labeled corpus until `target_recall` of
 * the relevant studies are found.
 *
 * # Safety
 * `corpus` must be a live handle, `treatment` a NUL-terminated string and
 * `out` writable.
 */
FrStatus fr_simulate(const FrCorpus *corpus,
                     const char *treatment,
                     uint64_t seed,
                     double target_recall,
                     FrSimSummary *out);

/**
 * `0.95 - x95 / pool`.
 *
 * # Safety
 * `out` must be writable.
 */
FrStatus fr_wss_at_95(size_t x95, size_t pool, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FASTREAD_H */
