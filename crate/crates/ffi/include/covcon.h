#ifndef COVCON_H
#define COVCON_H

#include <stddef.h>
#include <stdint.h>

/**
 * Result codes.
 */
typedef enum CovconStatus {
  COVCON_STATUS_OK = 0,
  COVCON_STATUS_NULL_POINTER = 1,
  COVCON_STATUS_INVALID_UTF8 = 2,
  COVCON_STATUS_PARSE_ERROR = 3,
  COVCON_STATUS_INVALID_ARGUMENT = 4,
  COVCON_STATUS_OUT_OF_RANGE = 5,
  COVCON_STATUS_BACKEND_ERROR = 6,
  COVCON_STATUS_PANIC = 7,
} CovconStatus;

/**
 * A lexicon scorer for one language pair, with its reverse.
 */
typedef struct CovconScorer CovconScorer;

/**
 * Parsed CoNLL-U sentences.
 */
typedef struct CovconSentences CovconSentences;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. Valid until
 * the next library call on the same thread.
 */
const char *covcon_last_error(void);

/**
 * Library version, a static string.
 */
const char *covcon_version(void);

/**
 * Releases a string returned by the library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void covcon_string_free(char *s);

/**
 * Parses CoNLL-U text.
 *
 * # Safety
 * `conllu` must be a nul-terminated string; `out` a valid pointer.
 */
enum CovconStatus covcon_sentences_parse(const char *conllu, struct CovconSentences **out);

/**
 * Number of parsed sentences; 0 for null.
 *
 * # Safety
 * `handle` must be null or a live handle.
 */
uintptr_t covcon_sentences_count(const struct CovconSentences *handle);

/**
 * # Safety
 * `handle` must be null or a live handle, not used afterwards.
 */
void covcon_sentences_free(struct CovconSentences *handle);

/**
 * Candidate spans of one sentence as a JSON array. `pos_tags` is a
 * comma-separated UPOS list, or null for the default set.
 *
 * # Safety
 * Pointers must be valid; `pos_tags` may be null.
 */
enum CovconStatus covcon_spans_json(const struct CovconSentences *handle,
                                    uintptr_t index,
                                    const char *pos_tags,
                                    char **out_json);

/**
 * Builds a lexicon scorer from `source<TAB>target` lines.
 *
 * # Safety
 * String arguments must be nul-terminated; `out` a valid pointer.
 */
enum CovconStatus covcon_lexicon_scorer_new(const char *lexicon_tsv,
                                            const char *src_lang,
                                            const char *tgt_lang,
                                            double lambda_src,
                                            double lambda_tgt,
                                            struct CovconScorer **out);

/**
 * # Safety
 * `handle` must be null or a live handle, not used afterwards.
 */
void covcon_scorer_free(struct CovconScorer *handle);

/**
 * Mean token log-probability of `scored` given `conditioning` in the
 * scorer's forward direction.
 *
 * # Safety
 * Pointers must be valid and strings nul-terminated.
 */
enum CovconStatus covcon_score(const struct CovconScorer *handle,
                               const char *conditioning,
                               const char *scored,
                               double *out_score);

/**
 * Omission detections for a parsed source sentence and its translation,
 * as a JSON array.
 *
 * # Safety
 * Pointers must be valid and strings nul-terminated.
 */
enum CovconStatus covcon_detect_omissions_json(const struct CovconScorer *scorer,
                                               const struct CovconSentences *sources,
                                               uintptr_t index,
                                               const char *translation,
                                               double margin,
                                               char **out_json);

/**
 * Addition detections for a source text and a parsed translation, as a
 * JSON array.
 *
 * # Safety
 * Pointers must be valid and strings nul-terminated.
 */
enum CovconStatus covcon_detect_additions_json(const struct CovconScorer *scorer,
                                               const char *source,
                                               const struct CovconSentences *translations,
                                               uintptr_t index,
                                               double margin,
                                               char **out_json);

/**
 * Mean of `len` log-probabilities.
 *
 * # Safety
 * `values` must point to `len` doubles.
 */
enum CovconStatus covcon_avg_logprob(const double *values, uintptr_t len, double *out);

/**
 * Cohen's kappa between two raters' integer-coded labels.
 *
 * # Safety
 * `a` and `b` must each point to `len` values.
 */
enum CovconStatus covcon_cohens_kappa(const int32_t *a,
                                      const int32_t *b,
                                      uintptr_t len,
                                      double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* COVCON_H */
