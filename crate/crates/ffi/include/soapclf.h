#ifndef SOAPCLF_H
#define SOAPCLF_H

#include <stdbool.h>
#include <stddef.h>

typedef enum SoapclfStatus {
  SOAPCLF_STATUS_OK = 0,
  SOAPCLF_STATUS_NULL_POINTER = 1,
  SOAPCLF_STATUS_INVALID_UTF8 = 2,
  SOAPCLF_STATUS_PARSE = 3,
  SOAPCLF_STATUS_INVARIANT = 4,
  SOAPCLF_STATUS_IO = 5,
  SOAPCLF_STATUS_INVALID_INPUT = 6,
  SOAPCLF_STATUS_INTERNAL = 7,
} SoapclfStatus;

/**
 * Opaque alignment result.
 */
typedef struct SoapclfAlignment SoapclfAlignment;

/**
 * Opaque trained model.
 */
typedef struct SoapclfModel SoapclfModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. Owned by the
 * library; valid until the next call on the same thread.
 */
const char *soapclf_last_error(void);

/**
 * # Safety
 * `s` is null or a string returned by this library and not yet freed.
 */
void soapclf_string_free(char *s);

/**
 * Align `reference` against `asr` (case-folded characters).
 *
 * # Safety
 * Inputs are NUL-terminated strings; `out` is a writable pointer slot.
 */
enum SoapclfStatus soapclf_align(const char *reference,
                                 const char *asr,
                                 struct SoapclfAlignment **out);

/**
 * Edit cost of the alignment; 0 for a null handle.
 *
 * # Safety
 * `al` is null or a live handle from [`soapclf_align`].
 */
size_t soapclf_alignment_cost(const struct SoapclfAlignment *al);

/**
 * # Safety
 * `al` is null or a live handle from [`soapclf_align`].
 */
enum SoapclfStatus soapclf_alignment_lengths(const struct SoapclfAlignment *al,
                                             size_t *ref_len,
                                             size_t *asr_len);

/**
 * Number of anchored span pairs.
 *
 * # Safety
 * `al` is null or a live handle from [`soapclf_align`].
 */
size_t soapclf_alignment_anchor_count(const struct SoapclfAlignment *al);

/**
 * Concatenated leaf ops (`M`, `S`, `I`, `D`) in text order, excluding
 * anchors. Borrowed from the handle.
 *
 * # Safety
 * `al` is null or a live handle from [`soapclf_align`].
 */
const char *soapclf_alignment_leaf_ops(const struct SoapclfAlignment *al);

/**
 * Full alignment record as JSON; free with [`soapclf_string_free`].
 *
 * # Safety
 * `al` is a live handle; `out` is a writable pointer slot.
 */
enum SoapclfStatus soapclf_alignment_json(const struct SoapclfAlignment *al, char **out);

/**
 * # Safety
 * `al` is null or a handle from [`soapclf_align`] not yet freed.
 */
void soapclf_alignment_free(struct SoapclfAlignment *al);

/**
 * Load a model file written by `soapclf train`.
 *
 * # Safety
 * `path` is a NUL-terminated string; `out` is a writable pointer slot.
 */
enum SoapclfStatus soapclf_model_load(const char *path, struct SoapclfModel **out);

/**
 * Score one transcript given as a corpus JSON line. Writes
 * `{"soap": [[..5]..], "speaker": [[..4]..]}` with one row per kept
 * utterance (utterances without words are dropped, as in training).
 *
 * # Safety
 * `model` is a live handle; `transcript` is NUL-terminated; `out` is writable.
 */
enum SoapclfStatus soapclf_model_predict(const struct SoapclfModel *model,
                                         const char *transcript,
                                         bool calibrated,
                                         char **out);

/**
 * # Safety
 * `model` is null or a handle from [`soapclf_model_load`] not yet freed.
 */
void soapclf_model_free(struct SoapclfModel *model);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SOAPCLF_H */
