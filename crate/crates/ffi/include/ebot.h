#ifndef EBOT_H
#define EBOT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Outcome of an FFI call.
 */
typedef enum EbotStatus {
  EbotOk = 0,
  EbotNullArgument = 1,
  EbotInvalidUtf8 = 2,
  EbotIoError = 3,
  EbotParseError = 4,
  EbotInvalidInput = 5,
  EbotEngineMismatch = 6,
  EbotNoGroundTruth = 7,
  EbotInternalError = 8,
  EbotPanic = 9,
} EbotStatus;

/**
 * Opaque pipeline handle: owns a configuration and the last error text.
 */
typedef struct EbotContext EbotContext;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Version of the engine as a static NUL-terminated string.
 */
const char *ebot_version(void);

/**
 * Creates a context with the default configuration. Free with
 * `ebot_context_free`.
 */
struct EbotContext *ebot_context_new(void);

/**
 * Replaces the context configuration with the given JSON document.
 *
 * # Safety
 * `ctx` must come from `ebot_context_new` and not yet be freed;
 * `config_json` must be null or a valid NUL-terminated string.
 */
enum EbotStatus ebot_context_configure(struct EbotContext *ctx, const char *config_json);

/**
 * Serializes the context configuration; the caller frees the string with
 * `ebot_string_free`. Returns null only on internal failure.
 *
 * # Safety
 * `ctx` must come from `ebot_context_new` and not yet be freed.
 */
char *ebot_context_config_json(const struct EbotContext *ctx);

/**
 * Last error message of the context, empty when no call has failed. The
 * pointer stays valid until the next failing call on the same context.
 *
 * # Safety
 * `ctx` must come from `ebot_context_new` and not yet be freed.
 */
const char *ebot_context_last_error(const struct EbotContext *ctx);

/**
 * Runs the full pipeline for every sequence in the manifest, writing
 * artifacts under `out_dir`.
 *
 * # Safety
 * `ctx` must come from `ebot_context_new` and not yet be freed; the path
 * arguments must be NUL-terminated strings.
 */
enum EbotStatus ebot_context_run(struct EbotContext *ctx,
                                 const char *manifest_path,
                                 const char *out_dir);

/**
 * Generates a synthetic sequence (generator config as JSON, null for the
 * defaults) and writes detections, ground truth, and a manifest under
 * `out_dir`.
 *
 * # Safety
 * Same contract as `ebot_context_run`; `gen_config_json` may be null.
 */
enum EbotStatus ebot_context_synthesize(struct EbotContext *ctx,
                                        const char *gen_config_json,
                                        const char *out_dir);

/**
 * Frees the context.
 *
 * # Safety
 * `ctx` must come from `ebot_context_new` and not be used afterwards.
 */
void ebot_context_free(struct EbotContext *ctx);

/**
 * Frees a string returned by this library.
 *
 * # Safety
 * `s` must come from an allocation-returning function of this library and
 * not be freed twice.
 */
void ebot_string_free(char *s);

/**
 * Intersection over union of two boxes given as x, y, width, height.
 * Returns -1.0 when either box has a non-positive or non-finite extent.
 */
double ebot_iou(double ax,
                double ay,
                double aw,
                double ah,
                double bx,
                double by,
                double bw,
                double bh);

/**
 * Occlusion-penalized track confidence over `len` refined per-frame
 * values with `occluded` occluded frames. Returns -1.0 on null input or
 * when `occluded` exceeds `len`.
 *
 * # Safety
 * `refined` must point to `len` readable doubles.
 */
double ebot_prototype_confidence(const double *refined,
                                 uintptr_t len,
                                 uintptr_t occluded,
                                 double beta);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EBOT_H */
