/* C interface to the curve-based X-ray harmonization library.
 *
 * All objects are opaque handles. Functions return a gdce_status; on failure
 * the message is available from gdce_last_error() on the same context until
 * the next call on that context. Strings returned through char** are owned
 * by the caller and released with gdce_string_free(). A context must not be
 * used from two threads at once.
 */
#ifndef GDCE_GDCE_H
#define GDCE_GDCE_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define GDCE_API __declspec(dllexport)
#else
#define GDCE_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum gdce_status {
  GDCE_OK = 0,
  GDCE_ERR_USAGE = 1,     /* bad arguments or configuration */
  GDCE_ERR_DATA = 2,      /* unreadable or inconsistent input */
  GDCE_ERR_NUMERICAL = 3, /* divergence, non-finite values, failed checks */
  GDCE_ERR_INTERNAL = 4
} gdce_status;

enum {
  GDCE_RUN_FORCE = 1u << 0, /* write into a non-empty output directory */
  GDCE_RUN_RESUME = 1u << 1 /* continue an interrupted training run */
};

typedef struct gdce_context gdce_context;
typedef struct gdce_image gdce_image;
typedef struct gdce_model gdce_model;

typedef void (*gdce_progress_fn)(const char* message, void* user);

GDCE_API const char* gdce_version(void);

GDCE_API gdce_status gdce_context_create(gdce_context** out);
GDCE_API void gdce_context_destroy(gdce_context* ctx);
GDCE_API const char* gdce_last_error(const gdce_context* ctx);
GDCE_API void gdce_set_progress(gdce_context* ctx, gdce_progress_fn fn, void* user);

GDCE_API void gdce_string_free(char* s);

/* Newline-separated list of subcommand names. */
GDCE_API gdce_status gdce_commands(gdce_context* ctx, char** out);

/* Effective configuration as JSON: defaults, then $GDCE_SEED, then the JSON
 * file at config_path (may be NULL), then "key.sub=value" overrides, then
 * the explicit seed when has_seed is non-zero. Unknown keys are rejected. */
GDCE_API gdce_status gdce_config_resolve(gdce_context* ctx, const char* command, const char* config_path,
                                         const char* const* overrides, size_t n_overrides, int has_seed,
                                         uint64_t seed, char** out_json);

/* Runs a subcommand with a resolved configuration; writes only below
 * out_dir. out_summary (may be NULL) receives a JSON summary. */
GDCE_API gdce_status gdce_run(gdce_context* ctx, const char* command, const char* config_json, const char* out_dir,
                              unsigned flags, char** out_summary);

/* Images: unit-interval grayscale. normalization is "full-range", "bitdepth"
 * or "window". */
GDCE_API gdce_status gdce_image_load(gdce_context* ctx, const char* path, const char* normalization,
                                     gdce_image** out);
GDCE_API gdce_status gdce_image_create(gdce_context* ctx, int width, int height, const double* values,
                                       gdce_image** out);
GDCE_API void gdce_image_destroy(gdce_image* img);
GDCE_API int gdce_image_width(const gdce_image* img);
GDCE_API int gdce_image_height(const gdce_image* img);
GDCE_API const double* gdce_image_data(const gdce_image* img);
GDCE_API gdce_status gdce_image_save(gdce_context* ctx, const gdce_image* img, const char* path, int bit_depth);

/* Applies the iterated quadratic curve with the given coefficients. */
GDCE_API gdce_status gdce_curve_apply(gdce_context* ctx, const gdce_image* in, const double* alphas, size_t n,
                                      gdce_image** out);

/* Enhancer checkpoints. */
GDCE_API gdce_status gdce_model_load(gdce_context* ctx, const char* path, gdce_model** out);
GDCE_API void gdce_model_destroy(gdce_model* model);
GDCE_API int gdce_model_iterations(const gdce_model* model);
/* alphas receives gdce_model_iterations() values when non-NULL. */
GDCE_API gdce_status gdce_model_enhance(gdce_context* ctx, gdce_model* model, const gdce_image* in,
                                        gdce_image** out, double* alphas);

#ifdef __cplusplus
}
#endif

#endif
