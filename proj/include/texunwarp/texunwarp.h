/* C interface of the texunwarp library. */
#ifndef TEXUNWARP_H
#define TEXUNWARP_H

#ifdef __cplusplus
extern "C" {
#endif

#if defined(TU_BUILDING_LIBRARY)
#define TU_API __attribute__((visibility("default")))
#else
#define TU_API
#endif

typedef enum tu_status {
  TU_OK = 0,
  TU_ERR_PARAMETER = 1,
  TU_ERR_SIZE = 2,
  TU_ERR_SHAPE = 3,
  TU_ERR_IO = 4,
  TU_ERR_MANIFEST = 5,
  TU_ERR_NUMERIC = 6,
  TU_ERR_FREEZE = 7,
  TU_ERR_CACHE = 8,
  TU_ERR_STATE = 9,
  TU_ERR_INTERNAL = 10
} tu_status;

typedef struct tu_model tu_model;
typedef struct tu_image tu_image;

typedef void (*tu_progress_fn)(const char* message, void* user);

TU_API const char* tu_version(void);
TU_API const char* tu_status_string(tu_status status);
/* Message of the last failed call on this thread; empty when none. */
TU_API const char* tu_last_error(void);

/* Strings returned through char** are owned by the caller. */
TU_API void tu_free_string(char* s);

/* Merges `file_json` then `flags_json` (either may be NULL) over the defaults
 * as JSON merge patches and validates the result. */
TU_API tu_status tu_resolve_config(const char* file_json, const char* flags_json, char** resolved_json);

/* Commands. `config_json` is a resolved configuration; every command writes it
 * to <out_dir>/config.json next to its artifacts. */
TU_API tu_status tu_generate(const char* config_json, const char* out_dir, int* num_samples);
/* side: "input" or "gt". */
TU_API tu_status tu_pretrain(const char* config_json, const char* dataset_dir, const char* side, const char* out_dir);
TU_API tu_status tu_train_corrector(const char* config_json, const char* dataset_dir, const char* ckpt_input,
                                    const char* ckpt_gt, const char* out_dir);
TU_API tu_status tu_evaluate(const char* config_json, const char* ckpt, const char* dataset_dir, const char* out_dir,
                             char** report_json);
TU_API tu_status tu_ablate(const char* config_json, const char* dataset_dir, const char* out_dir,
                           tu_progress_fn progress, void* user);

TU_API tu_status tu_model_load(const char* path, tu_model** model);
TU_API void tu_model_free(tu_model* model);
/* Inference from posterior means; `normal` is the (n + 1) / 2 encoded normal map. */
TU_API tu_status tu_model_infer(tu_model* model, const tu_image* input, const tu_image* normal, tu_image** crop);

TU_API tu_status tu_image_load_png(const char* path, tu_image** image);
TU_API tu_status tu_image_save_png(const tu_image* image, const char* path);
TU_API tu_status tu_image_size(const tu_image* image, int* width, int* height);
TU_API void tu_image_free(tu_image* image);

/* Texture map of side `map_size` from a crop. `layout` is a layout JSON path
 * or a built-in garment name ("tshirt", "pants"). */
TU_API tu_status tu_assemble(const tu_image* crop, const char* layout, int map_size, tu_image** texture_map);

#ifdef __cplusplus
}
#endif

#endif /* TEXUNWARP_H */
