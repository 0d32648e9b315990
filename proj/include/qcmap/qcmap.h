#ifndef QCMAP_QCMAP_H
#define QCMAP_QCMAP_H

/* C interface to the qcmap registration library. Every call returns a status;
   on failure qcmap_last_error() describes the problem for the calling thread. */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define QCMAP_API __declspec(dllexport)
#else
#define QCMAP_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum qcmap_status {
    QCMAP_OK = 0,
    QCMAP_ERR_CONFIG = 2,
    QCMAP_ERR_NUMERIC = 3,
    QCMAP_ERR_IO = 4,
    QCMAP_ERR_CONTRACT = 5,
    QCMAP_ERR_DIMENSION = 6,
    QCMAP_ERR_CHECKPOINT = 7,
    QCMAP_ERR_INTERNAL = 9
} qcmap_status;

typedef struct qcmap_config qcmap_config;
typedef struct qcmap_model qcmap_model;

QCMAP_API const char* qcmap_version(void);
QCMAP_API const char* qcmap_last_error(void);
QCMAP_API const char* qcmap_status_name(qcmap_status status);

/* Run configuration */
QCMAP_API qcmap_status qcmap_config_default(qcmap_config** out);
QCMAP_API qcmap_status qcmap_config_from_json(const char* json_text, qcmap_config** out);
QCMAP_API qcmap_status qcmap_config_from_file(const char* path, qcmap_config** out);
/* key is a dotted field path such as "epochs" or "weights.landmark"; value is
   JSON text, or a bare string when it does not parse as JSON. */
QCMAP_API qcmap_status qcmap_config_set(qcmap_config* config, const char* key, const char* value);
/* Copies the full JSON document into buf (NUL terminated when capacity allows);
   *needed receives the length including the terminator. */
QCMAP_API qcmap_status qcmap_config_to_json(const qcmap_config* config, char* buf, size_t capacity,
                                            size_t* needed);
QCMAP_API void qcmap_config_free(qcmap_config* config);

/* Network parameters */
QCMAP_API qcmap_status qcmap_model_create(int width, int blocks, const char* activation, uint64_t seed,
                                          qcmap_model** out);
QCMAP_API qcmap_status qcmap_model_load(const char* path, qcmap_model** out);
QCMAP_API qcmap_status qcmap_model_save(const qcmap_model* model, const char* path);
QCMAP_API qcmap_status qcmap_model_param_count(const qcmap_model* model, size_t* out);
QCMAP_API qcmap_status qcmap_model_get_params(const qcmap_model* model, double* out, size_t count);
QCMAP_API qcmap_status qcmap_model_set_params(qcmap_model* model, const double* values, size_t count);
/* points: n x 3 row-major in [0,1]^3. out_points (n x 3) and out_det (n) may be NULL. */
QCMAP_API qcmap_status qcmap_model_map(const qcmap_model* model, const char* boundary, const double* points,
                                       size_t n, double* out_points, double* out_det);
QCMAP_API void qcmap_model_free(qcmap_model* model);

/* Workflows writing into out_dir */
typedef void (*qcmap_progress_fn)(const char* run, int epoch, double total, double landmark, double intensity,
                                  double omega_plus_fraction, void* user);

typedef struct qcmap_synth_options {
    int n;          /* 0 selects the generator default */
    uint64_t seed;
    int image_dims;
    int grid_n;
} qcmap_synth_options;

typedef struct qcmap_report_options {
    int hist_samples;        /* 0 skips the histogram */
    int bins;
    const char* slices;      /* comma separated, e.g. "x=0.2,x=0.8"; NULL or "" for none */
    int grid_n;
    const char* warp_source; /* NULL for none */
    int warp_dims;           /* 0 keeps the source dims */
    const char* history;     /* history CSV for the loss table; NULL for none */
    uint64_t seed;
    const char* boundary;    /* "hard" or "soft" */
} qcmap_report_options;

QCMAP_API void qcmap_synth_options_init(qcmap_synth_options* options);
QCMAP_API void qcmap_report_options_init(qcmap_report_options* options);

QCMAP_API qcmap_status qcmap_synth(const char* kind, const char* out_dir, const qcmap_synth_options* options);
/* out_model may be NULL; otherwise receives the trained parameters. */
QCMAP_API qcmap_status qcmap_train(const qcmap_config* config, const char* out_dir, qcmap_progress_fn progress,
                                   void* user, qcmap_model** out_model);
QCMAP_API qcmap_status qcmap_report(const char* checkpoint, const qcmap_report_options* options,
                                    const char* out_dir);
QCMAP_API qcmap_status qcmap_ablate(const qcmap_config* config, const char* out_dir, qcmap_progress_fn progress,
                                    void* user);

#ifdef __cplusplus
}
#endif

#endif
