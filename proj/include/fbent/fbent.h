/* C interface to the fbent toolkit. Objects are opaque handles; every call returns a
 * status code and leaves a message for fbent_last_error() on failure. Strings returned
 * through char** are owned by the caller and released with fbent_free_string(). */
#ifndef FBENT_FBENT_H
#define FBENT_FBENT_H

#include <stddef.h>
#include <stdint.h>

#if defined(FBENT_BUILDING_LIBRARY)
#define FBENT_API __attribute__((visibility("default")))
#else
#define FBENT_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum fbent_status {
    FBENT_OK = 0,
    FBENT_ERR_INTERNAL = 1,
    FBENT_ERR_CONFIG = 2,
    FBENT_ERR_DATA = 3,
    FBENT_ERR_NONCONVERGED = 4,
    FBENT_ERR_ARGUMENT = 5,
    FBENT_ERR_IO = 6
} fbent_status;

typedef struct fbent_config fbent_config;
typedef struct fbent_stream fbent_stream;

/* Message of the last failed call on this thread; empty after success. */
FBENT_API const char* fbent_last_error(void);
FBENT_API void fbent_free_string(char* s);
FBENT_API const char* fbent_version(void);

/* Warnings (e.g. Taylor validity) go to stderr unless a callback is installed; NULL restores it. */
typedef void (*fbent_warning_fn)(const char* message, void* user);
FBENT_API void fbent_set_warning_callback(fbent_warning_fn fn, void* user);

/* ---- configuration (key = value text, keys as in `fbent_config_to_text`) ---- */
FBENT_API fbent_status fbent_config_create(fbent_config** out);
FBENT_API fbent_status fbent_config_load(const char* path, fbent_config** out);
FBENT_API fbent_status fbent_config_parse(const char* text, fbent_config** out);
FBENT_API fbent_status fbent_config_set(fbent_config* cfg, const char* key, const char* value);
FBENT_API fbent_status fbent_config_get(const fbent_config* cfg, const char* key, char** value);
FBENT_API fbent_status fbent_config_to_text(const fbent_config* cfg, char** text);
FBENT_API fbent_status fbent_config_validate(const fbent_config* cfg);
FBENT_API void fbent_config_destroy(fbent_config* cfg);

/* ---- time-tag streams ---- */
typedef enum fbent_basis { FBENT_EQUATORIAL = 0, FBENT_Z = 1 } fbent_basis;

FBENT_API fbent_status fbent_simulate(const fbent_config* cfg, uint64_t n_pairs, fbent_stream** out);
/* One measurement setting of the source state; `substream` keeps settings independent. */
FBENT_API fbent_status fbent_simulate_setting(const fbent_config* cfg, fbent_basis signal, fbent_basis idler,
                                              uint64_t trials, uint64_t substream, fbent_stream** out);
/* Binary or CSV, detected from the content. */
FBENT_API fbent_status fbent_stream_read(const char* path, fbent_stream** out);
FBENT_API fbent_status fbent_stream_write(const fbent_stream* s, const char* path, int csv);
FBENT_API size_t fbent_stream_size(const fbent_stream* s);
FBENT_API fbent_status fbent_stream_record(const fbent_stream* s, size_t index, uint8_t* channel,
                                           uint64_t* timestamp_ps);
FBENT_API void fbent_stream_destroy(fbent_stream* s);

/* ---- analyses; results are JSON documents ---- */
typedef struct fbent_jti_options {
    double bin_width;   /* s, 0 = 10 ps */
    double window;      /* coincidence half-width, s, 0 = 5 ns */
    double band;        /* |ts-ti| band for the diagonal profile, s, 0 = 800 ps */
    int fold_beats;     /* 0 = 5 */
} fbent_jti_options;

/* Writes the frame histogram (binary) and profile CSVs when the paths are non-NULL. */
FBENT_API fbent_status fbent_jti(const fbent_config* cfg, const fbent_stream* tags, const fbent_jti_options* opt,
                                 const char* histogram_path, const char* profiles_prefix, char** json);

typedef struct fbent_certify_options {
    double band;            /* s, 0 = 800 ps */
    double slot_width;      /* s, 0 = T_b/20 */
    double window;          /* coincidence half-width, s, 0 = 5 ns */
    int subtract_background;
    int efficiency_correction; /* undo exp(-gamma|ts-ti|) per outcome cell */
    int slot_bias_correction;
    uint32_t bootstrap;     /* resamples, 0 = 1000 */
    uint64_t seed;
    /* [signal port][idler port] counts used when no Z-basis stream is given */
    double zz_counts[4];
} fbent_certify_options;

FBENT_API void fbent_certify_defaults(fbent_certify_options* opt);
/* `zz` may be NULL; ZZ efficiencies come from the config's eta_T. */
FBENT_API fbent_status fbent_certify(const fbent_config* cfg, const fbent_stream* equatorial, const fbent_stream* zz,
                                     const fbent_certify_options* opt, char** json);

typedef struct fbent_tomo_options {
    double band;      /* s, 0 = 800 ps */
    double window;    /* coincidence half-width, s, 0 = 5 ns */
    int slots;        /* per arm, 0 = 8 */
    int bootstrap;    /* parametric resamples for uncertainties, 0 = none */
    uint64_t seed;
    int max_iterations; /* 0 = 10000 */
} fbent_tomo_options;

/* Count table JSON from four streams in the order EE, EZ, ZE, ZZ (NULL entries skipped). */
FBENT_API fbent_status fbent_tomo_count_table(const fbent_config* cfg, const fbent_stream* const streams[4],
                                              const fbent_tomo_options* opt, char** json);
/* Maximum-likelihood state from a count table. Returns FBENT_ERR_NONCONVERGED, with the
 * best iterate still written to *json, when the optimizer hit its iteration limit. */
FBENT_API fbent_status fbent_tomo_reconstruct(const fbent_config* cfg, const char* count_table_json,
                                              const fbent_tomo_options* opt, char** json);

FBENT_API fbent_status fbent_qkd(double xx, double yx, double zz, double q, double f, double r, char** json);

/* FWI design from the config (`solve` = 0) or solved for field widening (`solve` = 1) from
 * n_glass / delta_L / the config's long-arm air. The sweep CSV lists alpha, opd, visibility. */
typedef struct fbent_fwi_options {
    int solve;
    double n_glass;        /* 0 = 1.5007 */
    double delta_L;        /* m, 0 = pi c / delta_omega from the config */
    double long_air;       /* m, single pass, < 0 = 0.02 */
    double alpha_max;      /* sweep end, rad, 0 = 0.05 */
    int sweep_points;      /* 0 = 11 */
    double alpha_spread;   /* Gaussian angle spread for the visibility, rad */
} fbent_fwi_options;

FBENT_API fbent_status fbent_fwi(const fbent_config* cfg, const fbent_fwi_options* opt, const char* sweep_csv_path,
                                 char** json);

#ifdef __cplusplus
}
#endif

#endif
