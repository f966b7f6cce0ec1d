#ifndef TPD_TPD_H
#define TPD_TPD_H

#include <stddef.h>
#include <stdint.h>

#if defined(TPD_BUILDING_LIBRARY)
#define TPD_API __attribute__((visibility("default")))
#else
#define TPD_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes double as the CLI's process exit codes. */
typedef enum tpd_status {
  TPD_OK = 0,
  TPD_ERR_FAILURE = 1,
  TPD_ERR_CONFIG = 2, /* bad configuration or invalid argument */
  TPD_ERR_NUMERICAL = 3,
  TPD_ERR_VERIFY = 4,
  TPD_ERR_IO = 5
} tpd_status;

typedef enum tpd_schedule_kind {
  TPD_SCHEDULE_DDIM = 0,
  TPD_SCHEDULE_FLOW_MATCHING = 1
} tpd_schedule_kind;

typedef struct tpd_config tpd_config;
typedef struct tpd_schedule tpd_schedule;
typedef struct tpd_plan tpd_plan;

/* Receives one log line (no trailing newline). */
typedef void (*tpd_log_fn)(const char* line, void* user);

TPD_API const char* tpd_version(void);

/* Message of the last failed call on this thread; empty after success. */
TPD_API const char* tpd_last_error(void);

TPD_API tpd_status tpd_config_default(tpd_config** out);
TPD_API tpd_status tpd_config_load(const char* path, tpd_config** out);
TPD_API tpd_status tpd_config_parse(const char* text, tpd_config** out);
/* `key` is `section.key`, e.g. "plan.stages". */
TPD_API tpd_status tpd_config_set(tpd_config* config, const char* key, const char* value);
TPD_API void tpd_config_free(tpd_config* config);

/* Runs train | sample | eval | verify | compare. `seed` may be NULL to keep
 * the configured seed; `log` may be NULL to discard progress lines. */
TPD_API tpd_status tpd_run(const char* command, const tpd_config* config, const char* out_dir,
                           const uint64_t* seed, tpd_log_fn log, void* user);

TPD_API tpd_status tpd_schedule_create(tpd_schedule_kind kind, int ddim_steps, tpd_schedule** out);
TPD_API void tpd_schedule_free(tpd_schedule* schedule);
TPD_API tpd_status tpd_schedule_gamma_sigma(const tpd_schedule* schedule, double t, double* gamma,
                                            double* sigma);
TPD_API tpd_status tpd_schedule_log_snr(const tpd_schedule* schedule, double t, double* lambda);

TPD_API tpd_status tpd_plan_create(const tpd_schedule* schedule, int stages, double renoise_corr,
                                   tpd_plan** out);
TPD_API void tpd_plan_free(tpd_plan* plan);
TPD_API int tpd_plan_stage_count(const tpd_plan* plan);
TPD_API tpd_status tpd_plan_stage(const tpd_plan* plan, int k, double* start, double* end,
                                  size_t* down_factor);

/* Jump from the end of stage k to the start of stage k - 1 (k >= 2). */
TPD_API tpd_status tpd_renoise_params(const tpd_schedule* schedule, const tpd_plan* plan, int k,
                                      double* leave_gamma, double* scale, double* noise_weight);

TPD_API tpd_status tpd_attention_cost(int stages, size_t full_frames, int steps_per_stage,
                                      double* ratio);

/* `cost` is n x n row-major; perm[row] receives the assigned column. */
TPD_API tpd_status tpd_linear_sum_assignment(const double* cost, size_t n, size_t* perm,
                                             double* total_cost);

/* Two sets of flattened samples, each row `dim` values long. */
TPD_API tpd_status tpd_energy_distance(const double* a, size_t count_a, const double* b,
                                       size_t count_b, size_t dim, double* out);

#ifdef __cplusplus
}
#endif

#endif /* TPD_TPD_H */
