#ifndef CGVAMP_H
#define CGVAMP_H

/* cgvamp: compressed-sensing solvers built around conjugate-gradient VAMP.
 *
 * C interface to the shared library. All objects are opaque handles created
 * and destroyed through these functions; every call returns a status code and
 * the last error message is kept per thread (cgvamp_last_error).
 *
 * Configs are JSON text. See README.md for the schema and the CLI that wraps
 * this interface.
 */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  define CGVAMP_API __declspec(dllexport)
#else
#  define CGVAMP_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum cgvamp_status {
  CGVAMP_OK = 0,
  CGVAMP_ERR_INVALID_ARG = 1,   /* null pointer, bad enum value, bad range */
  CGVAMP_ERR_SHAPE = 2,         /* dimension mismatch */
  CGVAMP_ERR_PARSE = 3,         /* config text not parseable / missing keys */
  CGVAMP_ERR_NUMERIC = 4,       /* non-finite input, solver breakdown */
  CGVAMP_ERR_DEGENERATE = 5,    /* degenerate scalar (Onsager gamma_B -> 1, gamma == 0) */
  CGVAMP_ERR_IO = 6,            /* file read/write failure */
  CGVAMP_ERR_INTERNAL = 7
} cgvamp_status;

typedef struct cgvamp_operator cgvamp_operator;
typedef struct cgvamp_instance cgvamp_instance;
typedef struct cgvamp_config cgvamp_config;
typedef struct cgvamp_result cgvamp_result;

CGVAMP_API const char* cgvamp_version(void);
CGVAMP_API const char* cgvamp_status_string(cgvamp_status s);
/* Message for the most recent failing call on this thread; empty string if none. */
CGVAMP_API const char* cgvamp_last_error(void);

/* ---- measurement operators ----------------------------------------------
 * spec_json: {"kind":"dense"|"fijl","n":...,"m":...,"kappa":...,"seed":...}
 */
CGVAMP_API cgvamp_status cgvamp_operator_create(const char* spec_json,
                                                cgvamp_operator** out);
CGVAMP_API void cgvamp_operator_destroy(cgvamp_operator* op);
CGVAMP_API cgvamp_status cgvamp_operator_rows(const cgvamp_operator* op, int64_t* m);
CGVAMP_API cgvamp_status cgvamp_operator_cols(const cgvamp_operator* op, int64_t* n);
/* y[m] = A x[n] */
CGVAMP_API cgvamp_status cgvamp_operator_apply(const cgvamp_operator* op,
                                               const double* x, size_t n,
                                               double* y, size_t m);
/* x[n] = A^T u[m] */
CGVAMP_API cgvamp_status cgvamp_operator_apply_adjoint(const cgvamp_operator* op,
                                                       const double* u, size_t m,
                                                       double* x, size_t n);
/* Canonical JSON spec of the operator (round-trips through _create). Caller
 * frees with cgvamp_string_free. */
CGVAMP_API cgvamp_status cgvamp_operator_spec_json(const cgvamp_operator* op, char** out);

/* ---- synthetic problem instances ----------------------------------------
 * instance_json: {"signal":{"kind":"bernoulli_gaussian","sparsity":...,"seed":...},
 *                 "noise":{"snr_db":...,"seed":...}}
 * The instance keeps a reference to the operator; destroying the operator
 * handle first is safe.
 */
CGVAMP_API cgvamp_status cgvamp_instance_create(const cgvamp_operator* op,
                                                const char* instance_json,
                                                cgvamp_instance** out);
CGVAMP_API void cgvamp_instance_destroy(cgvamp_instance* inst);
CGVAMP_API cgvamp_status cgvamp_instance_dims(const cgvamp_instance* inst,
                                              int64_t* n, int64_t* m);
CGVAMP_API cgvamp_status cgvamp_instance_noise_var(const cgvamp_instance* inst, double* v_w);
CGVAMP_API cgvamp_status cgvamp_instance_get_signal(const cgvamp_instance* inst,
                                                    double* x, size_t n);
CGVAMP_API cgvamp_status cgvamp_instance_get_measurement(const cgvamp_instance* inst,
                                                         double* y, size_t m);

/* ---- run configuration --------------------------------------------------- */
CGVAMP_API cgvamp_status cgvamp_config_create(const char* json_text, cgvamp_config** out);
CGVAMP_API cgvamp_status cgvamp_config_from_file(const char* path, cgvamp_config** out);
CGVAMP_API void cgvamp_config_destroy(cgvamp_config* cfg);
/* Fully resolved config (defaults filled in), canonical key order. Caller
 * frees with cgvamp_string_free. */
CGVAMP_API cgvamp_status cgvamp_config_resolved_json(const cgvamp_config* cfg, char** out);
/* FNV-1a hash over every numerics-affecting parameter, as fixed-width hex. */
CGVAMP_API cgvamp_status cgvamp_config_hash(const cgvamp_config* cfg, char** out);

/* ---- solver runs ---------------------------------------------------------
 * instance may be NULL: one is built from the config's operator/signal/noise
 * sections. A degenerate-scalar failure mid-run still produces a result with
 * the partial trace; its status() reports the error.
 */
CGVAMP_API cgvamp_status cgvamp_run(const cgvamp_config* cfg,
                                    const cgvamp_instance* inst,
                                    cgvamp_result** out);
CGVAMP_API void cgvamp_result_destroy(cgvamp_result* res);
CGVAMP_API cgvamp_status cgvamp_result_status(const cgvamp_result* res);
CGVAMP_API const char* cgvamp_result_error_message(const cgvamp_result* res);
CGVAMP_API cgvamp_status cgvamp_result_outer_rows(const cgvamp_result* res, int64_t* rows);
CGVAMP_API cgvamp_status cgvamp_result_inner_rows(const cgvamp_result* res, int64_t* rows);
/* Column names are stable across versions of the same trace schema; unknown
 * name -> CGVAMP_ERR_INVALID_ARG. */
CGVAMP_API cgvamp_status cgvamp_result_outer_value(const cgvamp_result* res,
                                                   int64_t row, const char* column,
                                                   double* out);
CGVAMP_API cgvamp_status cgvamp_result_inner_value(const cgvamp_result* res,
                                                   int64_t row, const char* column,
                                                   double* out);
/* Writes the outer trace CSV, and the per-CG-iteration trace CSV when
 * inner_path is non-NULL. */
CGVAMP_API cgvamp_status cgvamp_result_write_csv(const cgvamp_result* res,
                                                 const char* outer_path,
                                                 const char* inner_path);

/* ---- sweeps / plots / audits --------------------------------------------
 * sweep_json: {"base":{...run config...},"grid":{...},"seeds":[...]}
 * Writes per-cell trace CSVs, a merged summary CSV and manifest.json under
 * out_dir; returns the manifest JSON text (caller frees).
 */
CGVAMP_API cgvamp_status cgvamp_sweep_run(const char* sweep_json,
                                          const char* out_dir,
                                          char** manifest_json_out);
/* kind: "nmse_vs_t" | "inner_iters_vs_t" | "time_vs_t" */
CGVAMP_API cgvamp_status cgvamp_plot_csv(const char* summary_csv_path,
                                         const char* kind,
                                         const char* out_svg_path);
/* Runs the run described by config_json with oracle diagnostics forced on and
 * checks every estimator against its oracle counterpart. Returns a JSON
 * report (caller frees); *passed is 1 when every audit is inside tolerance. */
CGVAMP_API cgvamp_status cgvamp_audit(const char* config_json,
                                      char** report_json_out,
                                      int* passed);

CGVAMP_API void cgvamp_string_free(char* s);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* CGVAMP_H */
