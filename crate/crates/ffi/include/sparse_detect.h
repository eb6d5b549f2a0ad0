/* C interface for the sparse-detect library. */

#ifndef SPARSE_DETECT_H
#define SPARSE_DETECT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum SdStatus {
  // Success.
  SD_OK = 0,
  // A null pointer, malformed string, or invalid configuration value.
  SD_INVALID_ARGUMENT = 1,
  // An argument outside the mathematical domain of the operation.
  SD_DOMAIN_ERROR = 2,
  // The operation is not defined for this input shape or size.
  SD_UNSUPPORTED = 3,
  // A file failed to parse.
  SD_PARSE_ERROR = 4,
  // An I/O failure.
  SD_IO_ERROR = 5,
  // An internal failure (should not happen; indicates a bug).
  SD_INTERNAL = 6,
} SdStatus;

// Opaque design handle.
typedef struct SdDesign SdDesign;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Build a balanced design with `p` columns and `r` replicates per column.
//
// # Safety
// `out` must be a valid pointer.
enum SdStatus sd_design_anova(uintptr_t p, uint64_t r, struct SdDesign **out);

// Load a design from `path`. `format` is "dense-csv" or "sparse-triplet".
//
// # Safety
// `path` and `format` must be NUL-terminated strings; `out` must be valid.
enum SdStatus sd_design_load(const char *path, const char *format, struct SdDesign **out);

// Release a design handle. Null is accepted.
//
// # Safety
// `design` must be null or a pointer previously returned by this library
// and not yet freed.
void sd_design_free(struct SdDesign *design);

// Number of rows of the design.
//
// # Safety
// `design` must be a live handle.
uintptr_t sd_design_n(const struct SdDesign *design);

// Number of columns of the design.
//
// # Safety
// `design` must be a live handle.
uintptr_t sd_design_p(const struct SdDesign *design);

// Audit the design structure; writes a JSON report.
//
// # Safety
// `design` must be a live handle; `out_json` must be valid. The returned
// string must be released with `sd_string_free`.
enum SdStatus sd_design_audit_json(const struct SdDesign *design,
                                   uintptr_t p_for_ratios,
                                   double slack,
                                   char **out_json);

// Boundary exponent rho*(alpha) for a family ("linear", "binary",
// "binomial", "max-binary", "max-binomial") and link ("logistic",
// "probit", "uniform").
//
// # Safety
// `family` and `link` must be NUL-terminated strings; `out` must be valid.
enum SdStatus sd_rho_star(const char *family, const char *link, double alpha, double *out);

// Exact `P(|Bin(r,1/2) - r/2| / sqrt(r/4) > t)`.
//
// # Safety
// `out` must be valid.
enum SdStatus sd_binomial_survival(uint64_t r, double t, double *out);

// Exact two-sided binomial p-value of outcome `z` under `Bin(r, 1/2)`.
//
// # Safety
// `out` must be valid.
enum SdStatus sd_binomial_pvalue(uint64_t r, uint64_t z, double *out);

// Run a risk experiment described by a JSON spec; writes the result CSV
// (header `test,t,A,risk,stderr,n_trials,seed`) to `out_csv`.
// `workers` = 0 uses all cores.
//
// # Safety
// `spec_json` must be a NUL-terminated string; `out_csv` must be valid.
// The returned string must be released with `sd_string_free`.
enum SdStatus sd_run_experiment_csv(const char *spec_json, uintptr_t workers, char **out_csv);

// Release a string returned by this library. Null is accepted.
//
// # Safety
// `s` must be null or a string previously returned by this library and not
// yet freed.
void sd_string_free(char *s);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* SPARSE_DETECT_H */
