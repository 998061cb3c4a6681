#ifndef HYPDYN_H
#define HYPDYN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

// Result code of every call.
typedef enum HdStatus {
  HD_STATUS_OK = 0,
  // A required pointer argument was null.
  HD_STATUS_NULL_POINTER = 1,
  // The input failed validation: domain, configuration or precondition.
  HD_STATUS_INVALID_INPUT = 2,
  // A numeric procedure did not converge or fell below resolution.
  HD_STATUS_NUMERIC = 3,
  // File system or serialization failure.
  HD_STATUS_IO = 4,
  // A Rust panic was caught at the boundary.
  HD_STATUS_PANIC = 5,
  // A string argument was not valid UTF-8.
  HD_STATUS_UTF8 = 6,
} HdStatus;

// Opaque C¹ horseshoe interval map `g: I → J` at a finite depth.
typedef struct HdHorseshoe HdHorseshoe;

// Opaque modulus of continuity.
typedef struct HdModulus HdModulus;

// Opaque leading eigen-data of a transfer operator.
typedef struct HdRpf HdRpf;

// Opaque subshift of finite type with a finite-range potential.
typedef struct HdShift HdShift;

// Opaque dynamical system.
typedef struct HdSystem HdSystem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer stays
// valid until the next call into the library on the same thread.
const char *hd_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *hd_version(void);

// Releases a string returned by the library. Null is ignored.
//
// # Safety
// `s` must be null or a string returned by this library, not yet freed.
void hd_string_free(char *s);

// `ω(t) = t^α`, `0 < α ≤ 1`.
//
// # Safety
// `out` must be a valid pointer to writable storage.
enum HdStatus hd_modulus_power(double alpha, struct HdModulus **out);

// `ω(t) = 1/(log 1/t)^β` near 0, extended affinely.
//
// # Safety
// `out` must be a valid pointer to writable storage.
enum HdStatus hd_modulus_log_power(double beta, struct HdModulus **out);

// A modulus from its JSON form, e.g. `{"kind":"power","params":{"alpha":0.5},"t_max":1}`.
//
// # Safety
// `json` must be a NUL-terminated string and `out` valid writable storage.
enum HdStatus hd_modulus_from_json(const char *json, struct HdModulus **out);

// # Safety
// `m` must be a live modulus handle and `out` valid writable storage.
enum HdStatus hd_modulus_eval(const struct HdModulus *m, double t, double *out);

// Dini test: `summable` receives 1 or 0, and `integral` receives
// `∫₀¹ ω(t)/t dt` when it is finite and NaN otherwise.
//
// # Safety
// `m` must be a live modulus handle; the out-pointers must be valid.
enum HdStatus hd_modulus_dini_test(const struct HdModulus *m,
                                   double tol,
                                   int32_t *summable,
                                   double *integral);

// `ω̃(t) = ∫₀ᵗ ω(s)/s ds`; fails with `InvalidInput` for non-Dini moduli.
//
// # Safety
// `m` must be a live modulus handle and `out` valid writable storage.
enum HdStatus hd_modulus_tilde_integral(const struct HdModulus *m, double t, double *out);

// `Σ_{k≥0} ω(cᵏ t)` to tolerance `tol`.
//
// # Safety
// `m` must be a live modulus handle and `out` valid writable storage.
enum HdStatus hd_modulus_tilde_series(const struct HdModulus *m,
                                      double c,
                                      double t,
                                      double tol,
                                      double *out);

// # Safety
// `m` must be null or a handle not yet freed.
void hd_modulus_free(struct HdModulus *m);

// A built-in system by name with default parameters (e.g. `"cat-map"`).
//
// # Safety
// `name` must be a NUL-terminated string and `out` valid writable storage.
enum HdStatus hd_system_named(const char *name, struct HdSystem **out);

// A system from its JSON descriptor, e.g.
// `{"name":"perturbed-automorphism","params":{"eps":0.01}}`.
//
// # Safety
// `json` must be a NUL-terminated string and `out` valid writable storage.
enum HdStatus hd_system_from_json(const char *json, struct HdSystem **out);

// `out = f(x)` for points given as two doubles.
//
// # Safety
// `s` must be a live handle; `x` and `out` must point to two doubles each.
enum HdStatus hd_system_apply(const struct HdSystem *s, const double *x, double *out);

// `df_x` as four doubles in row-major order.
//
// # Safety
// `s` must be a live handle; `x` must point to two doubles, `out` to four.
enum HdStatus hd_system_differential(const struct HdSystem *s, const double *x, double *out);

// # Safety
// `s` must be null or a handle not yet freed.
void hd_system_free(struct HdSystem *s);

// Invariant splitting at `x`: unit vectors spanning `E^u` and `E^s`
// (two doubles each) and the final residuals of both iterations.
//
// # Safety
// `s` must be a live handle, `x` must point to two doubles, `unstable` and
// `stable` to two writable doubles each, `residuals` to two writable doubles.
enum HdStatus hd_splitting(const struct HdSystem *s,
                           const double *x,
                           size_t n_iter,
                           double tol,
                           double *unstable,
                           double *stable,
                           double *residuals);

// A shift model from JSON:
// `{"alphabet_size":2,"adjacency":[[1,1],[1,0]],"depth":2,"values":{"00":0.0,…}}`.
//
// # Safety
// `json` must be a NUL-terminated string and `out` valid writable storage.
enum HdStatus hd_shift_from_json(const char *json, struct HdShift **out);

// The full shift on `k` symbols with the zero potential of range `depth`.
//
// # Safety
// `out` must be valid writable storage.
enum HdStatus hd_shift_full(size_t k, size_t depth, struct HdShift **out);

// The full 2-shift with the Bernoulli(p) potential `φ(x) = log p_{x₀}`.
//
// # Safety
// `out` must be valid writable storage.
enum HdStatus hd_shift_bernoulli(size_t depth, double p, struct HdShift **out);

// # Safety
// `s` must be null or a handle not yet freed.
void hd_shift_free(struct HdShift *s);

// Power iteration for the leading eigenvalue, eigenfunction and eigenmeasure.
//
// # Safety
// `s` must be a live handle and `out` valid writable storage.
enum HdStatus hd_rpf_solve(const struct HdShift *s, double tol, struct HdRpf **out);

// # Safety
// `r` must be a live handle and `out` valid writable storage.
enum HdStatus hd_rpf_eigenvalue(const struct HdRpf *r, double *out);

// `P(φ) = log λ`.
//
// # Safety
// `r` must be a live handle and `out` valid writable storage.
enum HdStatus hd_rpf_pressure(const struct HdRpf *r, double *out);

// Number of states (admissible words of length `depth − 1`).
//
// # Safety
// `r` must be a live handle and `out` valid writable storage.
enum HdStatus hd_rpf_state_count(const struct HdRpf *r, size_t *out);

// Copies the Gibbs weights of the states into `buf`, which must hold
// `hd_rpf_state_count` doubles; `len` is that capacity.
//
// # Safety
// `r` must be a live handle and `buf` must point to `len` writable doubles.
enum HdStatus hd_rpf_gibbs(const struct HdRpf *r, double *buf, size_t len);

// The full eigen-data as JSON; free the result with `hd_string_free`.
//
// # Safety
// `r` must be a live handle and `out` valid writable storage.
enum HdStatus hd_rpf_to_json(const struct HdRpf *r, char **out);

// # Safety
// `r` must be null or a handle not yet freed.
void hd_rpf_free(struct HdRpf *r);

// Builds `g` with gap schedule offset `offset` (default 10) and tree depth
// at most 30.
//
// # Safety
// `out` must be valid writable storage.
enum HdStatus hd_horseshoe_new(double offset, size_t depth, struct HdHorseshoe **out);

// # Safety
// `h` must be a live handle and `out` valid writable storage.
enum HdStatus hd_horseshoe_eval(const struct HdHorseshoe *h, double x, double *out);

// # Safety
// `h` must be a live handle and `out` valid writable storage.
enum HdStatus hd_horseshoe_derivative(const struct HdHorseshoe *h, double x, double *out);

// Lebesgue measure of the invariant Cantor set and its error bound.
//
// # Safety
// `h` must be a live handle; `value` and `error_bound` valid writable storage.
enum HdStatus hd_horseshoe_measure(const struct HdHorseshoe *h, double *value, double *error_bound);

// # Safety
// `h` must be null or a handle not yet freed.
void hd_horseshoe_free(struct HdHorseshoe *h);

// Runs an experiment config given as JSON and returns the report
// `{manifest, summary, tables, output_dir, wall_time}` as JSON. Free the
// result with `hd_string_free`.
//
// # Safety
// `config` must be a NUL-terminated string and `out` valid writable storage.
enum HdStatus hd_run_experiment_json(const char *config, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HYPDYN_H */
