#ifndef PADIC_PDO_H
#define PADIC_PDO_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Norm weight selector for `pdo_norm`.
typedef enum PdoNormVariant {
  PDO_NORM_XI = 0,
  PDO_NORM_MAX_ONE_XI = 1,
} PdoNormVariant;

// Result codes.
typedef enum PdoStatus {
  PDO_OK = 0,
  PDO_NULL_POINTER = 1,
  PDO_INVALID_UTF8 = 2,
  PDO_INVALID_INPUT = 3,
  // The polynomial is not quasielliptic; the witness is in `pdo_last_error`.
  PDO_NOT_CERTIFIED = 4,
  // The function is outside the operator's domain.
  PDO_NOT_IN_DOMAIN = 5,
  PDO_PRECONDITION = 6,
  PDO_BUDGET_EXCEEDED = 7,
  PDO_TOO_LARGE = 8,
  PDO_TOLERANCE = 9,
  PDO_PANIC = 10,
  PDO_ERROR = 11,
} PdoStatus;

// A Bruhat-Schwartz function.
typedef struct PdoFunction PdoFunction;

// A weighted polynomial.
typedef struct PdoPoly PdoPoly;

// A certified symbol `|f|^α`.
typedef struct PdoSymbol PdoSymbol;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. Free with
// `pdo_string_free`.
char *pdo_last_error(void);

// Frees a string returned by this library.
//
// # Safety
// `s` must be null or a pointer obtained from this library, freed once.
void pdo_string_free(char *s);

// Parses a polynomial such as `"x1^2 + x2^2"` over `Q_p` with `n` weights.
//
// # Safety
// `weights` points to `n` values, `text` is a nul-terminated string and
// `out` is writable.
enum PdoStatus pdo_poly_parse(uint64_t p,
                              const uint32_t *weights,
                              uintptr_t n,
                              const char *text,
                              struct PdoPoly **out);

// # Safety
// `poly` must be null or a live handle, freed once.
void pdo_poly_free(struct PdoPoly *poly);

// Certification outcome as JSON; `*certified` is 1 for a certificate and 0
// for a witness. A negative `depth_cap` or zero `cell_budget` selects the
// default.
//
// # Safety
// Pointers must be valid; `poly` a live handle.
enum PdoStatus pdo_certify_json(const struct PdoPoly *poly,
                                int64_t depth_cap,
                                uintptr_t cell_budget,
                                int32_t *certified,
                                char **json);

// Certifies `poly` and builds the symbol `|f|^α`.
//
// # Safety
// `poly` must be a live handle and `out` writable.
enum PdoStatus pdo_symbol_new(const struct PdoPoly *poly, double alpha, struct PdoSymbol **out);

// # Safety
// `sym` must be null or a live handle, freed once.
void pdo_symbol_free(struct PdoSymbol *sym);

// `A₀`, `A₁` and the auxiliary exponents as JSON.
//
// # Safety
// `sym` must be a live handle and `json` writable.
enum PdoStatus pdo_symbol_constants_json(const struct PdoSymbol *sym, char **json);

// Reads a function from `{p, n, L, m, coeffs}` JSON.
//
// # Safety
// `json` is a nul-terminated string and `out` writable.
enum PdoStatus pdo_function_from_json(const char *json, struct PdoFunction **out);

// # Safety
// `f` must be a live handle and `json` writable.
enum PdoStatus pdo_function_to_json(const struct PdoFunction *f, char **json);

// # Safety
// `f` must be null or a live handle, freed once.
void pdo_function_free(struct PdoFunction *f);

// `Fφ`.
//
// # Safety
// `f` must be a live handle and `out` writable.
enum PdoStatus pdo_function_fourier(const struct PdoFunction *f, struct PdoFunction **out);

// `F^{-1}φ`.
//
// # Safety
// `f` must be a live handle and `out` writable.
enum PdoStatus pdo_function_inverse_fourier(const struct PdoFunction *f, struct PdoFunction **out);

// `φ(x)` at the point with rational coordinates `coords[0..n]`.
//
// # Safety
// `coords` points to `n` nul-terminated strings; outputs are writable.
enum PdoStatus pdo_function_eval(const struct PdoFunction *f,
                                 const char *const *coords,
                                 uintptr_t n,
                                 double *re,
                                 double *im);

// `f(D;α)φ`.
//
// # Safety
// Handles must be live and `out` writable.
enum PdoStatus pdo_apply(const struct PdoSymbol *sym,
                         const struct PdoFunction *f,
                         struct PdoFunction **out);

// The `u ∈ Φ` with `f(D;α)u = v`.
//
// # Safety
// Handles must be live and `out` writable.
enum PdoStatus pdo_solve(const struct PdoSymbol *sym,
                         const struct PdoFunction *v,
                         struct PdoFunction **out);

// `F^{-1}(e^{-t|f|^α} Fφ)`.
//
// # Safety
// Handles must be live and `out` writable.
enum PdoStatus pdo_evolve(const struct PdoSymbol *sym,
                          const struct PdoFunction *f,
                          double t,
                          struct PdoFunction **out);

// `‖φ‖_β` with the symbol's weights, and its truncation bound.
//
// # Safety
// Handles must be live and outputs writable.
enum PdoStatus pdo_norm(const struct PdoSymbol *sym,
                        const struct PdoFunction *f,
                        double beta,
                        enum PdoNormVariant variant,
                        double tol,
                        double *value,
                        double *tail_bound);

// `Z(x, t)` with certified error `*tail_bound ≤ tol`.
//
// # Safety
// `coords` points to `n` nul-terminated strings; outputs are writable.
enum PdoStatus pdo_heat_kernel(const struct PdoSymbol *sym,
                               const char *const *coords,
                               uintptr_t n,
                               double t,
                               double tol,
                               double *re,
                               double *im,
                               double *tail_bound);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PADIC_PDO_H */
