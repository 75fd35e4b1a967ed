#ifndef CASIMIR_SPHERE_H
#define CASIMIR_SPHERE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

#define CS_OK 0

#define CS_ERR_NULL -1

#define CS_ERR_DOMAIN -2

#define CS_ERR_OVERFLOW -3

#define CS_ERR_ORDER_CAP -4

#define CS_ERR_INVALID_MATERIAL -5

#define CS_ERR_GEOMETRY -6

#define CS_ERR_DEGENERATE -7

#define CS_ERR_SINGULAR -8

#define CS_ERR_TAIL -9

#define CS_ERR_QUADRATURE -10

#define CS_ERR_ROOT -11

#define CS_ERR_NON_CONVERGENCE -12

#define CS_ERR_CONFIG -13

#define CS_ERR_UTF8 -14

#define CS_ERR_PANIC -99

#define CS_TE 0

#define CS_TM 1

/**
 * Geometry handle: layers from the core outwards, vacuum outside.
 */
typedef struct CsGeometry CsGeometry;

/**
 * Material handle.
 */
typedef struct CsMaterial CsMaterial;

typedef struct CsComplex {
  double re;
  double im;
} CsComplex;

typedef struct CsStressOptions {
  double tol;
  double standoff;
  uint64_t l_cap;
  uint64_t n_cap;
} CsStressOptions;

/**
 * Summary of a stress evaluation. On `CS_ERR_NON_CONVERGENCE` it holds the
 * partial result with `converged = false`.
 */
typedef struct CsStressSummary {
  /**
   * `T_RR` in `hbar c / R^4`.
   */
  double t_rr;
  double temperature;
  double tail_estimate;
  uint64_t l_max_used;
  uint64_t n_max_used;
  bool converged;
} CsStressSummary;

/**
 * Message of the last failure on this thread, or NULL. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *cs_last_error(void);

void cs_clear_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *cs_version(void);

/**
 * New material with the given high-frequency limits and no poles.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
int32_t cs_material_new(double eps_infinity, double mu_infinity, struct CsMaterial **out);

/**
 * Adds `strength / (resonance^2 - w^2 - i damping w)` to the permittivity.
 *
 * # Safety
 * `m` must be a live handle from `cs_material_new`.
 */
int32_t cs_material_add_eps_pole(struct CsMaterial *m,
                                 double strength,
                                 double resonance,
                                 double damping);

/**
 * Adds a pole to the permeability.
 *
 * # Safety
 * `m` must be a live handle from `cs_material_new`.
 */
int32_t cs_material_add_mu_pole(struct CsMaterial *m,
                                double strength,
                                double resonance,
                                double damping);

/**
 * Permittivity at complex frequency `omega` (upper half plane).
 *
 * # Safety
 * `m` must be a live handle; `out` must be writable.
 */
int32_t cs_material_eps(const struct CsMaterial *m, struct CsComplex omega, struct CsComplex *out);

/**
 * Permeability at complex frequency `omega` (upper half plane).
 *
 * # Safety
 * `m` must be a live handle; `out` must be writable.
 */
int32_t cs_material_mu(const struct CsMaterial *m, struct CsComplex omega, struct CsComplex *out);

/**
 * # Safety
 * `m` must be NULL or a handle from `cs_material_new` not yet freed.
 */
void cs_material_free(struct CsMaterial *m);

/**
 * Empty geometry in vacuum.
 *
 * # Safety
 * `out` must be writable.
 */
int32_t cs_geometry_new(struct CsGeometry **out);

/**
 * Appends a layer of outer radius `radius`; the material is copied.
 *
 * # Safety
 * `g` and `m` must be live handles.
 */
int32_t cs_geometry_add_layer(struct CsGeometry *g, double radius, const struct CsMaterial *m);

/**
 * # Safety
 * `g` must be NULL or a handle from `cs_geometry_new` not yet freed.
 */
void cs_geometry_free(struct CsGeometry *g);

/**
 * Reflection coefficient of partial wave `l` (`CS_TE` or `CS_TM`) seen from
 * outside.
 *
 * # Safety
 * `g` must be a live handle; `out` must be writable.
 */
int32_t cs_reflection(const struct CsGeometry *g,
                      uint32_t l,
                      int32_t polarization,
                      struct CsComplex omega,
                      struct CsComplex *out);

/**
 * Matsubara-sum stress at reduced temperature `t`. `opts` may be NULL for
 * defaults (standoff 0, which does not converge on the surface).
 *
 * # Safety
 * `g` must be a live handle, `opts` NULL or readable, `out` writable.
 */
int32_t cs_stress_finite_t(const struct CsGeometry *g,
                           double t,
                           const struct CsStressOptions *opts,
                           struct CsStressSummary *out);

/**
 * Zero-temperature stress from the imaginary-frequency integral.
 *
 * # Safety
 * As for `cs_stress_finite_t`.
 */
int32_t cs_stress_zero_t(const struct CsGeometry *g,
                         const struct CsStressOptions *opts,
                         struct CsStressSummary *out);

/**
 * Runs a JSON job (the CLI config format) in memory and returns its CSV in
 * `*csv_out`, to be released with `cs_string_free`. Output paths in the
 * config are ignored. Returns `CS_ERR_CONFIG` for an invalid config (no CSV)
 * and `CS_ERR_NON_CONVERGENCE` when some point failed (CSV of the rest).
 *
 * # Safety
 * `config_json` must be a NUL-terminated string; `csv_out` writable.
 */
int32_t cs_run_job_json(const char *config_json, char **csv_out);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library, not yet freed.
 */
void cs_string_free(char *s);

#endif  /* CASIMIR_SPHERE_H */
