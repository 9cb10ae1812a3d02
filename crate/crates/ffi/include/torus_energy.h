#ifndef TORUS_ENERGY_H
#define TORUS_ENERGY_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible function.
 */
typedef enum TeStatus {
  TE_STATUS_OK = 0,
  TE_STATUS_NULL_POINTER = 1,
  TE_STATUS_INVALID_ARGUMENT = 2,
  TE_STATUS_NUMERICAL = 3,
  TE_STATUS_BUDGET_EXCEEDED = 4,
  TE_STATUS_PANIC = 5,
} TeStatus;

/**
 * A torus ℝᵈ/(nΛ) with a Riesz exponent, prepared for energy evaluation.
 */
typedef struct TeEnergyModel TeEnergyModel;

/**
 * A lattice of covolume 1 (or as given by its basis).
 */
typedef struct TeLattice TeLattice;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *te_version(void);

/**
 * Message for the last failed call on this thread, or NULL. Valid until the
 * next call into the library on the same thread.
 */
const char *te_last_error(void);

/**
 * Named lattice (`"Z3"`, `"A2"`, `"D4"`, `"E8"`, `"Leech"`) at covolume 1.
 */
enum TeStatus te_lattice_named(const char *name, struct TeLattice **out);

/**
 * Lattice from `d` row-major basis rows (`d × d` doubles).
 */
enum TeStatus te_lattice_from_basis(size_t d, const double *basis, struct TeLattice **out);

void te_lattice_free(struct TeLattice *lat);

/**
 * Dimension, or 0 for NULL.
 */
size_t te_lattice_dim(const struct TeLattice *lat);

/**
 * Covolume and minimal squared norm; either output may be NULL.
 */
enum TeStatus te_lattice_info(const struct TeLattice *lat, double *covolume, double *minimal_norm);

/**
 * `c_{d,s}` with `(−Δ)^α g = c_{d,s} δ₀`.
 */
enum TeStatus te_riesz_constant(size_t d, double s, double *out);

/**
 * Madelung constant of ℝᵈ/(nΛ) for exponent `s` (0 in d = 2 is the log
 * kernel).
 */
enum TeStatus te_madelung(const struct TeLattice *lat,
                          uint32_t n,
                          double s,
                          double *value,
                          double *error);

/**
 * Periodic Green function of ℝᵈ/(nΛ) at `x` (length `d`), Ewald route.
 */
enum TeStatus te_green(const struct TeLattice *lat,
                       uint32_t n,
                       double s,
                       const double *x,
                       size_t len,
                       double *value,
                       double *error);

/**
 * Epstein zeta `Σ_v |x+v|^{−s}`; with `x = NULL` the sum over `Λ \ 0`.
 */
enum TeStatus te_epstein_zeta(const struct TeLattice *lat,
                              double s,
                              const double *x,
                              size_t len,
                              double *value,
                              double *error);

/**
 * Energy model on ℝᵈ/(nΛ) for exponent `s`.
 */
enum TeStatus te_energy_model_new(const struct TeLattice *lat,
                                  uint32_t n,
                                  double s,
                                  struct TeEnergyModel **out);

void te_energy_model_free(struct TeEnergyModel *model);

/**
 * Number of points `nᵈ` of a density-one configuration, or 0 for NULL.
 */
size_t te_energy_model_points(const struct TeEnergyModel *model);

/**
 * Periodic energy of `count` points (`count × d` doubles). When `gradient`
 * is not NULL it receives `count × d` partial derivatives.
 */
enum TeStatus te_energy(const struct TeEnergyModel *model,
                        const double *points,
                        size_t count,
                        double *value,
                        double *gradient);

/**
 * Jellium bracket for `count` points in `[−R/2, R/2]ᵈ`.
 */
enum TeStatus te_jellium_energy(size_t d,
                                double s,
                                double r,
                                const double *points,
                                size_t count,
                                double *value);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TORUS_ENERGY_H */
