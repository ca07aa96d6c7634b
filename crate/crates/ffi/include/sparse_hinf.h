/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef SPARSE_HINF_H
#define SPARSE_HINF_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes shared by every function.
 */
typedef enum ShStatus {
  SH_STATUS_OK = 0,
  SH_STATUS_NULL_POINTER = 1,
  SH_STATUS_INVALID_ARGUMENT = 2,
  SH_STATUS_DIMENSION = 3,
  SH_STATUS_INFEASIBLE = 4,
  SH_STATUS_SOLVER = 5,
  SH_STATUS_NOT_HURWITZ = 6,
  SH_STATUS_ILL_POSED = 7,
  SH_STATUS_BUFFER_TOO_SMALL = 8,
  SH_STATUS_PANIC = 9,
  SH_STATUS_OTHER = 10,
} ShStatus;

/**
 * Uncertainty structure of an LFT plant.
 */
typedef enum ShDeltaStructure {
  SH_DELTA_STRUCTURE_FULL_BLOCK = 0,
  SH_DELTA_STRUCTURE_DIAGONAL = 1,
} ShDeltaStructure;

/**
 * Designed observer.
 */
typedef struct ShDesign ShDesign;

/**
 * Plant with uncertainty in a feedback block.
 */
typedef struct ShLft ShLft;

/**
 * Plant with affine, norm-bounded uncertainty.
 */
typedef struct ShStructured ShStructured;

/**
 * Tuning of the design loop; obtain defaults from [`sh_design_options_default`].
 */
typedef struct ShDesignOptions {
  double epsilon_reweight;
  size_t max_reweight_iters;
  double convergence_tol;
  double prune_rel;
  double prune_abs;
  double centering_slack;
  double beta_min;
  double delta_min;
  double margin_scale;
  double abs_tol;
  double rel_tol;
  size_t max_iter;
} ShDesignOptions;

/**
 * Summary of a sampled certification. Norms of unstable samples are `+inf`.
 */
typedef struct ShReport {
  double gamma;
  size_t n_samples;
  double worst_norm;
  size_t worst_sample_id;
  size_t n_violations;
  double nominal_norm;
  bool passed;
} ShReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the last failure on this thread (empty after success).
 * The pointer stays valid until the next call into the library on this thread.
 */
const char *sh_last_error(void);

/**
 * Library defaults for the design loop.
 */
struct ShDesignOptions sh_design_options_default(void);

/**
 * Plant `x' = A x + B_d d`, `y = C_y x + D_d d + n`, `z = C_z x` with
 * `dA = M1 F1 N1`, `dB_d = M2 F2 N2`. `M1` is `n x p1`, `N1` is `q1 x n`,
 * `M2` is `n x p2`, `N2` is `q2 x n_d`; zero-sized factors are allowed.
 *
 * # Safety
 * Every matrix pointer must reference an array of the stated size.
 */
enum ShStatus sh_structured_new(size_t n,
                                size_t n_d,
                                size_t n_y,
                                size_t n_z,
                                const double *a,
                                const double *b_d,
                                const double *c_y,
                                const double *d_d,
                                const double *c_z,
                                size_t p1,
                                size_t q1,
                                const double *m1,
                                const double *n1,
                                size_t p2,
                                size_t q2,
                                const double *m2,
                                const double *n2,
                                struct ShStructured **out);

/**
 * Three-mass spring-mass-damper benchmark with affine uncertainty.
 *
 * # Safety
 * `s_d` must point to 3 doubles; `out` must be writable.
 */
enum ShStatus sh_smd_structured_new(const double *s_d,
                                    double c0,
                                    double c1,
                                    double c2,
                                    struct ShStructured **out);

/**
 * # Safety
 * `p` must be null or a handle from this library, not used afterwards.
 */
void sh_structured_free(struct ShStructured *p);

/**
 * LFT plant
 * `x' = A x + B_delta w + B_d d`, `z_delta = C_delta x + E_delta w + E_d d`,
 * `y = C_y x + D_delta w + D_d d + n`, `z = C_z x`, closed by `w = Delta z_delta`.
 * `Delta` is `n_w x n_zd`.
 *
 * # Safety
 * Every matrix pointer must reference an array of the stated size.
 */
enum ShStatus sh_lft_new(size_t n,
                         size_t n_w,
                         size_t n_d,
                         size_t n_zd,
                         size_t n_y,
                         size_t n_z,
                         const double *a,
                         const double *b_delta,
                         const double *b_d,
                         const double *c_delta,
                         const double *e_delta,
                         const double *e_d,
                         const double *c_y,
                         const double *d_delta,
                         const double *d_d,
                         const double *c_z,
                         enum ShDeltaStructure structure,
                         struct ShLft **out);

/**
 * Spring-mass-damper benchmark with interval springs and dampers.
 *
 * # Safety
 * `s_d` must point to 3 doubles; `out` must be writable.
 */
enum ShStatus sh_smd_lft_new(const double *s_d, double c0, double c1, struct ShLft **out);

/**
 * # Safety
 * `p` must be null or a handle from this library, not used afterwards.
 */
void sh_lft_free(struct ShLft *p);

/**
 * Sparse observer design at level `gamma`; `opts` may be null for defaults.
 *
 * # Safety
 * Handles must be live; `out` must be writable.
 */
enum ShStatus sh_design_structured(const struct ShStructured *plant,
                                   double gamma,
                                   const struct ShDesignOptions *opts,
                                   struct ShDesign **out);

/**
 * Sparse observer design for an LFT plant; `opts` may be null for defaults.
 *
 * # Safety
 * Handles must be live; `out` must be writable.
 */
enum ShStatus sh_design_lft(const struct ShLft *plant,
                            double gamma,
                            const struct ShDesignOptions *opts,
                            struct ShDesign **out);

/**
 * # Safety
 * `p` must be null or a handle from this library, not used afterwards.
 */
void sh_design_free(struct ShDesign *p);

/**
 * Number of estimator states (rows of the gain); 0 for a null handle.
 *
 * # Safety
 * `d` must be null or a live handle.
 */
size_t sh_design_n_states(const struct ShDesign *d);

/**
 * Number of candidate sensors; 0 for a null handle.
 *
 * # Safety
 * `d` must be null or a live handle.
 */
size_t sh_design_n_sensors(const struct ShDesign *d);

/**
 * Number of selected sensors; 0 for a null handle.
 *
 * # Safety
 * `d` must be null or a live handle.
 */
size_t sh_design_active_count(const struct ShDesign *d);

/**
 * Precision per sensor (0 for unselected sensors).
 *
 * # Safety
 * `out` must hold `len` doubles.
 */
enum ShStatus sh_design_beta(const struct ShDesign *d, double *out, size_t len);

/**
 * Selection mask per sensor (1 selected, 0 not).
 *
 * # Safety
 * `out` must hold `len` bytes.
 */
enum ShStatus sh_design_active(const struct ShDesign *d, uint8_t *out, size_t len);

/**
 * Observer gain, row-major, states x sensors.
 *
 * # Safety
 * `out` must hold `len` doubles.
 */
enum ShStatus sh_design_gain(const struct ShDesign *d, double *out, size_t len);

/**
 * Sampled certification: the nominal plant plus `n_samples` admissible
 * perturbations drawn from `seed`.
 *
 * # Safety
 * Handles must be live; `report` must be writable.
 */
enum ShStatus sh_verify_structured(const struct ShStructured *plant,
                                   const struct ShDesign *design,
                                   double gamma,
                                   size_t n_samples,
                                   uint64_t seed,
                                   struct ShReport *report);

/**
 * Sampled certification of an LFT design under diagonal and full-block
 * uncertainty, plus the norm of the open-loop uncertainty channel. Any of
 * the output pointers may be null.
 *
 * # Safety
 * Handles must be live; non-null outputs must be writable.
 */
enum ShStatus sh_verify_lft(const struct ShLft *plant,
                            const struct ShDesign *design,
                            double gamma,
                            size_t n_samples,
                            uint64_t seed,
                            struct ShReport *diagonal,
                            struct ShReport *full_block,
                            double *channel_norm,
                            bool *passed);

/**
 * H-infinity norm of a stable `(A, B, C, D)` to relative accuracy `tol`.
 *
 * # Safety
 * Matrix pointers must reference arrays of the stated size; `out` must be writable.
 */
enum ShStatus sh_hinf_norm(size_t n,
                           size_t m,
                           size_t p,
                           const double *a,
                           const double *b,
                           const double *c,
                           const double *d,
                           double tol,
                           double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPARSE_HINF_H */
