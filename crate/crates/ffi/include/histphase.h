/* C interface to histphase: discrete geometric phases of paths of quantum rays. */

#ifndef HISTPHASE_H
#define HISTPHASE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Outcome of a library call. Zero is success; everything else names the
// first contract the inputs broke.
typedef enum HpStatus {
  HP_STATUS_OK = 0,
  // A required pointer argument was null.
  HP_STATUS_NULL_POINTER = 1,
  // An argument was out of contract (non-finite entries, zero vector,
  // dimension below 2, ...).
  HP_STATUS_INVALID_ARGUMENT = 2,
  // Two objects live in spaces of different dimension.
  HP_STATUS_DIMENSION_MISMATCH = 3,
  // The operation needs at least two path samples.
  HP_STATUS_PATH_TOO_SHORT = 4,
  // Open-path phase is undefined for orthogonal endpoints.
  HP_STATUS_ORTHOGONAL_ENDPOINTS = 5,
  // Loop holonomy needs the first and last samples on the same ray.
  HP_STATUS_NOT_A_LOOP = 6,
  // An overlap in the product chain vanished, so the angle is undefined
  // (the phase factor itself is still the zero it should be).
  HP_STATUS_VANISHING_OVERLAP = 7,
} HpStatus;

// Growable sequence of rays; the C-side stand-in for `DiscretePath`.
// Opaque on purpose: layout is free to change.
typedef struct HpPath HpPath;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Version of this library as a static NUL-terminated string.
const char *hp_version(void);

// Static human-readable description of a status code.
const char *hp_status_message(enum HpStatus status);

// Wrap `x` into the principal branch (-pi, pi].
double hp_principal_angle(double x);

// Allocate an empty path over C^dim. Returns null when `dim` < 2.
struct HpPath *hp_path_new(size_t dim);

// Release a path. Null is a no-op.
//
// # Safety
// `path` must be a pointer from `hp_path_new` not freed before.
void hp_path_free(struct HpPath *path);

// Number of samples pushed so far; 0 for a null handle.
//
// # Safety
// `path` must be null or a live pointer from `hp_path_new`.
size_t hp_path_len(const struct HpPath *path);

// Append one sample from `2 * dim` interleaved doubles. The amplitudes are
// normalized on entry; the zero vector and non-finite entries are rejected.
//
// # Safety
// `amplitudes` must point to `2 * dim` readable doubles for the `dim` the
// path was created with.
enum HpStatus hp_path_push(struct HpPath *path, const double *amplitudes);

// Append the spin-1/2 coherent state at colatitude `theta`, azimuth `phi`.
// The path must live over C^2.
//
// # Safety
// `path` must be null or a live pointer from `hp_path_new`.
enum HpStatus hp_path_push_bloch(struct HpPath *path, double theta, double phi);

// Remove all samples, keeping the dimension.
//
// # Safety
// `path` must be null or a live pointer from `hp_path_new`.
enum HpStatus hp_path_clear(struct HpPath *path);

// Pancharatnam product of the path: the closing overlap times the chain of
// successive overlaps. Writes the complex factor; its modulus is at most 1
// and may be 0, in which case no angle exists.
//
// # Safety
// `out_re` and `out_im` must be writable.
enum HpStatus hp_path_pancharatnam(const struct HpPath *path, double *out_re, double *out_im);

// Geometric phase of an open path, i.e. the principal argument of the
// Pancharatnam product, with the endpoints closed by a geodesic. Fails on
// orthogonal endpoints and on a vanishing interior overlap.
//
// # Safety
// `out_angle` must be writable.
enum HpStatus hp_path_open_phase(const struct HpPath *path, double *out_angle);

// Holonomy angle of a closed path. The first and last samples must lie on
// the same ray; representatives are free.
//
// # Safety
// `out_angle` must be writable.
enum HpStatus hp_path_loop_holonomy(const struct HpPath *path, double *out_angle);

// Fubini-Study distance arccos |<a|b>| between the rays of two states,
// each given as `2 * dim` interleaved doubles.
//
// # Safety
// `a` and `b` must point to `2 * dim` readable doubles; `out_distance`
// must be writable.
enum HpStatus hp_fs_distance(size_t dim, const double *a, const double *b, double *out_distance);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HISTPHASE_H */
