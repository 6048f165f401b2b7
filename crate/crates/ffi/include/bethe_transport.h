#ifndef BETHE_TRANSPORT_H
#define BETHE_TRANSPORT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum BtStatus {
  BT_STATUS_OK = 0,
  BT_STATUS_INVALID_ARGUMENT = 1,
  BT_STATUS_NULL_POINTER = 2,
  BT_STATUS_NUMERIC = 3,
  BT_STATUS_IO = 4,
  BT_STATUS_PANIC = 5,
} BtStatus;

typedef enum BtDistKind {
  // Uniform on `[-param/2, param/2]`.
  BT_DIST_KIND_UNIFORM = 0,
  // Centred normal law with standard deviation `param`.
  BT_DIST_KIND_GAUSSIAN = 1,
} BtDistKind;

// Potential sampled on a truncated tree.
typedef struct BtField BtField;

// Population of forward Green functions.
typedef struct BtPool BtPool;

typedef struct BtDistribution {
  enum BtDistKind kind;
  double param;
} BtDistribution;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the last error message of this thread into `buf` (NUL-terminated,
// truncated to `len - 1` bytes) and returns the full message length.
// `buf` may be null to query the length.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
size_t bt_last_error(char *buf, size_t len);

// Samples an i.i.d. potential on the `K`-regular tree of depth `depth`.
//
// # Safety
// `dist` must be null or valid; `out` must be null or writable.
enum BtStatus bt_field_sample(const struct BtDistribution *dist,
                              size_t branching,
                              size_t depth,
                              uint64_t seed,
                              struct BtField **out);

// Number of vertices of the tree carrying `field`, or 0 for null.
//
// # Safety
// `field` must be null or a live handle.
size_t bt_field_vertex_count(const struct BtField *field);

// # Safety
// `field` must be null or a handle not yet freed.
void bt_field_free(struct BtField *field);

// Writes `G(0,x;E+i eta)` for every vertex `x` (heap order) with Dirichlet truncation.
// `len` must equal [`bt_field_vertex_count`].
//
// # Safety
// `re` and `im` must each hold `len` writable doubles.
enum BtStatus bt_resolvent_column(const struct BtField *field,
                                  double energy,
                                  double eta,
                                  double *re,
                                  double *im,
                                  size_t len);

// Builds a pool at `E + i eta` and runs `burn_in` sweeps.
//
// # Safety
// `dist` must be null or valid; `out` must be null or writable.
enum BtStatus bt_pool_new(const struct BtDistribution *dist,
                          size_t branching,
                          double energy,
                          double eta,
                          size_t size,
                          size_t burn_in,
                          uint64_t seed,
                          struct BtPool **out);

// Runs `sweeps` further sweeps.
//
// # Safety
// `pool` must be null or a live handle used by one thread at a time.
enum BtStatus bt_pool_evolve(struct BtPool *pool, size_t sweeps);

// Sweeps completed so far, or 0 for null.
//
// # Safety
// `pool` must be null or a live handle.
size_t bt_pool_sweeps_done(const struct BtPool *pool);

// Draws `n` samples of `G(0,0)`; the same `(pool, stream)` pair gives the same draws.
//
// # Safety
// `re` and `im` must each hold `n` writable doubles.
enum BtStatus bt_pool_root_samples(const struct BtPool *pool,
                                   size_t n,
                                   uint64_t stream,
                                   double *re,
                                   double *im);

// Writes a binary snapshot and its JSON sidecar (`<path>.json`).
//
// # Safety
// `pool` must be null or live; `path` null or NUL-terminated.
enum BtStatus bt_pool_save(const struct BtPool *pool, const char *path);

// Loads a snapshot. Sampling from the loaded pool requires at least the
// default burn-in of 100 recorded sweeps.
//
// # Safety
// `path` must be null or NUL-terminated; `out` null or writable.
enum BtStatus bt_pool_load(const char *path, struct BtPool **out);

// # Safety
// `pool` must be null or a handle not yet freed.
void bt_pool_free(struct BtPool *pool);

// Front speed `v_hat` and rate `mu` of the ballistic tail bound for branching `K`.
//
// # Safety
// `v_hat` and `mu` must be null or writable.
enum BtStatus bt_ballistic_certificate(size_t branching, double *v_hat, double *mu);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BETHE_TRANSPORT_H */
