#ifndef GRAPHSEG_H
#define GRAPHSEG_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum GsStatus {
  GS_STATUS_OK = 0,
  GS_STATUS_INVALID_ARGUMENT = 1,
  GS_STATUS_DIMENSION_MISMATCH = 2,
  GS_STATUS_NON_FINITE = 3,
  GS_STATUS_NO_CONVERGENCE = 4,
  GS_STATUS_SINGULAR_LANDMARKS = 5,
  GS_STATUS_IO = 6,
  GS_STATUS_PARSE = 7,
  GS_STATUS_NULL_POINTER = 8,
  GS_STATUS_PANIC = 9,
} GsStatus;

typedef enum GsWeightKind {
  GS_WEIGHT_KIND_LOCAL_SCALING = 0,
  GS_WEIGHT_KIND_GAUSSIAN = 1,
  GS_WEIGHT_KIND_COSINE = 2,
} GsWeightKind;

typedef struct GsBasis GsBasis;

typedef struct GsGraph GsGraph;

typedef struct GsWeightParams {
  enum GsWeightKind kind;
  size_t neighbors;
  // Neighbour rank for local scaling.
  size_t scale_neighbor;
  // Gaussian bandwidth.
  double sigma;
} GsWeightParams;

typedef struct GsMboParams {
  double dt;
  double mu;
  double eta;
  size_t n_s;
  size_t max_iters;
  uint64_t seed;
} GsMboParams;

typedef struct GsGlParams {
  double epsilon;
  double dt;
  double mu;
  double eta;
  // Convexity constant, at least `mu + 1/epsilon`.
  double c;
  size_t max_iters;
  uint64_t seed;
} GsGlParams;

// Segmentation result metadata.
typedef struct GsRunInfo {
  size_t iterations;
  // 1 if the stopping rule was met, 0 if the iteration cap was hit.
  int32_t converged;
} GsRunInfo;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or null. Valid until
// the next call into the library from the same thread.
const char *gs_last_error_message(void);

// Builds a k-NN graph from `n_rows × n_cols` row-major features.
//
// # Safety
// `features` must point to `n_rows * n_cols` doubles, `params` and `out`
// must be valid pointers.
enum GsStatus gs_graph_new(const double *features,
                           size_t n_rows,
                           size_t n_cols,
                           const struct GsWeightParams *params,
                           struct GsGraph **out);

// # Safety
// `graph` must be null or a handle from [`gs_graph_new`] not yet freed.
void gs_graph_free(struct GsGraph *graph);

// # Safety
// `graph` must be a live handle.
size_t gs_graph_n_vertices(const struct GsGraph *graph);

// # Safety
// `graph` must be a live handle.
size_t gs_graph_n_edges(const struct GsGraph *graph);

// Computes the `n_e` smallest eigenpairs of the graph's normalized
// Laplacian to residual tolerance `tol`.
//
// # Safety
// `graph` must be a live handle and `out` a valid pointer.
enum GsStatus gs_basis_compute(const struct GsGraph *graph,
                               size_t n_e,
                               double tol,
                               uint64_t seed,
                               struct GsBasis **out);

// # Safety
// `basis` must be null or a handle from [`gs_basis_compute`] not yet freed.
void gs_basis_free(struct GsBasis *basis);

// # Safety
// `basis` must be a live handle.
size_t gs_basis_n_e(const struct GsBasis *basis);

// Copies the eigenvalues (ascending) into `out`, which holds `len` doubles.
//
// # Safety
// `basis` must be a live handle and `out` must hold `len` doubles.
enum GsStatus gs_basis_eigenvalues(const struct GsBasis *basis, double *out, size_t len);

// Three-moons MBO defaults.
struct GsMboParams gs_mbo_default_params(void);

// Three-moons GL defaults.
struct GsGlParams gs_gl_default_params(void);

// Multiclass MBO segmentation using every eigenpair of `basis`. Writes
// one class index per vertex into `labels_out`.
//
// # Safety
// `basis` must be a live handle; the fidelity arrays must hold
// `n_fidelity` entries; `labels_out` must hold `n_labels` entries; `info`
// may be null.
enum GsStatus gs_segment_mbo(const struct GsBasis *basis,
                             size_t n_classes,
                             const size_t *fidelity_nodes,
                             const size_t *fidelity_classes,
                             size_t n_fidelity,
                             const struct GsMboParams *params,
                             size_t *labels_out,
                             size_t n_labels,
                             struct GsRunInfo *info);

// Multiclass GL segmentation using every eigenpair of `basis`.
//
// # Safety
// Same contract as [`gs_segment_mbo`].
enum GsStatus gs_segment_gl(const struct GsBasis *basis,
                            size_t n_classes,
                            const size_t *fidelity_nodes,
                            const size_t *fidelity_classes,
                            size_t n_fidelity,
                            const struct GsGlParams *params,
                            size_t *labels_out,
                            size_t n_labels,
                            struct GsRunInfo *info);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GRAPHSEG_H */
