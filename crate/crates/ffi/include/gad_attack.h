#ifndef GAD_ATTACK_H
#define GAD_ATTACK_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  GAD_STATUS_OK = 0,
  GAD_STATUS_NULL_POINTER = 1,
  GAD_STATUS_INVALID_ARGUMENT = 2,
  GAD_STATUS_IO = 3,
  GAD_STATUS_PARSE = 4,
  GAD_STATUS_GRAPH = 5,
  GAD_STATUS_NUMERICAL = 6,
  GAD_STATUS_PANIC = 7,
} GadStatus;

typedef enum {
  GAD_METHOD_BINARIZED = 0,
  GAD_METHOD_GRAD_MAX = 1,
  GAD_METHOD_CONTINUOUS = 2,
} GadMethod;

/**
 * Opaque graph handle.
 */
typedef struct GadGraph GadGraph;

/**
 * Opaque perturbation plan handle.
 */
typedef struct GadPlan GadPlan;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null if none.
 * The pointer stays valid until the next failing call on this thread.
 */
const char *gad_last_error(void);

/**
 * Load a whitespace-separated edge list.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
GadStatus gad_graph_load(const char *path, bool collapse_directed, GadGraph **out);

/**
 * Build a graph on nodes `0..n` from `m` edges given as parallel arrays.
 *
 * # Safety
 * `src` and `dst` must each point to `m` values; `out` must be valid.
 */
GadStatus gad_graph_from_edges(size_t n,
                               const size_t *src,
                               const size_t *dst,
                               size_t m,
                               GadGraph **out);

/**
 * # Safety
 * `graph` must come from this library and not be used afterwards.
 */
void gad_graph_free(GadGraph *graph);

/**
 * # Safety
 * `graph` must be null or a live handle.
 */
size_t gad_graph_num_nodes(const GadGraph *graph);

/**
 * # Safety
 * `graph` must be null or a live handle.
 */
size_t gad_graph_num_edges(const GadGraph *graph);

/**
 * Write one anomaly score per node into `scores` (length `len` = node count).
 *
 * # Safety
 * `graph` must be live and `scores` must hold `len` doubles.
 */
GadStatus gad_detect_scores(const GadGraph *graph, double *scores, size_t len);

/**
 * Run an attack against the egonet detector on `targets` (node indices)
 * with at most `budget` flips. With `direct` only pairs touching a target
 * are candidates.
 *
 * # Safety
 * `graph` must be live, `targets` must hold `num_targets` indices and
 * `out` must be valid.
 */
GadStatus gad_oddball_attack(const GadGraph *graph,
                             GadMethod method,
                             const size_t *targets,
                             size_t num_targets,
                             size_t budget,
                             bool direct,
                             uint64_t seed,
                             GadPlan **out);

/**
 * # Safety
 * `plan` must be null or a live handle.
 */
size_t gad_plan_len(const GadPlan *plan);

/**
 * Read op `index`: endpoints `i < j` and whether it adds the edge.
 *
 * # Safety
 * `plan` must be live; the out pointers must be valid.
 */
GadStatus gad_plan_get(const GadPlan *plan, size_t index, size_t *i, size_t *j, bool *is_add);

/**
 * # Safety
 * `plan` must come from this library and not be used afterwards.
 */
void gad_plan_free(GadPlan *plan);

/**
 * Apply `plan` to `graph`, producing a new graph handle.
 *
 * # Safety
 * Both handles must be live and `out` valid.
 */
GadStatus gad_graph_apply(const GadGraph *graph, const GadPlan *plan, GadGraph **out);

/**
 * Relative drop of a target score sum, `(s0 - sb) / s0`.
 *
 * # Safety
 * `out` must be valid.
 */
GadStatus gad_tau_as(double s0, double sb, double *out);

/**
 * ROC AUC of `scores` against 0/1 `labels`, ties at half credit.
 *
 * # Safety
 * `scores` and `labels` must hold `len` values; `out` must be valid.
 */
GadStatus gad_auc(const double *scores, const uint8_t *labels, size_t len, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GAD_ATTACK_H */
