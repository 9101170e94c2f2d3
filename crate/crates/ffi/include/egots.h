#ifndef EGOTS_H
#define EGOTS_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stddef.h>

/**
 * Result code of every fallible call.
 */
typedef enum EgotsStatus {
  EGOTS_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  EGOTS_STATUS_NULL_POINTER = 1,
  /**
   * Bad sizes, indices or settings.
   */
  EGOTS_STATUS_INVALID_ARGUMENT = 2,
  /**
   * Malformed file contents or inputs that disagree with each other.
   */
  EGOTS_STATUS_DATA = 3,
  EGOTS_STATUS_IO = 4,
  EGOTS_STATUS_NUMERICAL = 5,
  EGOTS_STATUS_PANIC = 6,
} EgotsStatus;

typedef struct EgotsGraph EgotsGraph;

typedef struct EgotsLabels EgotsLabels;

typedef struct EgotsModel EgotsModel;

typedef struct EgotsSeries EgotsSeries;

typedef struct EgotsScores {
  double precision;
  double recall;
  double f1;
  size_t n_pred_onsets;
  size_t n_true_onsets;
} EgotsScores;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *egots_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *egots_version(void);

/**
 * Series from `n_dims` rows of `len` values, stored row-major in `data`.
 */
enum EgotsStatus egots_series_new(const double *data,
                                  size_t n_dims,
                                  size_t len,
                                  struct EgotsSeries **out);

enum EgotsStatus egots_series_read_csv(const char *path, struct EgotsSeries **out);

/**
 * Length of the series, 0 for a null handle.
 */
size_t egots_series_len(const struct EgotsSeries *series);

size_t egots_series_n_dims(const struct EgotsSeries *series);

void egots_series_free(struct EgotsSeries *series);

/**
 * Label series over classes `0..n_classes`; 0 is background.
 * `n_classes = 0` infers it from the largest label.
 */
enum EgotsStatus egots_labels_new(const size_t *labels,
                                  size_t len,
                                  size_t n_classes,
                                  struct EgotsLabels **out);

enum EgotsStatus egots_labels_read_csv(const char *path, struct EgotsLabels **out);

enum EgotsStatus egots_labels_write_csv(const struct EgotsLabels *labels, const char *path);

size_t egots_labels_len(const struct EgotsLabels *labels);

size_t egots_labels_n_classes(const struct EgotsLabels *labels);

/**
 * Copies the labels into `buf`, which must hold `cap >= len` entries.
 */
enum EgotsStatus egots_labels_copy(const struct EgotsLabels *labels, size_t *buf, size_t cap);

void egots_labels_free(struct EgotsLabels *labels);

/**
 * Self-join k-NN graph with the exclusion zone. `threads = 0` uses all cores.
 */
enum EgotsStatus egots_graph_self(const struct EgotsSeries *series,
                                  size_t m,
                                  size_t k,
                                  size_t threads_,
                                  struct EgotsGraph **out);

/**
 * Graph from each `query` subsequence to its k nearest `target` subsequences.
 */
enum EgotsStatus egots_graph_cross(const struct EgotsSeries *query,
                                   const struct EgotsSeries *target,
                                   size_t m,
                                   size_t k,
                                   size_t threads_,
                                   struct EgotsGraph **out);

enum EgotsStatus egots_graph_load(const char *path, struct EgotsGraph **out);

enum EgotsStatus egots_graph_save(const struct EgotsGraph *graph, const char *path);

size_t egots_graph_n_rows(const struct EgotsGraph *graph);

size_t egots_graph_k(const struct EgotsGraph *graph);

size_t egots_graph_m(const struct EgotsGraph *graph);

/**
 * 1 for a self-join graph, 0 for a cross graph or a null handle.
 */
int egots_graph_is_self(const struct EgotsGraph *graph);

/**
 * Writes the `k` neighbor starts of `row`, nearest first, into `buf`.
 */
enum EgotsStatus egots_graph_row(const struct EgotsGraph *graph,
                                 size_t row,
                                 size_t *buf,
                                 size_t cap);

void egots_graph_free(struct EgotsGraph *graph);

/**
 * Majority vote over the first `k_use` neighbors of each row.
 */
enum EgotsStatus egots_knn_predict(const struct EgotsGraph *graph,
                                   const struct EgotsLabels *train_labels,
                                   size_t k_use,
                                   struct EgotsLabels **out);

/**
 * Temporal-consistency smoothing with window `w` (1 leaves labels unchanged).
 */
enum EgotsStatus egots_smooth(const struct EgotsLabels *labels,
                              size_t window,
                              struct EgotsLabels **out);

/**
 * Onset-based scores. `m_med = 0` uses the median foreground run of `truth`.
 */
enum EgotsStatus egots_onset_f1(const struct EgotsLabels *pred,
                                const struct EgotsLabels *truth,
                                size_t m_med,
                                struct EgotsScores *out);

/**
 * Loads an `EGOW` checkpoint written by `egots train`.
 */
enum EgotsStatus egots_model_load(const char *path, struct EgotsModel **out);

/**
 * Smoothing window the checkpoint selected on validation data.
 */
size_t egots_model_window(const struct EgotsModel *model);

size_t egots_model_m(const struct EgotsModel *model);

/**
 * Predicts one label per test subsequence. Nonzero `smooth` applies the
 * checkpoint's window.
 */
enum EgotsStatus egots_infer(const struct EgotsModel *model,
                             const struct EgotsSeries *test,
                             const struct EgotsSeries *train,
                             const struct EgotsLabels *train_labels,
                             size_t threads_,
                             int smooth,
                             struct EgotsLabels **out);

void egots_model_free(struct EgotsModel *model);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EGOTS_H */
