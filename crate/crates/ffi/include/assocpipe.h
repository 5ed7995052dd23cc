#ifndef ASSOCPIPE_H
#define ASSOCPIPE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum {
  AP_STATUS_OK = 0,
  /**
   * A required pointer was NULL.
   */
  AP_STATUS_NULL_ARGUMENT = 1,
  /**
   * A string was not valid UTF-8.
   */
  AP_STATUS_INVALID_UTF8 = 2,
  /**
   * Bad argument value, such as mismatched lengths or a bad key.
   */
  AP_STATUS_ARGUMENT = 3,
  /**
   * Operation not defined for the value kind.
   */
  AP_STATUS_TYPE = 4,
  /**
   * Malformed file or input data.
   */
  AP_STATUS_FORMAT = 5,
  AP_STATUS_IO = 6,
  /**
   * Table exists with a different combiner, or is missing.
   */
  AP_STATUS_SCHEMA = 7,
  /**
   * Internal error; the library caught a panic.
   */
  AP_STATUS_INTERNAL = 8,
} ApStatus;

/**
 * Semiring selector for array arithmetic.
 */
typedef enum {
  AP_SEMIRING_PLUS_TIMES = 0,
  AP_SEMIRING_MIN_PLUS = 1,
  AP_SEMIRING_MAX_PLUS = 2,
  AP_SEMIRING_MAX_MIN = 3,
} ApSemiring;

/**
 * An associative array.
 */
typedef struct ApArray ApArray;

/**
 * An open table store.
 */
typedef struct ApStore ApStore;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *ap_last_error(void);

/**
 * Releases a string returned by this library. NULL is ignored.
 */
void ap_string_free(char *s);

/**
 * Builds a numeric array from `n` triples. Repeated cells are summed;
 * zeros are dropped.
 */
ApStatus ap_array_from_triples(const char *const *rows,
                               const char *const *cols,
                               const double *vals,
                               size_t n,
                               ApArray **out);

/**
 * Builds a string-valued array from `n` triples. Repeated cells keep the
 * smallest string; empty strings are dropped.
 */
ApStatus ap_array_from_string_triples(const char *const *rows,
                                      const char *const *cols,
                                      const char *const *vals,
                                      size_t n,
                                      ApArray **out);

/**
 * Releases an array. NULL is ignored.
 */
void ap_array_free(ApArray *a);

/**
 * Number of stored entries.
 */
ApStatus ap_array_nnz(const ApArray *a, size_t *out);

/**
 * Looks up a numeric cell. `*found` is set to 0 and `*value` to 0 when the
 * cell is empty.
 */
ApStatus ap_array_get(const ApArray *a,
                      const char *row,
                      const char *col,
                      double *value,
                      bool *found);

/**
 * `a + b` (numeric: sum; strings: minimum).
 */
ApStatus ap_array_add(const ApArray *a, const ApArray *b, ApArray **out);

/**
 * Element-wise product over a semiring.
 */
ApStatus ap_array_element_mul(const ApArray *a, const ApArray *b, ApSemiring s, ApArray **out);

/**
 * Array product over a semiring.
 */
ApStatus ap_array_matmul(const ApArray *a, const ApArray *b, ApSemiring s, ApArray **out);

ApStatus ap_array_transpose(const ApArray *a, ApArray **out);

/**
 * Explodes a string array: `(r, c, v)` becomes `(r, c<sep>v, 1)`.
 */
ApStatus ap_array_val2col(const ApArray *a, const char *sep, ApArray **out);

/**
 * Inverse of `ap_array_val2col`.
 */
ApStatus ap_array_col2val(const ApArray *a, const char *sep, ApArray **out);

/**
 * Text rendering, one `(row,col)     value` line per entry.
 */
ApStatus ap_array_to_string(const ApArray *a, char **out);

ApStatus ap_array_save(const ApArray *a, const char *path);

ApStatus ap_array_load(const char *path, ApArray **out);

/**
 * Opens (creating if needed) a store directory and its edge tables.
 */
ApStatus ap_store_open(const char *dir, ApStore **out);

/**
 * Flushes every table and releases the store. NULL is ignored.
 */
ApStatus ap_store_close(ApStore *s);

/**
 * Inserts every entry of `a` into `table`. A non-NULL `value_override`
 * replaces every value.
 */
ApStatus ap_store_put_array(const ApStore *s,
                            const char *table,
                            const ApArray *a,
                            const char *value_override);

/**
 * Cells of one row as `row\tcol\tval` lines.
 */
ApStatus ap_store_scan_row(const ApStore *s, const char *table, const char *row, char **out);

/**
 * Packets to or from `ip` as `packet\tcolumn\tvalue` lines; `*packets`
 * receives the number of distinct packets.
 */
ApStatus ap_connections_to(const ApStore *s, const char *ip, char **out, size_t *packets);

/**
 * The `k` highest-degree values of `field` as `value\tdegree` lines.
 */
ApStatus ap_top_k(const ApStore *s, const char *field, size_t k, char **out);

/**
 * Runs all six pipeline stages over `data_dir`. `split_size` 0 selects the
 * default of 5 MiB.
 */
ApStatus ap_pipeline_run(const char *data_dir,
                         const char *work_dir,
                         const char *store_dir,
                         size_t workers,
                         uint64_t split_size);

/**
 * Empty array, for callers that need a starting value.
 */
ApArray *ap_array_new(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ASSOCPIPE_H */
