#ifndef COEXSIM_H
#define COEXSIM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Node classes for [`coex_metrics_class`].
 */
typedef enum CoexNodeClass {
  COEX_NODE_CLASS_UE = 0,
  COEX_NODE_CLASS_ENB = 1,
  COEX_NODE_CLASS_WIFI_STA = 2,
  COEX_NODE_CLASS_WIFI_AP = 3,
} CoexNodeClass;

/**
 * Result code of every call.
 */
typedef enum CoexStatus {
  COEX_STATUS_OK = 0,
  COEX_STATUS_NULL_POINTER = 1,
  COEX_STATUS_INVALID_ARGUMENT = 2,
  COEX_STATUS_NOT_CONVERGED = 3,
  COEX_STATUS_CONFIG_ERROR = 4,
  COEX_STATUS_BUFFER_TOO_SMALL = 5,
  COEX_STATUS_PANIC = 6,
} CoexStatus;

/**
 * Opaque run result.
 */
typedef struct CoexMetrics CoexMetrics;

/**
 * Opaque analytic model parameters.
 */
typedef struct CoexModel CoexModel;

/**
 * Opaque scenario configuration.
 */
typedef struct CoexScenario CoexScenario;

/**
 * Fixed point of the access model.
 */
typedef struct CoexFixedPoint {
  double p_tx_wifi;
  double p_tx_cat4;
  double p_b;
  double residual;
  uint32_t iterations;
  bool converged;
  /**
   * Scheduled-uplink access probability at this point.
   */
  double access_sul;
} CoexFixedPoint;

/**
 * UCI fields. `full` selects the 52-bit format; `a_csi` and
 * `harq_ack_bitmap` are ignored for the compact one.
 */
typedef struct CoexUci {
  uint16_t c_rnti;
  uint8_t harq_process;
  bool ndi;
  uint8_t burst_len_sf;
  uint8_t carrier_idx;
  bool full;
  uint8_t a_csi;
  uint16_t harq_ack_bitmap;
} CoexUci;

/**
 * Per-class access statistics.
 */
typedef struct CoexClassStats {
  uint64_t access_attempts;
  uint64_t access_successes;
  uint64_t collisions;
  uint64_t wasted_grants;
  uint64_t units_sent;
  uint64_t units_collided;
} CoexClassStats;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *coex_last_error(void);

/**
 * Release a string returned by this library.
 *
 * # Safety
 * `s` must be null or a pointer obtained from this library that has not
 * been freed yet.
 */
void coex_string_free(char *s);

/**
 * P(Y > t) on an idle channel with `mu` time-bandwidth product.
 *
 * # Safety
 * `out` must be null or valid for one `double` write.
 */
enum CoexStatus coex_tail_idle(double t, uint32_t mu, double *out);

/**
 * P(Y > t) with aggregate SNR `gamma`.
 *
 * # Safety
 * `out` must be null or valid for one `double` write.
 */
enum CoexStatus coex_tail_busy(double t, uint32_t mu, double gamma, double *out);

/**
 * WiFi transmit probability.
 *
 * # Safety
 * `out` must be null or valid for one `double` write.
 */
enum CoexStatus coex_p_tx_wifi(double q,
                               uint32_t w0,
                               uint32_t m,
                               double p_b,
                               double p_f,
                               double *out);

/**
 * Cat.4 transmit probability.
 *
 * # Safety
 * `out` must be null or valid for one `double` write.
 */
enum CoexStatus coex_p_tx_cat4(double q,
                               uint32_t w0,
                               uint32_t m,
                               double p_b,
                               double p_f,
                               double *out);

/**
 * Model with default parameters. Free with [`coex_model_free`].
 */
struct CoexModel *coex_model_new(void);

/**
 * Model from the `[model]` section of a TOML document.
 *
 * # Safety
 * `toml` must be null or a nul-terminated string; `out` must be null or
 * valid for one pointer write.
 */
enum CoexStatus coex_model_from_toml(const char *toml, struct CoexModel **out);

/**
 * # Safety
 * `model` must be null or a handle from this library not yet freed.
 */
void coex_model_free(struct CoexModel *model);

/**
 * Set the per-slot arrival probability.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
enum CoexStatus coex_model_set_q(struct CoexModel *model, double q);

/**
 * Set the uplink mode: 0 scheduled, 1 grant-less.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
enum CoexStatus coex_model_set_grantless(struct CoexModel *model, bool grantless);

/**
 * Solve the fixed point. On `NotConverged` the last iterate is written.
 *
 * # Safety
 * `model` must be null or a live handle; `out` must be null or valid for
 * one `CoexFixedPoint` write.
 */
enum CoexStatus coex_model_solve(const struct CoexModel *model, struct CoexFixedPoint *out);

/**
 * Encode into `bits` (one byte per bit, 0 or 1, MSB first).
 *
 * # Safety
 * `uci` must be null or valid for reads; `bits` must be null or valid for
 * `cap` byte writes; `len` must be null or valid for one write.
 */
enum CoexStatus coex_uci_encode(const struct CoexUci *uci, uint8_t *bits, size_t cap, size_t *len);

/**
 * Decode `len` bits; the format follows from the length.
 *
 * # Safety
 * `bits` must be null or valid for `len` byte reads; `out` must be null or
 * valid for one write.
 */
enum CoexStatus coex_uci_decode(const uint8_t *bits, size_t len, struct CoexUci *out);

/**
 * Scenario from the `[scenario]` section of a TOML document; an empty
 * string gives the defaults.
 *
 * # Safety
 * `toml` must be null or a nul-terminated string; `out` must be null or
 * valid for one pointer write.
 */
enum CoexStatus coex_scenario_from_toml(const char *toml, struct CoexScenario **out);

/**
 * # Safety
 * `scenario` must be null or a handle from this library not yet freed.
 */
void coex_scenario_free(struct CoexScenario *scenario);

/**
 * # Safety
 * `scenario` must be null or a live handle.
 */
enum CoexStatus coex_scenario_set_seed(struct CoexScenario *scenario, uint64_t seed);

/**
 * Run the scenario. Free the result with [`coex_metrics_free`].
 *
 * # Safety
 * `scenario` must be null or a live handle; `out` must be null or valid
 * for one pointer write.
 */
enum CoexStatus coex_scenario_run(const struct CoexScenario *scenario, struct CoexMetrics **out);

/**
 * # Safety
 * `metrics` must be null or a handle from this library not yet freed.
 */
void coex_metrics_free(struct CoexMetrics *metrics);

/**
 * # Safety
 * `metrics` must be null or a live handle; `out` must be null or valid
 * for one write.
 */
enum CoexStatus coex_metrics_class(const struct CoexMetrics *metrics,
                                   enum CoexNodeClass class_,
                                   struct CoexClassStats *out);

/**
 * Mean UPT in Mbps of (technology, direction); NaN when no file completed.
 * `wifi` selects the technology, `uplink` the direction.
 *
 * # Safety
 * `metrics` must be null or a live handle; `out` must be null or valid
 * for one write.
 */
enum CoexStatus coex_metrics_upt(const struct CoexMetrics *metrics,
                                 bool wifi,
                                 bool uplink,
                                 double *out);

/**
 * Metrics CSV as a new string; free with [`coex_string_free`].
 *
 * # Safety
 * `metrics` must be null or a live handle; `out` must be null or valid
 * for one pointer write.
 */
enum CoexStatus coex_metrics_csv(const struct CoexMetrics *metrics, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* COEXSIM_H */
