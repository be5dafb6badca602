#ifndef EHLORA_H
#define EHLORA_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every fallible function.
typedef enum EhlStatus {
  EHL_STATUS_OK = 0,
  EHL_STATUS_NULL_POINTER = 1,
  EHL_STATUS_INVALID_UTF8 = 2,
  // Unknown key, malformed value or inconsistent scenario.
  EHL_STATUS_CONFIG = 3,
  // A numeric argument outside the model's domain.
  EHL_STATUS_DOMAIN = 4,
  EHL_STATUS_TRACE = 5,
  EHL_STATUS_IO = 6,
  // The simulation itself detected an invariant violation.
  EHL_STATUS_SIMULATION = 7,
  // The caller's buffer cannot hold the result; the required size is
  // still written to `out_len`.
  EHL_STATUS_BUFFER_TOO_SMALL = 8,
  EHL_STATUS_PANIC = 9,
} EhlStatus;

// Opaque result of one simulation run.
typedef struct EhlReport EhlReport;

// Opaque scenario configuration.
typedef struct EhlScenario EhlScenario;

// Summary metrics of a run. Inter-transmission statistics are NaN when
// fewer than two packets were sent.
typedef struct EhlMetrics {
  uint64_t packets_sent;
  uint64_t p_max;
  double efficiency_pct;
  double on_fraction;
  double off_fraction;
  double charging_fraction;
  double mean_inter_tx_s;
  double stddev_inter_tx_s;
} EhlMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Returns the library version as a static NUL-terminated string.
const char *ehl_version(void);

// Copies the last error message of the calling thread into `buf`.
// Pass a null `buf` with `cap` 0 to query the length.
enum EhlStatus ehl_last_error_message(char *buf, size_t cap, size_t *out_len);

// Creates a scenario with default settings. Never returns null.
struct EhlScenario *ehl_scenario_new(void);

void ehl_scenario_free(struct EhlScenario *scenario);

// Sets one configuration key, using the same keys and value syntax as the
// command-line `--set KEY=VALUE` option.
enum EhlStatus ehl_scenario_set(struct EhlScenario *scenario, const char *key, const char *value);

// Reads back a configuration key as text.
enum EhlStatus ehl_scenario_get(const struct EhlScenario *scenario,
                                const char *key,
                                char *buf,
                                size_t cap,
                                size_t *out_len);

// Runs the scenario. On success `*out` owns a report that must be released
// with [`ehl_report_free`]; on failure it is set to null.
enum EhlStatus ehl_scenario_run(const struct EhlScenario *scenario, struct EhlReport **out);

void ehl_report_free(struct EhlReport *report);

enum EhlStatus ehl_report_metrics(const struct EhlReport *report, struct EhlMetrics *out);

// Copies the tab-separated event log, header included, into `buf`.
enum EhlStatus ehl_report_event_log(const struct EhlReport *report,
                                    char *buf,
                                    size_t cap,
                                    size_t *out_len);

// Time on air in seconds of an uplink with `payload` application bytes at
// the given spreading factor, 125 kHz and coding rate 4/5.
enum EhlStatus ehl_time_on_air(uint8_t spreading_factor, size_t payload, double *out_s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EHLORA_H */
