#ifndef MINIDPSNN_H
#define MINIDPSNN_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum DpsnnStatus {
  DPSNN_STATUS_OK = 0,
  DPSNN_STATUS_NULL_POINTER = 1,
  // Bad argument value or string encoding.
  DPSNN_STATUS_INVALID_ARGUMENT = 2,
  DPSNN_STATUS_CONFIG = 3,
  DPSNN_STATUS_IO = 4,
  // Network construction or the run itself failed.
  DPSNN_STATUS_SIMULATION = 5,
  DPSNN_STATUS_PACKET = 6,
  DPSNN_STATUS_ENERGY = 7,
  DPSNN_STATUS_SERIALIZATION = 8,
  DPSNN_STATUS_BUFFER_TOO_SMALL = 9,
  DPSNN_STATUS_PANIC = 10,
} DpsnnStatus;

// Run configuration handle.
typedef struct DpsnnConfig DpsnnConfig;

// Run report handle.
typedef struct DpsnnReport DpsnnReport;

// Headline figures of a report, by value.
typedef struct DpsnnSummary {
  uint32_t n_neurons;
  uint32_t n_ranks;
  uint32_t steps;
  uint64_t spike_count;
  uint64_t synaptic_events;
  uint64_t delivered_events;
  double simulated_seconds;
  double wall_seconds;
  double mean_rate_hz;
  double realtime_ratio;
  // 1 when wall time did not exceed simulated time.
  uint8_t realtime_pass;
  uint64_t packets;
  uint64_t payload_bytes;
  double mean_packet_bytes;
  uint64_t max_packet_bytes;
  double packets_per_rank;
  double payload_bytes_per_rank;
  double computation_fraction;
  double memory_fraction;
  double communication_fraction;
  double synchronization_fraction;
  uint64_t raster_hash;
  // 1 when energy figures are attached; the two fields below are 0 otherwise.
  uint8_t has_energy;
  double joules;
  double microjoules_per_event;
} DpsnnSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Description of the failure of the most recent call on this thread, or
// NULL if it succeeded. Valid until the next library call on the thread.
const char *dpsnn_last_error_message(void);

// Library version as a static string.
const char *dpsnn_version(void);

// Frees a string returned by this library. NULL is ignored.
void dpsnn_string_free(char *s);

// Default configuration: 4x4 grid of 1250-neuron columns on one rank.
enum DpsnnStatus dpsnn_config_new(struct DpsnnConfig **out);

// The 10k-neuron, 3 s network used for energy-to-solution runs.
enum DpsnnStatus dpsnn_config_energy_benchmark(struct DpsnnConfig **out);

// Reads a sectioned `key = value` config file.
enum DpsnnStatus dpsnn_config_load(const char *path, struct DpsnnConfig **out);

// Parses config text in the same format as [`dpsnn_config_load`].
enum DpsnnStatus dpsnn_config_parse(const char *text, struct DpsnnConfig **out);

// Sets one key, e.g. `("run", "ranks", "4")` or `("grid", "size", "8x8")`.
// The config is left unchanged on failure.
enum DpsnnStatus dpsnn_config_set(struct DpsnnConfig *config,
                                  const char *section,
                                  const char *key,
                                  const char *value);

// The config in file form; free with [`dpsnn_string_free`].
enum DpsnnStatus dpsnn_config_to_ini(const struct DpsnnConfig *config, char **out);

void dpsnn_config_free(struct DpsnnConfig *config);

// Builds the network and runs it to completion.
enum DpsnnStatus dpsnn_run(const struct DpsnnConfig *config, struct DpsnnReport **out);

void dpsnn_report_free(struct DpsnnReport *report);

enum DpsnnStatus dpsnn_report_summary(const struct DpsnnReport *report, struct DpsnnSummary *out);

// The full report as JSON (the `run` schema of the command-line tool);
// free with [`dpsnn_string_free`].
enum DpsnnStatus dpsnn_report_to_json(const struct DpsnnReport *report, char **out);

// Reads a single-run JSON report.
enum DpsnnStatus dpsnn_report_from_json(const char *json, struct DpsnnReport **out);

// Attaches energy figures from `n` power samples (seconds, watts) covering
// the whole run, net of `baseline_watts`.
enum DpsnnStatus dpsnn_report_attach_energy(struct DpsnnReport *report,
                                            const double *t,
                                            const double *watts,
                                            size_t n,
                                            double baseline_watts);

// Joules over `[t0, t1]` of a piecewise-linear power trace.
enum DpsnnStatus dpsnn_integrate_energy(const double *t,
                                        const double *watts,
                                        size_t n,
                                        double t0,
                                        double t1,
                                        double *out_joules);

enum DpsnnStatus dpsnn_per_event_energy(double joules, uint64_t events, double *out_microjoules);

// Encodes one packet of `n` spikes (`sources[i]` fired at `steps[i]`,
// sorted by source) into `buf`. `n` must not exceed 63; the encoded length
// is stored in `out_len` (also when `buf` is too small).
enum DpsnnStatus dpsnn_packet_encode(uint32_t step,
                                     uint8_t hop,
                                     const uint32_t *sources,
                                     const uint32_t *steps,
                                     size_t n,
                                     uint8_t *buf,
                                     size_t cap,
                                     size_t *out_len);

// Decodes a packet. Spikes go to `sources`/`steps` (room for `cap`); their
// count is stored in `out_n`, also when the arrays are too small.
enum DpsnnStatus dpsnn_packet_decode(const uint8_t *buf,
                                     size_t len,
                                     uint32_t *out_step,
                                     uint8_t *out_hop,
                                     uint32_t *sources,
                                     uint32_t *steps,
                                     size_t cap,
                                     size_t *out_n);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MINIDPSNN_H */
