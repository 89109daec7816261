#ifndef SEQCAL_H
#define SEQCAL_H

/* C interface to the sequential calibration engine. All functions return a
 * status code; on failure, seqcal_last_error() describes the most recent
 * error on the calling thread. */

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum {
    SEQCAL_OK = 0,
    SEQCAL_ERR_INVALID_ARGUMENT = 1,
    SEQCAL_ERR_INVALID_SPEC = 2,
    SEQCAL_ERR_SINGULAR = 3,
    SEQCAL_ERR_SIMULATOR = 4,
    SEQCAL_ERR_PARTIAL = 5, /* some runs failed; completed rows were written */
    SEQCAL_ERR_IO = 6,
    SEQCAL_ERR_INTERNAL = 7
} seqcal_status;

/* Message for the last failing call on this thread; never NULL. */
const char* seqcal_last_error(void);

/* Parses the experiment spec file, runs all (replicate, method) combinations
 * and writes results.csv / acquired.csv / status.csv / summary.json into the
 * spec's output directory. out_dir_override (may be NULL) replaces the
 * spec's 'out' entry; workers_override > 0 replaces the worker count. */
seqcal_status seqcal_run_spec_file(const char* spec_path,
                                   const char* out_dir_override,
                                   int workers_override);

/* Reads a results directory and writes the report tables next to it. */
seqcal_status seqcal_report(const char* results_dir);

/* One synthetic-simulator evaluation. z holds the q design coordinates
 * followed by the p parameters, all in scaled [0,1] units. */
seqcal_status seqcal_simulate(const char* testbed, const double* z, size_t len,
                              double* out_value);

/* Dimensions of a named testbed. */
seqcal_status seqcal_testbed_dims(const char* testbed, int* q, int* p);

/* Gaussian-process emulator over joint (design, parameter) inputs. */
typedef struct seqcal_emulator seqcal_emulator;

/* inputs: n rows of (q+p) doubles, row-major. */
seqcal_status seqcal_emulator_fit(int q, int p, const double* inputs,
                                  const double* outputs, size_t n,
                                  uint64_t seed, seqcal_emulator** out);

seqcal_status seqcal_emulator_predict(const seqcal_emulator* e, const double* z,
                                      size_t len, double* mean, double* var);

void seqcal_emulator_free(seqcal_emulator* e);

#ifdef __cplusplus
}
#endif

#endif
