#ifndef TOPO3D_H
#define TOPO3D_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes. Every call returns one; the message of the last failure on
   the calling thread is available from topo3d_last_error(). */
enum {
  TOPO3D_OK = 0,
  TOPO3D_E_INVALID_ARGUMENT = 1,
  TOPO3D_E_NOT_CONVERGED = 2,
  TOPO3D_E_IO = 3,
  TOPO3D_E_BAD_MAGIC = 4,
  TOPO3D_E_TRUNCATED = 5,
  TOPO3D_E_VERSION_MISMATCH = 6,
  TOPO3D_E_INVALID_CONFIG = 7,
  TOPO3D_E_SHAPE_MISMATCH = 8,
  TOPO3D_E_NON_FINITE = 9,
  TOPO3D_E_INTERNAL = 10,
  TOPO3D_E_UNKNOWN_COMMAND = 11
};

typedef struct topo3d_config topo3d_config;
typedef struct topo3d_job topo3d_job;
typedef struct topo3d_trace topo3d_trace;

const char* topo3d_version(void);
const char* topo3d_last_error(void);
const char* topo3d_status_name(int status);

/* Run configuration. */
int topo3d_config_default(topo3d_config** out);
int topo3d_config_load(const char* path, topo3d_config** out);
int topo3d_config_parse(const char* json_text, topo3d_config** out);
/* Flag-style overrides: seed, threads, channels, strategy, tau, gap, threshold. */
int topo3d_config_set(topo3d_config* config, const char* key, const char* value);
/* Copies the JSON echo into buf (NUL-terminated); *needed gets the full size. */
int topo3d_config_dump(const topo3d_config* config, char* buf, size_t cap, size_t* needed);
void topo3d_config_free(topo3d_config* config);

/* Per-invocation inputs: input, model, m, n, strategies, timing. */
int topo3d_job_create(topo3d_job** out);
int topo3d_job_set(topo3d_job* job, const char* key, const char* value);
void topo3d_job_free(topo3d_job* job);

int topo3d_is_command(const char* command);
int topo3d_run(const topo3d_config* config, const char* command, const char* out_dir,
               const topo3d_job* job);

/* Direct access to one SIMP run, for embedding. */
int topo3d_solve_sampled(const topo3d_config* config, uint64_t seed, topo3d_trace** out);
int topo3d_trace_load(const char* dir, topo3d_trace** out);
size_t topo3d_trace_iterations(const topo3d_trace* trace); /* T */
size_t topo3d_trace_voxels(const topo3d_trace* trace);
int topo3d_trace_converged(const topo3d_trace* trace);
/* Copies iterate t (0..T) as doubles into out[voxels]. */
int topo3d_trace_density(const topo3d_trace* trace, size_t t, double* out, size_t len);
int topo3d_trace_compliance(const topo3d_trace* trace, size_t t, double* out);
int topo3d_trace_cutoff(const topo3d_trace* trace, double tau, size_t* iteration, int* reached);
void topo3d_trace_free(topo3d_trace* trace);

#ifdef __cplusplus
}
#endif

#endif
