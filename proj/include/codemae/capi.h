/* Copyright (c) 2026 The codemae authors.
 * SPDX-License-Identifier: Apache-2.0
 *
 * C surface of the codemae library. All functionality is reachable through
 * these entry points; handles are opaque and every call reports status via
 * an integer code. codemae_last_error() returns a thread-local message for
 * the most recent failure on the calling thread.
 */

#ifndef CODEMAE_CAPI_H
#define CODEMAE_CAPI_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes (also the CLI exit codes). */
#define CODEMAE_OK 0
#define CODEMAE_ERR_USAGE 1   /* bad arguments, bad config, contract misuse */
#define CODEMAE_ERR_NUMERIC 2 /* NaN/Inf abort, shape error, failed check */
#define CODEMAE_ERR_IO 3      /* unreadable/unwritable files */

const char* codemae_version(void);

/* Message for the last failing call on this thread ("" if none). */
const char* codemae_last_error(void);

/* ---- config handle: flat key=value with typed validation ---- */

typedef struct codemae_config codemae_config;

int codemae_config_create(codemae_config** out);
int codemae_config_load(const char* path, codemae_config** out);
int codemae_config_set(codemae_config* config, const char* key,
                       const char* value);
void codemae_config_free(codemae_config* config);

/* ---- commands ---- */

/* Synthetic paired optical/SAR dataset: PNGs, TSV manifest, stats table. */
int codemae_gen_data(const char* out_dir, size_t scenes, size_t size,
                     uint64_t seed, double unpaired_fraction);

/* Full pretraining run; writes checkpoints and a per-step metrics CSV. */
int codemae_pretrain(codemae_config* config, const char* out_dir);

/* which: "spectrum" | "curve" | "alignment" | "pca". data_dir NULL or ""
 * evaluates on a synthetic set derived from seed. */
int codemae_diagnose(const char* checkpoint, const char* data_dir,
                     const char* out_dir, const char* which, uint64_t seed,
                     size_t samples);

/* Linear probing on frozen embeddings; per-seed and mean accuracy CSV. */
int codemae_probe(const char* checkpoint, const char* data_dir,
                  const char* out_dir, size_t seed_count, uint64_t seed,
                  size_t samples);

/* component: "all" | "losses" | "layers". Writes a per-op report (stdout
 * when report_path is NULL or ""); CODEMAE_OK iff every check passes. */
int codemae_gradcheck(const char* component, const char* report_path);

#ifdef __cplusplus
}
#endif

#endif /* CODEMAE_CAPI_H */
