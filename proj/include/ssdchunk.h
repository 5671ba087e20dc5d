/* SPDX-License-Identifier: Apache-2.0
 *
 * ssdchunk C API.
 *
 * Every fallible call returns an ssd_status; on failure a human-readable
 * message for the calling thread is available from ssd_last_error().
 * Handles are opaque and owned by the caller, who releases them with the
 * matching *_free function. Models and snapshots are immutable after
 * creation and may be shared between threads.
 */
#ifndef SSDCHUNK_H
#define SSDCHUNK_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(SSD_BUILDING_LIBRARY)
#    define SSD_API __declspec(dllexport)
#  else
#    define SSD_API __declspec(dllimport)
#  endif
#else
#  define SSD_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ssd_status {
    SSD_OK = 0,
    SSD_ERR_DIMENSION = 1,
    SSD_ERR_VALIDATION = 2,
    SSD_ERR_INDEX = 3,
    SSD_ERR_CAPACITY = 4,
    SSD_ERR_INTEGRITY = 5,
    SSD_ERR_FORMAT = 6,
    SSD_ERR_IO = 7,
    SSD_ERR_INVALID_ARGUMENT = 8, /* null handle/pointer or output buffer too small */
    SSD_ERR_INTERNAL = 9
} ssd_status;

SSD_API const char* ssd_status_name(ssd_status status);
SSD_API const char* ssd_last_error(void);

typedef struct ssd_model ssd_model;
typedef struct ssd_snapshot ssd_snapshot;

/* ------------------------------------------------------------------------ */
/* Models                                                                   */

typedef struct ssd_model_spec {
    uint64_t seed;
    uint32_t layers;         /* L */
    uint32_t d_model;        /* d */
    uint32_t heads;          /* H */
    uint32_t state_dim;      /* N */
    uint32_t vocab_size;     /* highest id is EOS */
    uint32_t chunk_size;     /* Q */
    uint32_t vertical_chunk; /* V, multiple of Q */
    uint64_t dense_limit;
} ssd_model_spec;

SSD_API void ssd_model_spec_init(ssd_model_spec* spec);
SSD_API ssd_status ssd_model_spec_load(const char* path, ssd_model_spec* spec);

SSD_API ssd_status ssd_model_generate(const ssd_model_spec* spec, ssd_model** out);
SSD_API ssd_status ssd_model_load(const char* path, ssd_model** out);
SSD_API ssd_status ssd_model_save(const ssd_model* model, const char* path);
SSD_API void ssd_model_free(ssd_model* model);
SSD_API ssd_status ssd_model_get_spec(const ssd_model* model, ssd_model_spec* spec);
/* FNV-1a 64 of the little-endian parameter payload. */
SSD_API ssd_status ssd_model_payload_hash(const ssd_model* model, uint64_t* hash);

/* ------------------------------------------------------------------------ */
/* Inference                                                                */

typedef enum ssd_strategy {
    SSD_STRATEGY_RECURRENT = 0,  /* layer-by-layer, recurrent kernel */
    SSD_STRATEGY_DENSE = 1,      /* layer-by-layer, dense dual kernel */
    SSD_STRATEGY_HORIZONTAL = 2, /* layer-by-layer, chunked kernel */
    SSD_STRATEGY_VERTICAL = 3    /* vertical blocks, chunked kernel */
} ssd_strategy;

typedef struct ssd_infer_options {
    ssd_strategy strategy;
    uint32_t chunk_size;     /* 0: model Q */
    uint32_t vertical_chunk; /* 0: model V */
    uint32_t workers;        /* stage-1/3 worker threads, >= 1 */
} ssd_infer_options;

typedef struct ssd_run_stats {
    uint64_t peak_elements;  /* activation peak */
    uint64_t state_elements; /* per-layer states carried by vertical passes */
    uint64_t flops_intra;
    uint64_t flops_propagate;
    uint64_t flops_inter;
    int32_t horizontal_fallback;
} ssd_run_stats;

SSD_API void ssd_infer_options_init(ssd_infer_options* options);

/* Final-layer hidden states for tokens [batch, seq_len]. Horizontal
 * strategies return all seq_len steps; vertical returns the last vertical
 * block only. hidden_out receives [batch, *steps, d] and must hold at least
 * batch * seq_len * d values. stats may be NULL. */
SSD_API ssd_status ssd_infer(const ssd_model* model, const int32_t* tokens, size_t batch, size_t seq_len,
                             const ssd_infer_options* options, double* hidden_out, size_t hidden_capacity,
                             size_t* steps, size_t* offset, ssd_run_stats* stats);

/* Vertical pass that always carries per-layer states. carry_in may be NULL
 * (zero states); *carry_out receives the states after the last token. */
SSD_API ssd_status ssd_vertical_resume(const ssd_model* model, const int32_t* tokens, size_t batch,
                                       size_t seq_len, uint32_t vertical_chunk, const ssd_snapshot* carry_in,
                                       ssd_snapshot** carry_out, double* hidden_out, size_t hidden_capacity,
                                       size_t* steps, size_t* offset);

SSD_API ssd_status ssd_snapshot_save(const ssd_snapshot* snapshot, const char* path);
SSD_API ssd_status ssd_snapshot_load(const char* path, ssd_snapshot** out);
SSD_API void ssd_snapshot_free(ssd_snapshot* snapshot);

/* ------------------------------------------------------------------------ */
/* Embeddings                                                               */

/* Writes "Instruction: {prompt}\nQuery: {query}" plus a NUL terminator.
 * *needed receives the byte length without the terminator. */
SSD_API ssd_status ssd_format_query(const char* prompt, const char* query, char* out, size_t capacity,
                                    size_t* needed);

/* Whitespace-split hashing tokenizer; *count receives the token count even
 * when capacity is too small. */
SSD_API ssd_status ssd_tokenize(const ssd_model* model, const char* text, size_t text_len, int32_t* out,
                                size_t capacity, size_t* count);

/* Appends EOS and writes the d-dimensional final hidden state at EOS. */
SSD_API ssd_status ssd_embed(const ssd_model* model, const int32_t* tokens, size_t count,
                             const ssd_infer_options* options, double* out, size_t capacity);

SSD_API ssd_status ssd_cosine_similarity(const double* lhs, const double* rhs, size_t dim, double* out);

/* negatives: [count, dim] row-major. */
SSD_API ssd_status ssd_info_nce(const double* query, const double* positive, const double* negatives,
                                size_t count, size_t dim, double temperature, double* loss);

/* ------------------------------------------------------------------------ */
/* Harness                                                                  */

typedef void (*ssd_line_fn)(const char* line, void* user);

typedef struct ssd_size_grid {
    const uint64_t* values;
    size_t count; /* 0: built-in default grid */
} ssd_size_grid;

typedef enum ssd_fault {
    SSD_FAULT_NONE = 0,
    SSD_FAULT_INTRA_MASK = 1,      /* stage-1 output without kernel mask */
    SSD_FAULT_ROW_SELECTOR = 2,    /* stage-1 boundary state without row weights */
    SSD_FAULT_TRANSITION = 3,      /* stage-2 without chunk transition */
    SSD_FAULT_INTER_CORRECTION = 4 /* stage-3 skipped */
} ssd_fault;

/* Accepts none, intra-mask, row-selector, transition, inter-correction. */
SSD_API ssd_status ssd_fault_from_name(const char* name, ssd_fault* fault);

typedef struct ssd_equivalence_config {
    uint64_t seed;
    uint32_t instances;
    ssd_size_grid seq_lens;
    ssd_size_grid chunk_sizes;
    ssd_size_grid vertical_chunks;
    double tolerance;
    ssd_fault fault;
    uint32_t workers;
} ssd_equivalence_config;

typedef struct ssd_equivalence_summary {
    uint32_t checks;
    uint32_t failed_checks;
    uint32_t instances;
    uint32_t failed_instances;
    uint32_t multi_chunk_instances;
    uint32_t failed_multi_chunk_instances;
    double max_rel_error;
} ssd_equivalence_summary;

SSD_API void ssd_equivalence_config_init(ssd_equivalence_config* config);
/* Emits one line per check through `emit` (may be NULL). Returns SSD_OK even
 * when checks fail; inspect summary->failed_checks. */
SSD_API ssd_status ssd_run_equivalence(const ssd_equivalence_config* config, ssd_line_fn emit, void* user,
                                       ssd_equivalence_summary* summary);

#define SSD_STRATEGY_BIT(s) (1u << (unsigned)(s))

typedef struct ssd_sweep_config {
    ssd_size_grid seq_lens;
    ssd_size_grid batches;
    ssd_size_grid chunk_sizes;
    ssd_size_grid vertical_chunks; /* empty: {Q, 2Q, 4Q} for each Q */
    uint32_t strategy_mask;        /* SSD_STRATEGY_BIT(...) flags; 0: all */
    uint32_t reps;
    uint32_t warmup;
    int32_t parallel;
    uint64_t token_seed;
} ssd_sweep_config;

SSD_API void ssd_sweep_config_init(ssd_sweep_config* config);
/* Writes the CSV to csv_path; skipped cells are reported through `log`. */
SSD_API ssd_status ssd_run_sweep(const ssd_model* model, const ssd_sweep_config* config, const char* csv_path,
                                 ssd_line_fn log, void* user, size_t* rows);
/* Parses a sweep CSV and checks that re-serializing it reproduces the file. */
SSD_API ssd_status ssd_sweep_csv_validate(const char* csv_path, size_t* rows);
/* Per-cell mean/min/max summary of a sweep CSV, one line per call of `emit`. */
SSD_API ssd_status ssd_report(const char* csv_path, ssd_line_fn emit, void* user);

#ifdef __cplusplus
}
#endif

#endif /* SSDCHUNK_H */
