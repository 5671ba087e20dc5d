// SPDX-License-Identifier: Apache-2.0

#include "ssdchunk.h"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <exception>
#include <fstream>
#include <new>
#include <sstream>
#include <string>
#include <vector>

#include "ssdchunk/bench.hpp"
#include "ssdchunk/embedding.hpp"
#include "ssdchunk/errors.hpp"
#include "ssdchunk/model_io.hpp"

struct ssd_model {
    ssdchunk::StackedModel model;
};

struct ssd_snapshot {
    ssdchunk::StateSnapshot snapshot;
};

namespace {

using namespace ssdchunk;

thread_local std::string g_last_error;

struct InvalidArgument {
    std::string message;
};

ssd_status status_of(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Dimension: return SSD_ERR_DIMENSION;
        case ErrorKind::Validation: return SSD_ERR_VALIDATION;
        case ErrorKind::Index: return SSD_ERR_INDEX;
        case ErrorKind::Capacity: return SSD_ERR_CAPACITY;
        case ErrorKind::Integrity: return SSD_ERR_INTEGRITY;
        case ErrorKind::Format: return SSD_ERR_FORMAT;
        case ErrorKind::Io: return SSD_ERR_IO;
    }
    return SSD_ERR_INTERNAL;
}

template <class Fn>
ssd_status guarded(Fn&& fn) noexcept {
    try {
        g_last_error.clear();
        fn();
        return SSD_OK;
    } catch (const InvalidArgument& e) {
        g_last_error = e.message;
        return SSD_ERR_INVALID_ARGUMENT;
    } catch (const Error& e) {
        g_last_error = e.what();
        return status_of(e.kind());
    } catch (const std::bad_alloc&) {
        g_last_error = "out of memory";
        return SSD_ERR_CAPACITY;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return SSD_ERR_INTERNAL;
    } catch (...) {
        g_last_error = "unknown error";
        return SSD_ERR_INTERNAL;
    }
}

void need(const void* ptr, const char* what) {
    if (ptr == nullptr) throw InvalidArgument{std::string(what) + " must not be null"};
}

ModelSpec from_c(const ssd_model_spec& c) {
    ModelSpec spec;
    spec.seed = c.seed;
    spec.layers = c.layers;
    spec.d_model = c.d_model;
    spec.heads = c.heads;
    spec.state_dim = c.state_dim;
    spec.vocab_size = c.vocab_size;
    spec.chunk_size = c.chunk_size;
    spec.vertical_chunk = c.vertical_chunk;
    spec.dense_limit = static_cast<std::size_t>(c.dense_limit);
    return spec;
}

void to_c(const ModelSpec& spec, ssd_model_spec* out) {
    out->seed = spec.seed;
    out->layers = static_cast<std::uint32_t>(spec.layers);
    out->d_model = static_cast<std::uint32_t>(spec.d_model);
    out->heads = static_cast<std::uint32_t>(spec.heads);
    out->state_dim = static_cast<std::uint32_t>(spec.state_dim);
    out->vocab_size = static_cast<std::uint32_t>(spec.vocab_size);
    out->chunk_size = static_cast<std::uint32_t>(spec.chunk_size);
    out->vertical_chunk = static_cast<std::uint32_t>(spec.vertical_chunk);
    out->dense_limit = spec.dense_limit;
}

std::vector<std::size_t> grid(const ssd_size_grid& g, std::vector<std::size_t> fallback) {
    if (g.count == 0) return fallback;
    need(g.values, "grid values");
    return {g.values, g.values + g.count};
}

FaultMode fault_of(ssd_fault fault) {
    switch (fault) {
        case SSD_FAULT_NONE: return FaultMode::None;
        case SSD_FAULT_INTRA_MASK: return FaultMode::IntraMask;
        case SSD_FAULT_ROW_SELECTOR: return FaultMode::RowSelector;
        case SSD_FAULT_TRANSITION: return FaultMode::Transition;
        case SSD_FAULT_INTER_CORRECTION: return FaultMode::InterCorrection;
    }
    throw InvalidArgument{"unknown fault mode"};
}

TokenBatch token_batch(const int32_t* tokens, size_t batch, size_t seq_len) {
    if (batch * seq_len > 0) need(tokens, "tokens");
    return TokenBatch{batch, seq_len, std::vector<std::int32_t>(tokens, tokens + batch * seq_len)};
}

void copy_hidden(const InferenceResult& result, double* out, size_t capacity, size_t* steps, size_t* offset) {
    const auto& values = result.hidden.values();
    if (values.size() > capacity) throw InvalidArgument{"hidden output buffer too small"};
    if (!values.empty()) need(out, "hidden_out");
    std::copy(values.begin(), values.end(), out);
    if (steps) *steps = result.hidden.seq_len();
    if (offset) *offset = result.offset;
}

InferenceOptions inference_options(const ssd_infer_options& o) {
    InferenceOptions options;
    options.kernel = o.strategy == SSD_STRATEGY_RECURRENT ? Kernel::Recurrent
                     : o.strategy == SSD_STRATEGY_DENSE   ? Kernel::Dense
                                                          : Kernel::Chunked;
    options.chunk_size = o.chunk_size;
    options.workers = std::max<std::uint32_t>(1, o.workers);
    return options;
}

std::size_t vertical_of(const ssd_model* model, uint32_t requested) {
    return requested != 0 ? requested : model->model.spec.vertical_chunk;
}

}  // namespace

extern "C" {

const char* ssd_status_name(ssd_status status) {
    switch (status) {
        case SSD_OK: return "ok";
        case SSD_ERR_DIMENSION: return "dimension error";
        case SSD_ERR_VALIDATION: return "validation error";
        case SSD_ERR_INDEX: return "index error";
        case SSD_ERR_CAPACITY: return "capacity error";
        case SSD_ERR_INTEGRITY: return "integrity error";
        case SSD_ERR_FORMAT: return "format error";
        case SSD_ERR_IO: return "io error";
        case SSD_ERR_INVALID_ARGUMENT: return "invalid argument";
        case SSD_ERR_INTERNAL: return "internal error";
    }
    return "unknown status";
}

const char* ssd_last_error(void) { return g_last_error.c_str(); }

void ssd_model_spec_init(ssd_model_spec* spec) {
    if (spec) to_c(ModelSpec{}, spec);
}

ssd_status ssd_model_spec_load(const char* path, ssd_model_spec* spec) {
    return guarded([&] {
        need(path, "path");
        need(spec, "spec");
        to_c(load_spec(path), spec);
    });
}

ssd_status ssd_model_generate(const ssd_model_spec* spec, ssd_model** out) {
    return guarded([&] {
        need(spec, "spec");
        need(out, "out");
        *out = new ssd_model{generate_model(from_c(*spec))};
    });
}

ssd_status ssd_model_load(const char* path, ssd_model** out) {
    return guarded([&] {
        need(path, "path");
        need(out, "out");
        *out = new ssd_model{load_model(path)};
    });
}

ssd_status ssd_model_save(const ssd_model* model, const char* path) {
    return guarded([&] {
        need(model, "model");
        need(path, "path");
        save_model(model->model, path);
    });
}

void ssd_model_free(ssd_model* model) { delete model; }

ssd_status ssd_model_get_spec(const ssd_model* model, ssd_model_spec* spec) {
    return guarded([&] {
        need(model, "model");
        need(spec, "spec");
        to_c(model->model.spec, spec);
    });
}

ssd_status ssd_model_payload_hash(const ssd_model* model, uint64_t* hash) {
    return guarded([&] {
        need(model, "model");
        need(hash, "hash");
        *hash = payload_hash(model->model);
    });
}

void ssd_infer_options_init(ssd_infer_options* options) {
    if (options) *options = ssd_infer_options{SSD_STRATEGY_HORIZONTAL, 0, 0, 1};
}

ssd_status ssd_infer(const ssd_model* model, const int32_t* tokens, size_t batch, size_t seq_len,
                     const ssd_infer_options* options, double* hidden_out, size_t hidden_capacity, size_t* steps,
                     size_t* offset, ssd_run_stats* stats) {
    return guarded([&] {
        need(model, "model");
        need(options, "options");
        const auto input = token_batch(tokens, batch, seq_len);
        const auto inference = inference_options(*options);
        const auto result = options->strategy == SSD_STRATEGY_VERTICAL
                                ? vertical_infer(model->model, input, vertical_of(model, options->vertical_chunk),
                                                 inference)
                                : horizontal_infer(model->model, input, inference);
        copy_hidden(result, hidden_out, hidden_capacity, steps, offset);
        if (stats) {
            stats->peak_elements = result.ledger.peak_elements();
            stats->state_elements = result.ledger.per_layer_state_elements();
            stats->flops_intra = result.flops.intra;
            stats->flops_propagate = result.flops.propagate;
            stats->flops_inter = result.flops.inter;
            stats->horizontal_fallback = result.horizontal_fallback ? 1 : 0;
        }
    });
}

ssd_status ssd_vertical_resume(const ssd_model* model, const int32_t* tokens, size_t batch, size_t seq_len,
                               uint32_t vertical_chunk, const ssd_snapshot* carry_in, ssd_snapshot** carry_out,
                               double* hidden_out, size_t hidden_capacity, size_t* steps, size_t* offset) {
    return guarded([&] {
        need(model, "model");
        need(carry_out, "carry_out");
        const auto input = token_batch(tokens, batch, seq_len);
        auto result = vertical_resume(model->model, input, vertical_of(model, vertical_chunk),
                                      carry_in ? &carry_in->snapshot : nullptr);
        copy_hidden(result, hidden_out, hidden_capacity, steps, offset);
        *carry_out = new ssd_snapshot{std::move(result.carry)};
    });
}

ssd_status ssd_snapshot_save(const ssd_snapshot* snapshot, const char* path) {
    return guarded([&] {
        need(snapshot, "snapshot");
        need(path, "path");
        save_snapshot(snapshot->snapshot, path);
    });
}

ssd_status ssd_snapshot_load(const char* path, ssd_snapshot** out) {
    return guarded([&] {
        need(path, "path");
        need(out, "out");
        *out = new ssd_snapshot{load_snapshot(path)};
    });
}

void ssd_snapshot_free(ssd_snapshot* snapshot) { delete snapshot; }

ssd_status ssd_format_query(const char* prompt, const char* query, char* out, size_t capacity, size_t* needed) {
    return guarded([&] {
        need(prompt, "prompt");
        need(query, "query");
        const auto text = format_query(prompt, query);
        if (needed) *needed = text.size();
        if (text.size() + 1 > capacity) throw InvalidArgument{"output buffer too small"};
        need(out, "out");
        std::memcpy(out, text.c_str(), text.size() + 1);
    });
}

ssd_status ssd_tokenize(const ssd_model* model, const char* text, size_t text_len, int32_t* out, size_t capacity,
                        size_t* count) {
    return guarded([&] {
        need(model, "model");
        if (text_len > 0) need(text, "text");
        const auto ids = hash_tokenize(std::string_view(text ? text : "", text_len), model->model.spec.vocab_size);
        if (count) *count = ids.size();
        if (ids.size() > capacity) throw InvalidArgument{"token buffer too small"};
        if (!ids.empty()) need(out, "out");
        std::copy(ids.begin(), ids.end(), out);
    });
}

ssd_status ssd_embed(const ssd_model* model, const int32_t* tokens, size_t count, const ssd_infer_options* options,
                     double* out, size_t capacity) {
    return guarded([&] {
        need(model, "model");
        need(options, "options");
        if (count > 0) need(tokens, "tokens");
        if (capacity < model->model.spec.d_model) throw InvalidArgument{"embedding buffer too small"};
        need(out, "out");
        EmbedOptions embed;
        embed.strategy = options->strategy == SSD_STRATEGY_VERTICAL ? Strategy::Vertical : Strategy::Horizontal;
        embed.vertical_chunk = options->vertical_chunk;
        embed.inference = inference_options(*options);
        const auto result = embed_sequence(model->model, std::span<const std::int32_t>(tokens, count), embed);
        std::copy(result.values.begin(), result.values.end(), out);
    });
}

ssd_status ssd_cosine_similarity(const double* lhs, const double* rhs, size_t dim, double* out) {
    return guarded([&] {
        need(lhs, "lhs");
        need(rhs, "rhs");
        need(out, "out");
        *out = cosine_similarity(std::span<const double>(lhs, dim), std::span<const double>(rhs, dim));
    });
}

ssd_status ssd_info_nce(const double* query, const double* positive, const double* negatives, size_t count,
                        size_t dim, double temperature, double* loss) {
    return guarded([&] {
        need(query, "query");
        need(positive, "positive");
        need(loss, "loss");
        if (count > 0) need(negatives, "negatives");
        std::vector<std::vector<double>> rows;
        rows.reserve(count);
        for (size_t i = 0; i < count; ++i) rows.emplace_back(negatives + i * dim, negatives + (i + 1) * dim);
        *loss = info_nce_loss(std::span<const double>(query, dim), std::span<const double>(positive, dim), rows,
                              LossConfig{temperature});
    });
}

ssd_status ssd_fault_from_name(const char* name, ssd_fault* fault) {
    return guarded([&] {
        need(name, "name");
        need(fault, "fault");
        const auto mode = parse_fault_mode(name);
        if (!mode) throw InvalidArgument{std::string("unknown fault mode '") + name + "'"};
        switch (*mode) {
            case FaultMode::None: *fault = SSD_FAULT_NONE; break;
            case FaultMode::IntraMask: *fault = SSD_FAULT_INTRA_MASK; break;
            case FaultMode::RowSelector: *fault = SSD_FAULT_ROW_SELECTOR; break;
            case FaultMode::Transition: *fault = SSD_FAULT_TRANSITION; break;
            case FaultMode::InterCorrection: *fault = SSD_FAULT_INTER_CORRECTION; break;
        }
    });
}

void ssd_equivalence_config_init(ssd_equivalence_config* config) {
    if (!config) return;
    const EquivalenceConfig defaults;
    *config = ssd_equivalence_config{};
    config->seed = defaults.seed;
    config->instances = static_cast<std::uint32_t>(defaults.instances);
    config->tolerance = defaults.tolerance;
    config->fault = SSD_FAULT_NONE;
    config->workers = 1;
}

ssd_status ssd_run_equivalence(const ssd_equivalence_config* config, ssd_line_fn emit, void* user,
                               ssd_equivalence_summary* summary) {
    return guarded([&] {
        need(config, "config");
        need(summary, "summary");
        const EquivalenceConfig defaults;
        EquivalenceConfig cfg;
        cfg.seed = config->seed;
        cfg.instances = config->instances;
        cfg.seq_lens = grid(config->seq_lens, defaults.seq_lens);
        cfg.chunk_sizes = grid(config->chunk_sizes, defaults.chunk_sizes);
        cfg.vertical_chunks = grid(config->vertical_chunks, defaults.vertical_chunks);
        cfg.tolerance = config->tolerance;
        cfg.fault = fault_of(config->fault);
        cfg.workers = std::max<std::uint32_t>(1, config->workers);
        cfg.dense_limit = resolve_dense_limit(cfg.dense_limit);
        const auto report = run_equivalence(cfg, [&](const CheckResult& check) {
            if (!emit) return;
            char line[256];
            std::snprintf(line, sizeof line, "%s instance=%zu T=%zu chunks=%zu %s rel_err=%.3e",
                          check.passed ? "PASS" : "FAIL", check.instance, check.seq_len, check.num_chunks,
                          check.name.c_str(), check.rel_error);
            emit(line, user);
        });
        *summary = ssd_equivalence_summary{};
        summary->checks = static_cast<std::uint32_t>(report.checks.size());
        summary->failed_checks = static_cast<std::uint32_t>(report.failed_checks());
        summary->instances = static_cast<std::uint32_t>(report.instances.size());
        for (const auto& inst : report.instances) {
            summary->failed_instances += inst.passed ? 0 : 1;
            summary->multi_chunk_instances += inst.multi_chunk ? 1 : 0;
            summary->failed_multi_chunk_instances += inst.multi_chunk && !inst.passed ? 1 : 0;
        }
        summary->max_rel_error = report.max_rel_error;
    });
}

void ssd_sweep_config_init(ssd_sweep_config* config) {
    if (!config) return;
    const SweepConfig defaults;
    *config = ssd_sweep_config{};
    config->strategy_mask = 0;
    config->reps = static_cast<std::uint32_t>(defaults.reps);
    config->warmup = static_cast<std::uint32_t>(defaults.warmup);
    config->parallel = 0;
    config->token_seed = defaults.token_seed;
}

ssd_status ssd_run_sweep(const ssd_model* model, const ssd_sweep_config* config, const char* csv_path,
                         ssd_line_fn log, void* user, size_t* rows) {
    return guarded([&] {
        need(model, "model");
        need(config, "config");
        need(csv_path, "csv_path");
        const SweepConfig defaults;
        SweepConfig cfg;
        cfg.seq_lens = grid(config->seq_lens, defaults.seq_lens);
        cfg.batches = grid(config->batches, defaults.batches);
        cfg.chunk_sizes = grid(config->chunk_sizes, defaults.chunk_sizes);
        cfg.vertical_chunks = grid(config->vertical_chunks, {});
        if (config->strategy_mask != 0) {
            cfg.strategies.clear();
            const std::pair<ssd_strategy, SweepStrategy> order[] = {
                {SSD_STRATEGY_RECURRENT, SweepStrategy::Recurrent},
                {SSD_STRATEGY_DENSE, SweepStrategy::Dense},
                {SSD_STRATEGY_HORIZONTAL, SweepStrategy::Horizontal},
                {SSD_STRATEGY_VERTICAL, SweepStrategy::Vertical},
            };
            for (const auto& [bit, strategy] : order) {
                if (config->strategy_mask & SSD_STRATEGY_BIT(bit)) cfg.strategies.push_back(strategy);
            }
        }
        cfg.reps = config->reps;
        cfg.warmup = config->warmup;
        cfg.parallel = config->parallel != 0;
        cfg.token_seed = config->token_seed;
        const auto records = run_sweep(model->model, cfg, [&](const std::string& line) {
            if (log) log(line.c_str(), user);
        });
        std::ofstream out(csv_path, std::ios::binary | std::ios::trunc);
        if (!out) fail(ErrorKind::Io, std::string("cannot open ") + csv_path + " for writing");
        write_sweep_csv(out, records);
        out.flush();
        if (!out) fail(ErrorKind::Io, std::string("failed writing ") + csv_path);
        if (rows) *rows = records.size();
    });
}

namespace {

std::string read_text(const char* path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Io, std::string("cannot open ") + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace

ssd_status ssd_sweep_csv_validate(const char* csv_path, size_t* rows) {
    return guarded([&] {
        need(csv_path, "csv_path");
        const auto text = read_text(csv_path);
        std::istringstream in(text);
        const auto records = parse_sweep_csv(in);
        std::ostringstream again;
        write_sweep_csv(again, records);
        if (again.str() != text) fail(ErrorKind::Format, "sweep CSV does not round-trip");
        if (rows) *rows = records.size();
    });
}

ssd_status ssd_report(const char* csv_path, ssd_line_fn emit, void* user) {
    return guarded([&] {
        need(csv_path, "csv_path");
        std::istringstream in(read_text(csv_path));
        const auto records = parse_sweep_csv(in);
        const auto cells = summarize(records);
        std::ostringstream out;
        write_report(out, cells);
        if (!emit) return;
        std::istringstream lines(out.str());
        for (std::string line; std::getline(lines, line);) emit(line.c_str(), user);
    });
}

}  // extern "C"
