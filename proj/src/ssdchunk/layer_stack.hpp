// SPDX-License-Identifier: Apache-2.0
//
// Stacked SSD layers with synthetic coefficient generation, residual wiring
// and the two cross-layer schedules:
//
//   horizontal  every layer processes the whole sequence before the next
//               one starts; activations scale with T.
//   vertical    blocks of V positions pass through all L layers before the
//               next block; each layer's recurrent state is carried across
//               blocks, so activations are bounded by V.
//
// Per layer, with û the RMS-normalized input scaled by gamma:
//   a = exp(-softplus(w_a û + b_a)),  x = w_x û,  B = W_B û,  C = W_C û
//   v = u + W_out y,  y = SSD(a, B, C, x; h0 = carried state)

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "ssdchunk/chunked.hpp"
#include "ssdchunk/ledger.hpp"
#include "ssdchunk/model_spec.hpp"
#include "ssdchunk/tensor.hpp"

namespace ssdchunk {

struct LayerParams {
    std::size_t d_model = 0;
    std::size_t heads = 0;
    std::size_t state_dim = 0;
    std::vector<double> w_a;    // [H, d]
    std::vector<double> b_a;    // [H]
    std::vector<double> w_x;    // [H, d]
    std::vector<double> w_b;    // [H, N, d]
    std::vector<double> w_c;    // [H, N, d]
    std::vector<double> w_out;  // [d, H]
    std::vector<double> gamma;  // [d]

    // Zero-initialized parameters with gamma = 1.
    static LayerParams zeros(std::size_t d_model, std::size_t heads, std::size_t state_dim);

    void validate() const;
    friend bool operator==(const LayerParams&, const LayerParams&) = default;
};

struct StackedModel {
    ModelSpec spec;
    std::vector<double> embedding;  // [vocab, d]
    std::vector<LayerParams> layers;

    std::int32_t eos_id() const noexcept { return static_cast<std::int32_t>(spec.vocab_size - 1); }
    void validate() const;
    friend bool operator==(const StackedModel&, const StackedModel&) = default;
};

// Row-major [batch, seq_len] token ids.
struct TokenBatch {
    std::size_t batch = 0;
    std::size_t seq_len = 0;
    std::vector<std::int32_t> ids;

    static TokenBatch single(std::span<const std::int32_t> tokens);
    TokenBatch slice(std::size_t start, std::size_t len) const;
};

enum class Kernel { Recurrent, Dense, Chunked };

struct LayerContext {
    Kernel kernel = Kernel::Chunked;
    std::int64_t chunk_size = 16;
    std::size_t dense_limit = kDefaultDenseLimit;
    FaultMode fault = FaultMode::None;
    std::size_t workers = 1;
    Instruments instruments;
    bool track_output = true;  // false for the buffer handed back to the caller
};

struct LayerProjection {
    SsmCoefficients coeffs;
    SequenceTensor x;  // [B, T, H]
};

SequenceTensor rms_normalize(const SequenceTensor& u, std::span<const double> gamma);
LayerProjection project_layer(const LayerParams& params, const SequenceTensor& u);
SsmCoefficients generate_coefficients(const LayerParams& params, const SequenceTensor& u);

struct LayerOutput {
    SequenceTensor v;
    LatentState state;
    MemoryLedger::Hold v_hold;
};

LayerOutput layer_forward(const LayerParams& params, const SequenceTensor& u, const LatentState& state,
                          const LayerContext& context);

SequenceTensor embed_tokens(const StackedModel& model, const TokenBatch& tokens);

struct InferenceOptions {
    Kernel kernel = Kernel::Chunked;
    std::int64_t chunk_size = 0;  // 0 -> model spec Q
    FaultMode fault = FaultMode::None;
    std::size_t workers = 1;
    // Receives final-layer hidden states of each processed block together
    // with its start position. Horizontal calls it once for the whole sequence.
    std::function<void(std::size_t offset, const SequenceTensor& hidden)> sink;
};

// Per-layer recurrent states exported by a vertical pass.
struct StateSnapshot {
    std::size_t batch = 0;
    std::size_t heads = 0;
    std::size_t state_dim = 0;
    std::vector<LatentState> layers;

    friend bool operator==(const StateSnapshot&, const StateSnapshot&) = default;
};

struct InferenceResult {
    SequenceTensor hidden;   // final-layer hidden states [B, len, d]
    std::size_t offset = 0;  // position of hidden's first step in the input
    MemoryLedger ledger;
    FlopCounter flops;
    bool horizontal_fallback = false;
    StateSnapshot carry;     // populated by vertical passes only
};

InferenceResult horizontal_infer(const StackedModel& model, const TokenBatch& tokens,
                                 const InferenceOptions& options = {});

// Falls back to horizontal_infer when T <= V. Otherwise returns the final
// vertical block's hidden states.
InferenceResult vertical_infer(const StackedModel& model, const TokenBatch& tokens, std::size_t vertical_chunk,
                               const InferenceOptions& options = {});

// Always vertical; resumes from `carry` when given and exports the final
// per-layer states in InferenceResult::carry.
InferenceResult vertical_resume(const StackedModel& model, const TokenBatch& tokens, std::size_t vertical_chunk,
                                const StateSnapshot* carry, const InferenceOptions& options = {});

// Snapshot document: {"version":1,"layer_count":L,"b":B,"h":H,"n":N,"states":[[...],...]}
std::string snapshot_to_json(const StateSnapshot& snapshot);
StateSnapshot snapshot_from_json(std::string_view document);
void save_snapshot(const StateSnapshot& snapshot, const std::string& path);
StateSnapshot load_snapshot(const std::string& path);

}  // namespace ssdchunk
