// SPDX-License-Identifier: Apache-2.0
//
// Block-decomposed chunked SSD forward pass.
//
// The sequence is split into K chunks of Q positions (last one possibly
// shorter). Three stages:
//   1. intra    per chunk, zero incoming state: diagonal-block output
//               y_intra and chunk-local boundary state b_intra
//   2. propagate  b(c) = A^x_{chunk c} b(c-1) + b_intra(c), sequential in c,
//               b(0) = h0
//   3. inter    y_inter(c) = diag(entry transitions of c) C(c) b(c-1)
// and y(c) = y_intra(c) + y_inter(c).
//
// Chunk indices in this API are 0-based; boundary state index k is the
// state after k chunks (so index 0 is h0).

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "ssdchunk/ledger.hpp"
#include "ssdchunk/ssd_core.hpp"
#include "ssdchunk/tensor.hpp"

namespace ssdchunk {

// Deliberate stage mutations used to prove the equivalence suite is sensitive
// to every stage.
enum class FaultMode {
    None,
    IntraMask,        // stage 1 output without the kernel mask
    RowSelector,      // stage 1 boundary state without final-row weights
    Transition,       // stage 2 without the chunk transition factor
    InterCorrection,  // stage 3 skipped
};

std::string_view to_string(FaultMode mode) noexcept;
std::optional<FaultMode> parse_fault_mode(std::string_view name) noexcept;

struct ChunkPlan {
    std::size_t seq_len = 0;
    std::size_t chunk_size = 0;
    std::size_t num_chunks = 0;
    std::size_t last_chunk_len = 0;

    // chunk_size <= 0 or seq_len == 0 -> Validation.
    static ChunkPlan make(std::size_t seq_len, std::int64_t chunk_size);

    std::size_t start(std::size_t c) const noexcept { return c * chunk_size; }
    std::size_t length(std::size_t c) const noexcept {
        return c + 1 == num_chunks ? last_chunk_len : chunk_size;
    }
};

// Chunked views over flat coefficients and input. Holds references; the
// referenced tensors must outlive the view.
class ChunkedCoefficients {
public:
    ChunkedCoefficients(const SsmCoefficients& coeffs, const SequenceTensor& x, ChunkPlan plan);

    const ChunkPlan& plan() const noexcept { return plan_; }
    const SsmCoefficients& coefficients() const noexcept { return *coeffs_; }
    const SequenceTensor& input() const noexcept { return *x_; }

    SsmCoefficients chunk_coefficients(std::size_t c) const;
    SequenceTensor chunk_input(std::size_t c) const;

    // Diagonal kernel block of chunk c for slice (b, h).
    KernelMatrix diagonal_block(std::size_t c, std::size_t b, std::size_t h) const;
    // Cumulative transitions from the previous boundary to each position of chunk c.
    std::vector<double> entry_transitions(std::size_t c, std::size_t b, std::size_t h) const;
    // Whole-chunk transitions A^x over chunk c, one per (b, h), index b * H + h.
    std::vector<double> boundary_transitions(std::size_t c) const;

private:
    void check_chunk(std::size_t c) const;

    const SsmCoefficients* coeffs_;
    const SequenceTensor* x_;
    ChunkPlan plan_;
};

ChunkedCoefficients partition(const SsmCoefficients& coeffs, const SequenceTensor& x,
                              std::int64_t chunk_size);

struct IntraChunkResult {
    SequenceTensor y_intra;  // [B, len, H]
    LatentState b_intra;
};

IntraChunkResult intra_chunk(const ChunkedCoefficients& chunks, std::size_t c);

// Returns K + 1 boundary states, the first being b0.
std::vector<LatentState> propagate_states(std::span<const LatentState> b_intra,
                                          std::span<const std::vector<double>> transitions,
                                          const LatentState& b0);

SequenceTensor inter_chunk_correction(const ChunkedCoefficients& chunks, std::size_t c,
                                      const LatentState& b_prev);

struct ChunkOptions {
    std::int64_t chunk_size = 16;
    FaultMode fault = FaultMode::None;
    std::size_t workers = 1;
    Instruments instruments;
};

ScanResult chunked_forward(const SsmCoefficients& coeffs, const SequenceTensor& x,
                           const LatentState& h0, const ChunkOptions& options);

}  // namespace ssdchunk
