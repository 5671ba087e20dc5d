// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>

#include "ssdchunk/ssd_core.hpp"

namespace ssdchunk {

// Shape and scheduling configuration of a synthetic stacked model.
struct ModelSpec {
    std::uint64_t seed = 0;
    std::size_t layers = 4;          // L
    std::size_t d_model = 16;        // d
    std::size_t heads = 4;           // H
    std::size_t state_dim = 8;       // N
    std::size_t vocab_size = 256;    // highest id is EOS
    std::size_t chunk_size = 16;     // Q
    std::size_t vertical_chunk = 32; // V, a multiple of Q
    std::size_t dense_limit = kDefaultDenseLimit;

    // Throws Validation on non-positive fields, V % Q != 0 or vocab_size < 2.
    void validate() const;

    friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

// V = 2Q for batched inference, V = Q when memory is constrained.
constexpr std::size_t default_vertical_chunk(std::size_t chunk_size, bool memory_capped) noexcept {
    return memory_capped ? chunk_size : 2 * chunk_size;
}

}  // namespace ssdchunk

namespace ssdchunk {

// SSD_CHUNK_DENSE_LIMIT, when set, replaces the configured dense limit.
std::size_t resolve_dense_limit(std::size_t configured);

}  // namespace ssdchunk
