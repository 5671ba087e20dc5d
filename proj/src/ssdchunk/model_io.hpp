// SPDX-License-Identifier: Apache-2.0
//
// Deterministic synthetic models and their on-disk format.
//
// Model file layout:
//   line 1   compact JSON header terminated by '\n':
//            {"checksum":"<16 hex>","format":"ssdchunk-model",
//             "payload_doubles":<count>,"spec":{...},"version":1}
//   rest     parameter payload, IEEE-754 binary64 little-endian, in
//            parameter_payload() order
// The checksum is FNV-1a 64 over the header serialized without the
// "checksum" key followed by the payload bytes.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ssdchunk/layer_stack.hpp"
#include "ssdchunk/model_spec.hpp"

namespace ssdchunk {

// Parameters drawn from SplitMix64(seed) in payload order:
//   embedding                  U(-1, 1)
//   per layer:
//     w_a, w_x, w_b, w_c       U(-1, 1) / sqrt(d)
//     b_a                      -1 - 3 U(0, 1)      (a_t roughly in (0.5, 0.99))
//     w_out                    U(-1, 1) / sqrt(H)
//     gamma                    1 + 0.1 U(-1, 1)
StackedModel generate_model(const ModelSpec& spec);

std::size_t payload_length(const ModelSpec& spec);

// embedding, then per layer: w_a, b_a, w_x, w_b, w_c, w_out, gamma.
std::vector<double> parameter_payload(const StackedModel& model);
StackedModel model_from_payload(const ModelSpec& spec, std::span<const double> payload);

std::uint64_t fnv1a64(std::span<const unsigned char> bytes, std::uint64_t hash = 0xcbf29ce484222325ULL);
std::vector<unsigned char> encode_payload(std::span<const double> payload);
std::uint64_t payload_hash(const StackedModel& model);

void save_model(const StackedModel& model, const std::string& path);
StackedModel load_model(const std::string& path);

// Config documents use the field names seed, L, d, H, N, vocab_size, Q, V, dense_limit.
std::string spec_to_json(const ModelSpec& spec);
ModelSpec spec_from_json(std::string_view document);
ModelSpec load_spec(const std::string& path);

}  // namespace ssdchunk
