// SPDX-License-Identifier: Apache-2.0
//
// Text-embedding head: instruction templating for queries, EOS pooling of
// the final layer, cosine similarity and the InfoNCE objective.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ssdchunk/layer_stack.hpp"

namespace ssdchunk {

// "Instruction: {prompt}\nQuery: {query}". Documents are embedded as-is.
std::string format_query(std::string_view prompt, std::string_view query);

// Whitespace-split hashing tokenizer: each word maps to
// fnv1a64(word) % (vocab_size - 1), keeping the top id free for EOS.
std::vector<std::int32_t> hash_tokenize(std::string_view text, std::size_t vocab_size);

struct EmbeddingOutput {
    std::vector<double> values;   // final-layer hidden state at the EOS position
    std::size_t source_len = 0;   // tokens including the appended EOS
};

enum class Strategy { Horizontal, Vertical };

struct EmbedOptions {
    Strategy strategy = Strategy::Horizontal;
    std::size_t vertical_chunk = 0;  // 0 -> model spec V
    InferenceOptions inference;
};

EmbeddingOutput embed_sequence(const StackedModel& model, std::span<const std::int32_t> tokens,
                               const EmbedOptions& options = {});

double cosine_similarity(std::span<const double> lhs, std::span<const double> rhs);

struct LossConfig {
    double temperature = 0.02;
};

// -log softmax of the positive among {positive, negatives} at temperature
// tau, evaluated with a max-shifted log-sum-exp.
double info_nce_loss(std::span<const double> query, std::span<const double> positive,
                     std::span<const std::vector<double>> negatives, const LossConfig& config = {});

struct ContrastiveExample {
    std::vector<double> query;
    std::vector<double> positive;
    std::vector<std::vector<double>> hard_negatives;
};

// Negatives for batch[index]: its own hard negatives, then the positives and
// hard negatives of every other example in batch order.
std::vector<std::vector<double>> in_batch_negatives(std::span<const ContrastiveExample> batch, std::size_t index);

}  // namespace ssdchunk
