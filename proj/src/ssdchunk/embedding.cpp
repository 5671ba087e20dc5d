// SPDX-License-Identifier: Apache-2.0

#include "ssdchunk/embedding.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "ssdchunk/errors.hpp"
#include "ssdchunk/model_io.hpp"

namespace ssdchunk {

std::string format_query(std::string_view prompt, std::string_view query) {
    std::string out;
    out.reserve(prompt.size() + query.size() + 21);
    out.append("Instruction: ").append(prompt).append("\nQuery: ").append(query);
    return out;
}

std::vector<std::int32_t> hash_tokenize(std::string_view text, std::size_t vocab_size) {
    if (vocab_size < 2) fail(ErrorKind::Validation, "vocab_size must be >= 2");
    std::vector<std::int32_t> ids;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        const std::size_t begin = i;
        while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        if (i > begin) {
            const auto* word = reinterpret_cast<const unsigned char*>(text.data() + begin);
            ids.push_back(static_cast<std::int32_t>(fnv1a64({word, i - begin}) % (vocab_size - 1)));
        }
    }
    return ids;
}

EmbeddingOutput embed_sequence(const StackedModel& model, std::span<const std::int32_t> tokens,
                               const EmbedOptions& options) {
    if (tokens.empty()) fail(ErrorKind::Validation, "cannot embed an empty token sequence");
    std::vector<std::int32_t> ids(tokens.begin(), tokens.end());
    ids.push_back(model.eos_id());
    const auto batch = TokenBatch::single(ids);

    InferenceResult result;
    if (options.strategy == Strategy::Vertical) {
        const std::size_t v = options.vertical_chunk ? options.vertical_chunk : model.spec.vertical_chunk;
        result = vertical_infer(model, batch, v, options.inference);
    } else {
        result = horizontal_infer(model, batch, options.inference);
    }
    const auto last = result.hidden.row(0, result.hidden.seq_len() - 1);
    return EmbeddingOutput{std::vector<double>(last.begin(), last.end()), ids.size()};
}

double cosine_similarity(std::span<const double> lhs, std::span<const double> rhs) {
    if (lhs.size() != rhs.size()) fail(ErrorKind::Dimension, "cosine similarity operands differ in length");
    double dot = 0.0, lhs_sq = 0.0, rhs_sq = 0.0;
    for (std::size_t i = 0; i < lhs.size(); ++i) {
        dot += lhs[i] * rhs[i];
        lhs_sq += lhs[i] * lhs[i];
        rhs_sq += rhs[i] * rhs[i];
    }
    if (lhs_sq == 0.0 || rhs_sq == 0.0) fail(ErrorKind::Validation, "cosine similarity of a zero vector");
    return std::clamp(dot / (std::sqrt(lhs_sq) * std::sqrt(rhs_sq)), -1.0, 1.0);
}

double info_nce_loss(std::span<const double> query, std::span<const double> positive,
                     std::span<const std::vector<double>> negatives, const LossConfig& config) {
    if (!(config.temperature > 0.0)) fail(ErrorKind::Validation, "InfoNCE temperature must be > 0");
    const double tau = config.temperature;
    const double pos_logit = cosine_similarity(query, positive) / tau;
    if (negatives.empty()) return 0.0;

    std::vector<double> logits;
    logits.reserve(negatives.size() + 1);
    logits.push_back(pos_logit);
    for (const auto& negative : negatives) logits.push_back(cosine_similarity(query, negative) / tau);
    const double shift = *std::max_element(logits.begin(), logits.end());
    if (shift == pos_logit) {
        // log(1 + sum exp(neg - pos)) without cancelling against the shift.
        double tail = 0.0;
        for (std::size_t i = 1; i < logits.size(); ++i) tail += std::exp(logits[i] - shift);
        return std::log1p(tail);
    }
    double sum = 0.0;
    for (double logit : logits) sum += std::exp(logit - shift);
    return std::log(sum) + (shift - pos_logit);
}

std::vector<std::vector<double>> in_batch_negatives(std::span<const ContrastiveExample> batch, std::size_t index) {
    if (index >= batch.size()) fail(ErrorKind::Index, "batch index out of range");
    std::vector<std::vector<double>> out(batch[index].hard_negatives);
    for (std::size_t i = 0; i < batch.size(); ++i) {
        if (i == index) continue;
        out.push_back(batch[i].positive);
        out.insert(out.end(), batch[i].hard_negatives.begin(), batch[i].hard_negatives.end());
    }
    return out;
}

}  // namespace ssdchunk
