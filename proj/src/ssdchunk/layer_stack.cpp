// SPDX-License-Identifier: Apache-2.0

#include "ssdchunk/layer_stack.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ssdchunk/errors.hpp"

namespace ssdchunk {

namespace {

constexpr double kRmsEpsilon = 1e-6;

double softplus(double z) {
    return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

double dot(const double* w, std::span<const double> u) {
    double sum = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) sum += w[i] * u[i];
    return sum;
}

void normalize_row(std::span<const double> in, std::span<const double> gamma, std::span<double> out) {
    double mean_sq = 0.0;
    for (double v : in) mean_sq += v * v;
    mean_sq /= static_cast<double>(in.size());
    const double inv = 1.0 / std::sqrt(mean_sq + kRmsEpsilon);
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] * inv * gamma[i];
}

void check_sizes(bool ok, const char* what) {
    if (!ok) fail(ErrorKind::Dimension, std::string("layer parameter extent mismatch: ") + what);
}

std::int64_t resolve_chunk(const StackedModel& model, const InferenceOptions& options) {
    return options.chunk_size > 0 ? options.chunk_size : static_cast<std::int64_t>(model.spec.chunk_size);
}

LayerContext make_context(const StackedModel& model, const InferenceOptions& options, InferenceResult& result) {
    LayerContext ctx;
    ctx.kernel = options.kernel;
    ctx.chunk_size = resolve_chunk(model, options);
    ctx.dense_limit = resolve_dense_limit(model.spec.dense_limit);
    ctx.fault = options.fault;
    ctx.workers = options.workers;
    ctx.instruments = {&result.ledger, &result.flops};
    return ctx;
}

void check_tokens(const StackedModel& model, const TokenBatch& tokens) {
    if (tokens.batch == 0 || tokens.seq_len == 0) fail(ErrorKind::Validation, "token sequence is empty");
    if (tokens.ids.size() != tokens.batch * tokens.seq_len) {
        fail(ErrorKind::Dimension, "token batch extent mismatch");
    }
    for (auto id : tokens.ids) {
        if (id < 0 || static_cast<std::size_t>(id) >= model.spec.vocab_size) {
            fail(ErrorKind::Validation, "token id " + std::to_string(id) + " outside vocabulary");
        }
    }
}

}  // namespace

// ---------------------------------------------------------------------------

LayerParams LayerParams::zeros(std::size_t d_model, std::size_t heads, std::size_t state_dim) {
    LayerParams p;
    p.d_model = d_model;
    p.heads = heads;
    p.state_dim = state_dim;
    p.w_a.assign(heads * d_model, 0.0);
    p.b_a.assign(heads, 0.0);
    p.w_x.assign(heads * d_model, 0.0);
    p.w_b.assign(heads * state_dim * d_model, 0.0);
    p.w_c.assign(heads * state_dim * d_model, 0.0);
    p.w_out.assign(d_model * heads, 0.0);
    p.gamma.assign(d_model, 1.0);
    return p;
}

void LayerParams::validate() const {
    if (d_model == 0 || heads == 0 || state_dim == 0) fail(ErrorKind::Validation, "layer dims must be >= 1");
    check_sizes(w_a.size() == heads * d_model, "w_a");
    check_sizes(b_a.size() == heads, "b_a");
    check_sizes(w_x.size() == heads * d_model, "w_x");
    check_sizes(w_b.size() == heads * state_dim * d_model, "w_b");
    check_sizes(w_c.size() == heads * state_dim * d_model, "w_c");
    check_sizes(w_out.size() == d_model * heads, "w_out");
    check_sizes(gamma.size() == d_model, "gamma");
    for (const auto* field : {&w_a, &b_a, &w_x, &w_b, &w_c, &w_out, &gamma}) {
        if (!std::all_of(field->begin(), field->end(), [](double v) { return std::isfinite(v); })) {
            fail(ErrorKind::Validation, "layer parameters contain non-finite values");
        }
    }
}

void StackedModel::validate() const {
    spec.validate();
    if (embedding.size() != spec.vocab_size * spec.d_model) {
        fail(ErrorKind::Dimension, "embedding table extent mismatch");
    }
    if (layers.size() != spec.layers) fail(ErrorKind::Dimension, "layer count does not match spec");
    for (const auto& layer : layers) {
        if (layer.d_model != spec.d_model || layer.heads != spec.heads || layer.state_dim != spec.state_dim) {
            fail(ErrorKind::Dimension, "layer dims differ from model dims");
        }
        layer.validate();
    }
}

TokenBatch TokenBatch::single(std::span<const std::int32_t> tokens) {
    return TokenBatch{1, tokens.size(), std::vector<std::int32_t>(tokens.begin(), tokens.end())};
}

TokenBatch TokenBatch::slice(std::size_t start, std::size_t len) const {
    if (start + len > seq_len) fail(ErrorKind::Index, "token slice out of range");
    TokenBatch out{batch, len, {}};
    out.ids.reserve(batch * len);
    for (std::size_t b = 0; b < batch; ++b) {
        auto first = ids.begin() + static_cast<std::ptrdiff_t>(b * seq_len + start);
        out.ids.insert(out.ids.end(), first, first + static_cast<std::ptrdiff_t>(len));
    }
    return out;
}

// ---------------------------------------------------------------------------

SequenceTensor rms_normalize(const SequenceTensor& u, std::span<const double> gamma) {
    if (gamma.size() != u.channels()) fail(ErrorKind::Dimension, "gamma extent mismatch");
    SequenceTensor out(u.batch(), u.seq_len(), u.channels());
    for (std::size_t b = 0; b < u.batch(); ++b) {
        for (std::size_t t = 0; t < u.seq_len(); ++t) normalize_row(u.row(b, t), gamma, out.row(b, t));
    }
    return out;
}

LayerProjection project_layer(const LayerParams& params, const SequenceTensor& u) {
    if (u.channels() != params.d_model) fail(ErrorKind::Dimension, "layer input width does not match d_model");
    u.check_finite("layer input");
    const std::size_t d = params.d_model;
    const std::size_t heads = params.heads;
    const std::size_t n_state = params.state_dim;

    LayerProjection out{SsmCoefficients(u.batch(), u.seq_len(), heads, n_state),
                        SequenceTensor(u.batch(), u.seq_len(), heads)};
    std::vector<double> normed(d);
    for (std::size_t b = 0; b < u.batch(); ++b) {
        for (std::size_t t = 0; t < u.seq_len(); ++t) {
            normalize_row(u.row(b, t), params.gamma, normed);
            for (std::size_t h = 0; h < heads; ++h) {
                const double z = dot(params.w_a.data() + h * d, normed) + params.b_a[h];
                out.coeffs.a(b, t, h) = std::exp(-softplus(z));
                out.x(b, t, h) = dot(params.w_x.data() + h * d, normed);
                auto b_row = out.coeffs.b_row(b, t, h);
                auto c_row = out.coeffs.c_row(b, t, h);
                for (std::size_t n = 0; n < n_state; ++n) {
                    b_row[n] = dot(params.w_b.data() + (h * n_state + n) * d, normed);
                    c_row[n] = dot(params.w_c.data() + (h * n_state + n) * d, normed);
                }
            }
        }
    }
    out.coeffs.validate();
    return out;
}

SsmCoefficients generate_coefficients(const LayerParams& params, const SequenceTensor& u) {
    return project_layer(params, u).coeffs;
}

LayerOutput layer_forward(const LayerParams& params, const SequenceTensor& u, const LatentState& state,
                          const LayerContext& context) {
    if (state.batch() != u.batch() || state.heads() != params.heads || state.state_dim() != params.state_dim) {
        fail(ErrorKind::Dimension, "layer state extents do not match (B, H, N)");
    }
    MemoryLedger* ledger = context.instruments.ledger;

    auto projection = project_layer(params, u);
    auto projection_hold = track(ledger, projection.coeffs.element_count() + projection.x.size());

    ScanResult scan;
    switch (context.kernel) {
        case Kernel::Recurrent:
            scan = recurrent_scan(projection.coeffs, projection.x, state, context.instruments);
            break;
        case Kernel::Dense:
            scan = dense_dual(projection.coeffs, projection.x, state, context.dense_limit, context.instruments);
            break;
        case Kernel::Chunked: {
            ChunkOptions options;
            options.chunk_size = context.chunk_size;
            options.fault = context.fault;
            options.workers = context.workers;
            options.instruments = context.instruments;
            scan = chunked_forward(projection.coeffs, projection.x, state, options);
            break;
        }
    }
    auto scan_hold = track(ledger, scan.y.size() + scan.final_state.size());

    LayerOutput out{u, std::move(scan.final_state), {}};
    if (context.track_output) out.v_hold = track(ledger, out.v.size());
    const std::size_t d = params.d_model;
    for (std::size_t b = 0; b < u.batch(); ++b) {
        for (std::size_t t = 0; t < u.seq_len(); ++t) {
            auto v_row = out.v.row(b, t);
            for (std::size_t i = 0; i < d; ++i) {
                double mix = 0.0;
                for (std::size_t h = 0; h < params.heads; ++h) mix += params.w_out[i * params.heads + h] * scan.y(b, t, h);
                v_row[i] += mix;
            }
        }
    }
    return out;
}

SequenceTensor embed_tokens(const StackedModel& model, const TokenBatch& tokens) {
    check_tokens(model, tokens);
    const std::size_t d = model.spec.d_model;
    SequenceTensor out(tokens.batch, tokens.seq_len, d);
    for (std::size_t b = 0; b < tokens.batch; ++b) {
        for (std::size_t t = 0; t < tokens.seq_len; ++t) {
            const auto id = static_cast<std::size_t>(tokens.ids[b * tokens.seq_len + t]);
            std::copy_n(model.embedding.begin() + static_cast<std::ptrdiff_t>(id * d), d, out.row(b, t).begin());
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Schedules

InferenceResult horizontal_infer(const StackedModel& model, const TokenBatch& tokens, const InferenceOptions& options) {
    check_tokens(model, tokens);
    InferenceResult result;
    LayerContext ctx = make_context(model, options, result);

    SequenceTensor u = embed_tokens(model, tokens);
    auto u_hold = track(&result.ledger, u.size());
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        ctx.track_output = l + 1 < model.layers.size();
        // Horizontal layers start from a zero state and drop the final one.
        LatentState zero(tokens.batch, model.spec.heads, model.spec.state_dim);
        auto state_hold = track(&result.ledger, zero.size());
        auto out = layer_forward(model.layers[l], u, zero, ctx);
        u_hold.reset();
        u = std::move(out.v);
        u_hold = std::move(out.v_hold);
    }
    result.hidden = std::move(u);
    if (options.sink) options.sink(0, result.hidden);
    return result;
}

InferenceResult vertical_resume(const StackedModel& model, const TokenBatch& tokens, std::size_t vertical_chunk,
                                const StateSnapshot* carry, const InferenceOptions& options) {
    check_tokens(model, tokens);
    const auto q = static_cast<std::size_t>(resolve_chunk(model, options));
    if (vertical_chunk == 0 || vertical_chunk % q != 0) {
        fail(ErrorKind::Validation, "vertical chunk size " + std::to_string(vertical_chunk) +
                                        " is not a positive multiple of chunk size " + std::to_string(q));
    }
    InferenceResult result;
    LayerContext ctx = make_context(model, options, result);
    const std::size_t n_layers = model.layers.size();

    std::vector<LatentState> states;
    if (carry) {
        if (carry->layers.size() != n_layers || carry->batch != tokens.batch || carry->heads != model.spec.heads ||
            carry->state_dim != model.spec.state_dim) {
            fail(ErrorKind::Dimension, "state snapshot does not match model and batch");
        }
        states = carry->layers;
    } else {
        states.assign(n_layers, LatentState(tokens.batch, model.spec.heads, model.spec.state_dim));
    }
    result.ledger.set_state_elements(n_layers * tokens.batch * model.spec.heads * model.spec.state_dim);

    for (std::size_t start = 0; start < tokens.seq_len; start += vertical_chunk) {
        const std::size_t len = std::min(vertical_chunk, tokens.seq_len - start);
        SequenceTensor u = embed_tokens(model, tokens.slice(start, len));
        auto u_hold = track(&result.ledger, u.size());
        for (std::size_t l = 0; l < n_layers; ++l) {
            ctx.track_output = l + 1 < n_layers;
            auto out = layer_forward(model.layers[l], u, states[l], ctx);
            states[l] = std::move(out.state);
            u_hold.reset();
            u = std::move(out.v);
            u_hold = std::move(out.v_hold);
        }
        if (options.sink) options.sink(start, u);
        if (start + len == tokens.seq_len) {
            result.hidden = std::move(u);
            result.offset = start;
        }
    }
    result.carry = StateSnapshot{tokens.batch, model.spec.heads, model.spec.state_dim, std::move(states)};
    return result;
}

InferenceResult vertical_infer(const StackedModel& model, const TokenBatch& tokens, std::size_t vertical_chunk,
                               const InferenceOptions& options) {
    check_tokens(model, tokens);
    const auto q = static_cast<std::size_t>(resolve_chunk(model, options));
    if (vertical_chunk == 0 || vertical_chunk % q != 0) {
        fail(ErrorKind::Validation, "vertical chunk size " + std::to_string(vertical_chunk) +
                                        " is not a positive multiple of chunk size " + std::to_string(q));
    }
    if (tokens.seq_len <= vertical_chunk) {
        auto result = horizontal_infer(model, tokens, options);
        result.horizontal_fallback = true;
        return result;
    }
    return vertical_resume(model, tokens, vertical_chunk, nullptr, options);
}

}  // namespace ssdchunk
