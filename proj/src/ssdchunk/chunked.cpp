// SPDX-License-Identifier: Apache-2.0

#include "ssdchunk/chunked.hpp"

#include <array>
#include <string>
#include <utility>

#include "ssdchunk/detail/kernels.hpp"
#include "ssdchunk/detail/parallel.hpp"
#include "ssdchunk/errors.hpp"

namespace ssdchunk {

namespace {

constexpr std::array<std::pair<std::string_view, FaultMode>, 5> kFaultNames{{
    {"none", FaultMode::None},
    {"intra-mask", FaultMode::IntraMask},
    {"row-selector", FaultMode::RowSelector},
    {"transition", FaultMode::Transition},
    {"inter-correction", FaultMode::InterCorrection},
}};

}  // namespace

std::string_view to_string(FaultMode mode) noexcept {
    for (const auto& [name, value] : kFaultNames) {
        if (value == mode) return name;
    }
    return "none";
}

std::optional<FaultMode> parse_fault_mode(std::string_view name) noexcept {
    for (const auto& [key, value] : kFaultNames) {
        if (key == name) return value;
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------

ChunkPlan ChunkPlan::make(std::size_t seq_len, std::int64_t chunk_size) {
    if (chunk_size <= 0) fail(ErrorKind::Validation, "chunk size must be >= 1");
    if (seq_len == 0) fail(ErrorKind::Validation, "sequence length must be >= 1");
    ChunkPlan plan;
    plan.seq_len = seq_len;
    plan.chunk_size = static_cast<std::size_t>(chunk_size);
    plan.num_chunks = (seq_len + plan.chunk_size - 1) / plan.chunk_size;
    plan.last_chunk_len = seq_len - (plan.num_chunks - 1) * plan.chunk_size;
    return plan;
}

ChunkedCoefficients::ChunkedCoefficients(const SsmCoefficients& coeffs, const SequenceTensor& x,
                                         ChunkPlan plan)
    : coeffs_(&coeffs), x_(&x), plan_(plan) {
    if (plan_.seq_len != coeffs.seq_len()) fail(ErrorKind::Dimension, "chunk plan length mismatch");
}

void ChunkedCoefficients::check_chunk(std::size_t c) const {
    if (c >= plan_.num_chunks) fail(ErrorKind::Index, "chunk index out of range");
}

SsmCoefficients ChunkedCoefficients::chunk_coefficients(std::size_t c) const {
    check_chunk(c);
    return coeffs_->slice(plan_.start(c), plan_.length(c));
}

SequenceTensor ChunkedCoefficients::chunk_input(std::size_t c) const {
    check_chunk(c);
    return x_->slice(plan_.start(c), plan_.length(c));
}

KernelMatrix ChunkedCoefficients::diagonal_block(std::size_t c, std::size_t b, std::size_t h) const {
    check_chunk(c);
    const std::size_t len = plan_.length(c);
    std::vector<double> block(len * len);
    detail::fill_kernel_block(detail::make_slice(*coeffs_, *x_, b, h), plan_.start(c), len, block);
    return KernelMatrix(len, std::move(block));
}

std::vector<double> ChunkedCoefficients::entry_transitions(std::size_t c, std::size_t b, std::size_t h) const {
    check_chunk(c);
    std::vector<double> col(plan_.length(c));
    detail::entry_column(detail::make_slice(*coeffs_, *x_, b, h), plan_.start(c), col.size(), col);
    return col;
}

std::vector<double> ChunkedCoefficients::boundary_transitions(std::size_t c) const {
    check_chunk(c);
    std::vector<double> out;
    out.reserve(coeffs_->batch() * coeffs_->heads());
    for (std::size_t b = 0; b < coeffs_->batch(); ++b) {
        for (std::size_t h = 0; h < coeffs_->heads(); ++h) out.push_back(entry_transitions(c, b, h).back());
    }
    return out;
}

ChunkedCoefficients partition(const SsmCoefficients& coeffs, const SequenceTensor& x, std::int64_t chunk_size) {
    if (x.batch() != coeffs.batch() || x.seq_len() != coeffs.seq_len() || x.channels() != coeffs.heads()) {
        fail(ErrorKind::Dimension, "input sequence extents do not match coefficients");
    }
    return ChunkedCoefficients(coeffs, x, ChunkPlan::make(coeffs.seq_len(), chunk_size));
}

// ---------------------------------------------------------------------------
// Individual stages

IntraChunkResult intra_chunk(const ChunkedCoefficients& chunks, std::size_t c) {
    const auto& coeffs = chunks.coefficients();
    const auto& plan = chunks.plan();
    if (c >= plan.num_chunks) fail(ErrorKind::Index, "chunk index out of range");
    const std::size_t start = plan.start(c);
    const std::size_t len = plan.length(c);

    IntraChunkResult out{SequenceTensor(coeffs.batch(), len, coeffs.heads()),
                         LatentState(coeffs.batch(), coeffs.heads(), coeffs.state_dim())};
    std::vector<double> block(len * len), y(len);
    for (std::size_t b = 0; b < coeffs.batch(); ++b) {
        for (std::size_t h = 0; h < coeffs.heads(); ++h) {
            const auto s = detail::make_slice(coeffs, chunks.input(), b, h);
            detail::fill_kernel_block(s, start, len, block);
            detail::diagonal_block(s, start, len, block, y, out.b_intra.vec(b, h));
            for (std::size_t i = 0; i < len; ++i) out.y_intra(b, i, h) = y[i];
        }
    }
    return out;
}

std::vector<LatentState> propagate_states(std::span<const LatentState> b_intra,
                                          std::span<const std::vector<double>> transitions,
                                          const LatentState& b0) {
    if (b_intra.size() != transitions.size()) {
        fail(ErrorKind::Dimension, "boundary transitions do not match the number of chunks");
    }
    const std::size_t slices = b0.batch() * b0.heads();
    std::vector<LatentState> states;
    states.reserve(b_intra.size() + 1);
    states.push_back(b0);
    for (std::size_t c = 0; c < b_intra.size(); ++c) {
        const auto& local = b_intra[c];
        if (local.batch() != b0.batch() || local.heads() != b0.heads() || local.state_dim() != b0.state_dim() ||
            transitions[c].size() != slices) {
            fail(ErrorKind::Dimension, "chunk state extents do not match the initial state");
        }
        LatentState next(b0.batch(), b0.heads(), b0.state_dim());
        for (std::size_t b = 0; b < b0.batch(); ++b) {
            for (std::size_t h = 0; h < b0.heads(); ++h) {
                detail::propagate_boundary(transitions[c][b * b0.heads() + h], states.back().vec(b, h),
                                           local.vec(b, h), next.vec(b, h));
            }
        }
        states.push_back(std::move(next));
    }
    return states;
}

SequenceTensor inter_chunk_correction(const ChunkedCoefficients& chunks, std::size_t c, const LatentState& b_prev) {
    const auto& coeffs = chunks.coefficients();
    const auto& plan = chunks.plan();
    if (c >= plan.num_chunks) fail(ErrorKind::Index, "chunk index out of range");
    if (b_prev.batch() != coeffs.batch() || b_prev.heads() != coeffs.heads() ||
        b_prev.state_dim() != coeffs.state_dim()) {
        fail(ErrorKind::Dimension, "boundary state extents do not match coefficients");
    }
    const std::size_t start = plan.start(c);
    const std::size_t len = plan.length(c);
    SequenceTensor out(coeffs.batch(), len, coeffs.heads());
    std::vector<double> col(len), y(len);
    for (std::size_t b = 0; b < coeffs.batch(); ++b) {
        for (std::size_t h = 0; h < coeffs.heads(); ++h) {
            const auto s = detail::make_slice(coeffs, chunks.input(), b, h);
            detail::entry_column(s, start, len, col);
            detail::boundary_readout(s, start, len, col, b_prev.vec(b, h), y);
            for (std::size_t i = 0; i < len; ++i) out(b, i, h) = y[i];
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Fused forward pass
//
// Stage buffers are laid out slice-major ([b*H + h][...]) so every
// (slice, chunk) work item writes a disjoint range.

ScanResult chunked_forward(const SsmCoefficients& coeffs, const SequenceTensor& x, const LatentState& h0,
                           const ChunkOptions& options) {
    check_kernel_inputs(coeffs, x, h0);
    const ChunkPlan plan = ChunkPlan::make(coeffs.seq_len(), options.chunk_size);
    const std::size_t heads = coeffs.heads();
    const std::size_t steps = plan.seq_len;
    const std::size_t n_state = coeffs.state_dim();
    const std::size_t n_chunks = plan.num_chunks;
    const std::size_t q = plan.chunk_size;
    const std::size_t slices = coeffs.batch() * heads;
    const std::size_t items = slices * n_chunks;
    MemoryLedger* ledger = options.instruments.ledger;

    const detail::BlockFaults faults{options.fault == FaultMode::IntraMask,
                                     options.fault == FaultMode::RowSelector};
    auto slice_of = [&](std::size_t sidx) { return detail::make_slice(coeffs, x, sidx / heads, sidx % heads); };

    std::vector<std::uint64_t> item_flops(items, 0);
    FlopCounter flops;

    // Stage 1: all diagonal blocks are materialized at once.
    const std::size_t block_stride = (n_chunks - 1) * q * q + plan.last_chunk_len * plan.last_chunk_len;
    std::vector<double> blocks(slices * block_stride);
    std::vector<double> y_intra(slices * steps);
    std::vector<double> b_intra(items * n_state);
    auto blocks_hold = track(ledger, blocks.size());
    auto y_intra_hold = track(ledger, y_intra.size());
    auto b_intra_hold = track(ledger, b_intra.size());

    detail::parallel_for(items, options.workers, [&](std::size_t item) {
        const std::size_t sidx = item / n_chunks;
        const std::size_t c = item % n_chunks;
        const std::size_t start = plan.start(c);
        const std::size_t len = plan.length(c);
        const auto s = slice_of(sidx);
        std::span<double> block(blocks.data() + sidx * block_stride + c * q * q, len * len);
        std::uint64_t count = detail::fill_kernel_block(s, start, len, block);
        count += detail::diagonal_block(s, start, len, block, std::span(y_intra.data() + sidx * steps + start, len),
                                        std::span(b_intra.data() + item * n_state, n_state), faults);
        item_flops[item] = count;
    });
    for (auto& f : item_flops) flops.intra += std::exchange(f, 0);
    blocks_hold.reset();
    std::vector<double>().swap(blocks);

    // Entry transitions of every chunk (the chunk-wise kernel columns).
    std::vector<double> cols(slices * steps);
    auto cols_hold = track(ledger, cols.size());
    detail::parallel_for(items, options.workers, [&](std::size_t item) {
        const std::size_t sidx = item / n_chunks;
        const std::size_t c = item % n_chunks;
        item_flops[item] = detail::entry_column(slice_of(sidx), plan.start(c), plan.length(c),
                                                std::span(cols.data() + sidx * steps + plan.start(c), plan.length(c)));
    });
    for (auto& f : item_flops) flops.inter += std::exchange(f, 0);

    // Stage 2: sequential over chunks within each slice.
    std::vector<double> boundary(slices * (n_chunks + 1) * n_state);
    auto boundary_hold = track(ledger, boundary.size());
    for (std::size_t sidx = 0; sidx < slices; ++sidx) {
        double* states = boundary.data() + sidx * (n_chunks + 1) * n_state;
        const auto init = h0.vec(sidx / heads, sidx % heads);
        std::copy(init.begin(), init.end(), states);
        for (std::size_t c = 0; c < n_chunks; ++c) {
            const std::size_t last = plan.start(c) + plan.length(c) - 1;
            const double transition = options.fault == FaultMode::Transition ? 1.0 : cols[sidx * steps + last];
            flops.propagate += detail::propagate_boundary(
                transition, std::span<const double>(states + c * n_state, n_state),
                std::span<const double>(b_intra.data() + (sidx * n_chunks + c) * n_state, n_state),
                std::span<double>(states + (c + 1) * n_state, n_state));
        }
    }
    b_intra_hold.reset();
    std::vector<double>().swap(b_intra);

    // Stage 3: correction from the incoming boundary state of every chunk.
    std::vector<double> y_inter(slices * steps, 0.0);
    auto y_inter_hold = track(ledger, y_inter.size());
    if (options.fault != FaultMode::InterCorrection) {
        detail::parallel_for(items, options.workers, [&](std::size_t item) {
            const std::size_t sidx = item / n_chunks;
            const std::size_t c = item % n_chunks;
            const std::size_t start = plan.start(c);
            const std::size_t len = plan.length(c);
            const double* prev = boundary.data() + (sidx * (n_chunks + 1) + c) * n_state;
            item_flops[item] = detail::boundary_readout(
                slice_of(sidx), start, len, std::span<const double>(cols.data() + sidx * steps + start, len),
                std::span<const double>(prev, n_state), std::span(y_inter.data() + sidx * steps + start, len));
        });
        for (auto& f : item_flops) flops.inter += std::exchange(f, 0);
    }

    // Assembly.
    ScanResult out{SequenceTensor(coeffs.batch(), steps, heads), LatentState(coeffs.batch(), heads, n_state)};
    auto out_hold = track(ledger, out.y.size() + out.final_state.size());
    for (std::size_t sidx = 0; sidx < slices; ++sidx) {
        const std::size_t b = sidx / heads;
        const std::size_t h = sidx % heads;
        for (std::size_t t = 0; t < steps; ++t) out.y(b, t, h) = y_intra[sidx * steps + t] + y_inter[sidx * steps + t];
        const double* last = boundary.data() + (sidx * (n_chunks + 1) + n_chunks) * n_state;
        std::copy(last, last + n_state, out.final_state.vec(b, h).begin());
    }
    if (options.instruments.flops) *options.instruments.flops += flops;
    return out;
}

}  // namespace ssdchunk
