// SPDX-License-Identifier: Apache-2.0

#include "ssdchunk/ssd_core.hpp"

#include <cmath>
#include <string>

#include "ssdchunk/detail/kernels.hpp"
#include "ssdchunk/errors.hpp"

namespace ssdchunk {

double cumulative_transition(std::span<const double> a, std::size_t i, std::size_t j) {
    if (i > a.size() || j > a.size()) fail(ErrorKind::Index, "cumulative_transition index out of range");
    if (i < j) return 0.0;
    // Same multiplication order as a kernel-matrix row: a_i first, walking down.
    double product = 1.0;
    for (std::size_t k = i; k > j; --k) product *= a[k - 1];
    return product;
}

KernelMatrix::KernelMatrix(std::size_t size, std::vector<double> entries)
    : size_(size), entries_(std::move(entries)) {
    if (entries_.size() != size * size) fail(ErrorKind::Dimension, "kernel matrix extent mismatch");
}

KernelMatrix build_kernel_matrix(std::span<const double> a) {
    if (a.empty()) fail(ErrorKind::Validation, "kernel matrix needs at least one transition");
    for (double v : a) {
        if (!(v > 0.0) || !std::isfinite(v)) {
            fail(ErrorKind::Validation, "transition scalars must be finite and strictly positive");
        }
    }
    const std::size_t n = a.size();
    std::vector<double> entries(n * n);
    detail::Slice s;
    s.a = a.data();
    detail::fill_kernel_block(s, 0, n, entries);
    return KernelMatrix(n, std::move(entries));
}

void check_kernel_inputs(const SsmCoefficients& coeffs, const SequenceTensor& x, const LatentState& h0) {
    check_extents(coeffs, x, h0);
    coeffs.validate();
    x.check_finite("input sequence");
    h0.check_finite("initial state");
}

ScanResult recurrent_scan(const SsmCoefficients& coeffs, const SequenceTensor& x, const LatentState& h0,
                          Instruments instruments) {
    check_kernel_inputs(coeffs, x, h0);
    const std::size_t batch = coeffs.batch();
    const std::size_t heads = coeffs.heads();
    const std::size_t steps = coeffs.seq_len();
    const std::size_t n_state = coeffs.state_dim();

    ScanResult out{SequenceTensor(batch, steps, heads), h0};
    auto y_hold = track(instruments.ledger, out.y.size());
    auto h_hold = track(instruments.ledger, out.final_state.size());

    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t h = 0; h < heads; ++h) {
            const auto s = detail::make_slice(coeffs, x, b, h);
            auto state = out.final_state.vec(b, h);
            for (std::size_t t = 0; t < steps; ++t) {
                const double a_t = s.a_at(t);
                const double x_t = s.x_at(t);
                const auto b_t = s.b_at(t);
                for (std::size_t n = 0; n < n_state; ++n) state[n] = a_t * state[n] + b_t[n] * x_t;
                out.y(b, t, h) = detail::dot(s.c_at(t), state);
            }
        }
    }
    if (instruments.flops) instruments.flops->propagate += 2ULL * batch * heads * steps * n_state;
    return out;
}

ScanResult dense_dual(const SsmCoefficients& coeffs, const SequenceTensor& x, const LatentState& h0,
                      std::size_t dense_limit, Instruments instruments) {
    check_kernel_inputs(coeffs, x, h0);
    const std::size_t steps = coeffs.seq_len();
    if (steps > dense_limit) {
        fail(ErrorKind::Capacity, "dense dual length " + std::to_string(steps) + " exceeds dense limit " +
                                      std::to_string(dense_limit));
    }
    const std::size_t batch = coeffs.batch();
    const std::size_t heads = coeffs.heads();
    const std::size_t n_state = coeffs.state_dim();

    ScanResult out{SequenceTensor(batch, steps, heads), LatentState(batch, heads, n_state)};
    auto y_hold = track(instruments.ledger, out.y.size() + out.final_state.size());

    // One slice at a time: T^2 block plus per-position scratch.
    std::vector<double> block(steps * steps);
    std::vector<double> local_y(steps), readout(steps), col(steps), local_state(n_state);
    auto scratch_hold = track(instruments.ledger, block.size() + 3 * steps + n_state);

    FlopCounter flops;
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t h = 0; h < heads; ++h) {
            const auto s = detail::make_slice(coeffs, x, b, h);
            flops.intra += detail::fill_kernel_block(s, 0, steps, block);
            flops.intra += detail::diagonal_block(s, 0, steps, block, local_y, local_state);
            flops.inter += detail::entry_column(s, 0, steps, col);
            flops.inter += detail::boundary_readout(s, 0, steps, col, h0.vec(b, h), readout);
            flops.propagate += detail::propagate_boundary(col[steps - 1], h0.vec(b, h), local_state,
                                                          out.final_state.vec(b, h));
            for (std::size_t t = 0; t < steps; ++t) out.y(b, t, h) = local_y[t] + readout[t];
        }
    }
    if (instruments.flops) *instruments.flops += flops;
    return out;
}

}  // namespace ssdchunk
