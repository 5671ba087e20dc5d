// SPDX-License-Identifier: Apache-2.0
//
// Per-(b, h) slice primitives shared by the dense dual and the chunked
// algorithm. Both paths call exactly these routines, so a single chunk
// spanning the whole sequence reproduces the dense dual bit for bit.
//
// Reductions over time and state index always run in ascending order.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "ssdchunk/tensor.hpp"

namespace ssdchunk::detail {

// Strided read-only view of one (b, h) slice of coefficients and input.
struct Slice {
    const double* a = nullptr;
    const double* x = nullptr;
    const double* b = nullptr;
    const double* c = nullptr;
    std::size_t scalar_stride = 1;  // step between time positions in a and x
    std::size_t row_stride = 1;     // step between time positions in B and C
    std::size_t state_dim = 1;

    double a_at(std::size_t t) const { return a[t * scalar_stride]; }
    double x_at(std::size_t t) const { return x[t * scalar_stride]; }
    std::span<const double> b_at(std::size_t t) const { return {b + t * row_stride, state_dim}; }
    std::span<const double> c_at(std::size_t t) const { return {c + t * row_stride, state_dim}; }
};

inline Slice make_slice(const SsmCoefficients& coeffs, const SequenceTensor& x, std::size_t b,
                        std::size_t h) {
    Slice s;
    s.a = coeffs.a_values().data() + b * coeffs.seq_len() * coeffs.heads() + h;
    s.x = x.values().data() + b * x.seq_len() * x.channels() + h;
    s.b = coeffs.b_row(b, 0, h).data();
    s.c = coeffs.c_row(b, 0, h).data();
    s.scalar_stride = coeffs.heads();
    s.row_stride = coeffs.heads() * coeffs.state_dim();
    s.state_dim = coeffs.state_dim();
    return s;
}

inline double dot(std::span<const double> u, std::span<const double> v) {
    double sum = 0.0;
    for (std::size_t n = 0; n < u.size(); ++n) sum += u[n] * v[n];
    return sum;
}

// Kernel block for positions [start, start + len), row-major len x len:
// block[i][j] = a_{start+j+1} * ... * a_{start+i} for j < i, 1 on the
// diagonal, 0 above. Each row is a running product walking left from the
// diagonal; no quotients of prefix products.
inline std::uint64_t fill_kernel_block(const Slice& s, std::size_t start, std::size_t len,
                                       std::span<double> block) {
    std::uint64_t mults = 0;
    for (std::size_t i = 0; i < len; ++i) {
        double* row = block.data() + i * len;
        row[i] = 1.0;
        for (std::size_t j = i; j-- > 0;) {
            row[j] = row[j + 1] * s.a_at(start + j + 1);
            ++mults;
        }
        for (std::size_t j = i + 1; j < len; ++j) row[j] = 0.0;
    }
    return mults;
}

struct BlockFaults {
    bool drop_kernel_mask = false;   // use C B^T without the kernel mask
    bool drop_row_selector = false;  // sum B_s x_s without the final-row weights
};

// Diagonal-block output and zero-entry boundary state:
//   y[i]  = sum_{j} (L ∘ C B^T)[i][j] x_j
//   state = B^T diag(L[len-1, :]) x
inline std::uint64_t diagonal_block(const Slice& s, std::size_t start, std::size_t len,
                                    std::span<const double> block, std::span<double> y,
                                    std::span<double> state, BlockFaults faults = {}) {
    std::uint64_t macs = 0;
    const std::size_t n_state = s.state_dim;
    for (std::size_t i = 0; i < len; ++i) {
        const auto c_i = s.c_at(start + i);
        const std::size_t upto = faults.drop_kernel_mask ? len : i + 1;
        double acc = 0.0;
        for (std::size_t j = 0; j < upto; ++j) {
            const double mask = faults.drop_kernel_mask ? 1.0 : block[i * len + j];
            acc += mask * dot(c_i, s.b_at(start + j)) * s.x_at(start + j);
        }
        y[i] = acc;
        macs += upto * (n_state + 2);
    }
    for (std::size_t n = 0; n < n_state; ++n) state[n] = 0.0;
    const double* last_row = block.data() + (len - 1) * len;
    for (std::size_t j = 0; j < len; ++j) {
        const double weight = faults.drop_row_selector ? s.x_at(start + j) : last_row[j] * s.x_at(start + j);
        const auto b_j = s.b_at(start + j);
        for (std::size_t n = 0; n < n_state; ++n) state[n] += weight * b_j[n];
    }
    macs += len * (n_state + 1);
    return macs;
}

// Cumulative transitions from the boundary before `start` to each position:
// col[i] = a_{start} * a_{start+1} * ... * a_{start+i} (0-based positions).
// col[len-1] is the whole-chunk transition used for state propagation.
inline std::uint64_t entry_column(const Slice& s, std::size_t start, std::size_t len,
                                  std::span<double> col) {
    double running = 1.0;
    for (std::size_t i = 0; i < len; ++i) {
        running *= s.a_at(start + i);
        col[i] = running;
    }
    return len;
}

// Output contribution of an incoming boundary state:
//   y[i] = col[i] * (C_{start+i} . prev)
inline std::uint64_t boundary_readout(const Slice& s, std::size_t start, std::size_t len,
                                      std::span<const double> col, std::span<const double> prev,
                                      std::span<double> y) {
    for (std::size_t i = 0; i < len; ++i) y[i] = col[i] * dot(s.c_at(start + i), prev);
    return len * (s.state_dim + 1);
}

// out = transition * prev + local
inline std::uint64_t propagate_boundary(double transition, std::span<const double> prev,
                                        std::span<const double> local, std::span<double> out) {
    for (std::size_t n = 0; n < out.size(); ++n) out[n] = transition * prev[n] + local[n];
    return out.size();
}

}  // namespace ssdchunk::detail
