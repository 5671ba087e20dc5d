// SPDX-License-Identifier: Apache-2.0
//
// Reference implementations used as test oracles. Written directly from the
// recurrence and the closed-form sum, without touching library kernels.
#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "ssdchunk/rng.hpp"
#include "ssdchunk/tensor.hpp"

namespace oracle {

using ssdchunk::LatentState;
using ssdchunk::SequenceTensor;
using ssdchunk::SsmCoefficients;

struct Scan {
    SequenceTensor y;
    LatentState h;
};

// h_t = a_t h_{t-1} + B_t x_t,  y_t = C_t . h_t
inline Scan naive_recurrence(const SsmCoefficients& k, const SequenceTensor& x, const LatentState& h0) {
    const std::size_t B = k.batch(), T = k.seq_len(), H = k.heads(), N = k.state_dim();
    Scan out{SequenceTensor(B, T, H), h0};
    for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t h = 0; h < H; ++h) {
            std::vector<double> state(N);
            for (std::size_t n = 0; n < N; ++n) state[n] = h0(b, h, n);
            for (std::size_t t = 0; t < T; ++t) {
                double acc = 0.0;
                for (std::size_t n = 0; n < N; ++n) {
                    state[n] = k.a(b, t, h) * state[n] + k.b_row(b, t, h)[n] * x(b, t, h);
                    acc += k.c_row(b, t, h)[n] * state[n];
                }
                out.y(b, t, h) = acc;
            }
            for (std::size_t n = 0; n < N; ++n) out.h(b, h, n) = state[n];
        }
    }
    return out;
}

// y_i = sum_{j<=i} C_i.B_j (prod_{k=j+1..i} a_k) x_j + C_i.(prod_{k=1..i} a_k) h0
inline SequenceTensor closed_form_sum(const SsmCoefficients& k, const SequenceTensor& x, const LatentState& h0) {
    const std::size_t B = k.batch(), T = k.seq_len(), H = k.heads(), N = k.state_dim();
    SequenceTensor y(B, T, H);
    for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t h = 0; h < H; ++h) {
            for (std::size_t i = 0; i < T; ++i) {
                double acc = 0.0;
                for (std::size_t j = 0; j <= i; ++j) {
                    double decay = 1.0;
                    for (std::size_t m = j + 1; m <= i; ++m) decay *= k.a(b, m, h);
                    double cb = 0.0;
                    for (std::size_t n = 0; n < N; ++n) cb += k.c_row(b, i, h)[n] * k.b_row(b, j, h)[n];
                    acc += cb * decay * x(b, j, h);
                }
                double decay0 = 1.0;
                for (std::size_t m = 0; m <= i; ++m) decay0 *= k.a(b, m, h);
                for (std::size_t n = 0; n < N; ++n) acc += k.c_row(b, i, h)[n] * decay0 * h0(b, h, n);
                y(b, i, h) = acc;
            }
        }
    }
    return y;
}

inline double max_rel(const std::vector<double>& got, const std::vector<double>& want) {
    double diff = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < want.size(); ++i) {
        diff = std::fmax(diff, std::fabs(got[i] - want[i]));
        scale = std::fmax(scale, std::fabs(want[i]));
    }
    return scale > 0.0 ? diff / scale : diff;
}

template <class A, class B>
double max_rel(const A& got, const B& want) {
    return max_rel(std::vector<double>(got.begin(), got.end()), std::vector<double>(want.begin(), want.end()));
}

struct Instance {
    SsmCoefficients coeffs;
    SequenceTensor x;
    LatentState h0;
};

// a in (0, 1) via exp(-softplus(z)), z ~ U(-5, 2); B, C, x, h0 ~ U(-1, 1).
inline Instance random_instance(std::uint64_t seed, std::size_t B, std::size_t T, std::size_t H, std::size_t N,
                                bool nonzero_h0) {
    ssdchunk::SplitMix64 rng(seed);
    Instance inst{SsmCoefficients(B, T, H, N), SequenceTensor(B, T, H), LatentState(B, H, N)};
    for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t t = 0; t < T; ++t) {
            for (std::size_t h = 0; h < H; ++h) {
                const double z = rng.uniform(-5.0, 2.0);
                inst.coeffs.a(b, t, h) = 1.0 / (1.0 + std::exp(z));
                for (auto& v : inst.coeffs.b_row(b, t, h)) v = rng.uniform(-1.0, 1.0);
                for (auto& v : inst.coeffs.c_row(b, t, h)) v = rng.uniform(-1.0, 1.0);
                inst.x(b, t, h) = rng.uniform(-1.0, 1.0);
            }
        }
    }
    if (nonzero_h0) {
        for (auto& v : inst.h0.values()) v = rng.uniform(-1.0, 1.0);
    }
    return inst;
}

}  // namespace oracle
