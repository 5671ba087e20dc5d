// SPDX-License-Identifier: Apache-2.0
//
// Single-layer SSD kernel in its two dual forms:
//
//   recurrent:  h_t = a_t h_{t-1} + B_t x_t,   y_t = C_t^T h_t
//   dense:      y = (L ∘ C B^T) x + [C_t^T A^x_{t:0} h0]_t
//
// with the kernel matrix L[i][j] = a_{j+1} ... a_i (i > j), 1 (i = j),
// 0 (i < j).

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ssdchunk/ledger.hpp"
#include "ssdchunk/tensor.hpp"

namespace ssdchunk {

inline constexpr std::size_t kDefaultDenseLimit = 4096;

struct ScanResult {
    SequenceTensor y;
    LatentState final_state;
};

// Optional instrumentation attached to a kernel call.
struct Instruments {
    MemoryLedger* ledger = nullptr;
    FlopCounter* flops = nullptr;
};

// A^x_{i:j} over transitions a_1..a_T stored as a[0..T-1]. Indices are
// 1-based positions with 0 denoting the initial-state boundary.
double cumulative_transition(std::span<const double> a, std::size_t i, std::size_t j);

// Lower-triangular T x T kernel matrix, 0-based: at(i, j) == L_{i+1, j+1}.
class KernelMatrix {
public:
    KernelMatrix() = default;
    KernelMatrix(std::size_t size, std::vector<double> entries);

    std::size_t size() const noexcept { return size_; }
    double at(std::size_t i, std::size_t j) const { return entries_[i * size_ + j]; }
    std::span<const double> row(std::size_t i) const { return {entries_.data() + i * size_, size_}; }
    std::span<const double> entries() const noexcept { return entries_; }

private:
    std::size_t size_ = 0;
    std::vector<double> entries_;
};

KernelMatrix build_kernel_matrix(std::span<const double> a);

ScanResult recurrent_scan(const SsmCoefficients& coeffs, const SequenceTensor& x,
                          const LatentState& h0, Instruments instruments = {});

// Materializes a T x T block per (b, h) slice. T > dense_limit -> Capacity.
ScanResult dense_dual(const SsmCoefficients& coeffs, const SequenceTensor& x,
                      const LatentState& h0, std::size_t dense_limit = kDefaultDenseLimit,
                      Instruments instruments = {});

// Validation shared by every kernel entry point.
void check_kernel_inputs(const SsmCoefficients& coeffs, const SequenceTensor& x,
                         const LatentState& h0);

}  // namespace ssdchunk
