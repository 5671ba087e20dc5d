// SPDX-License-Identifier: Apache-2.0
//
// Dense value types shared by every module:
//   SequenceTensor  [batch, time, channel]  (channel = head for SSD inputs,
//                                            model width d for hidden states)
//   SsmCoefficients a [b,t,h], B/C [b,t,h,n]
//   LatentState     [b,h,n]
// All storage is row-major std::vector<double>.

#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace ssdchunk {

class SequenceTensor {
public:
    SequenceTensor() = default;
    SequenceTensor(std::size_t batch, std::size_t seq_len, std::size_t channels);
    SequenceTensor(std::size_t batch, std::size_t seq_len, std::size_t channels,
                   std::vector<double> values);

    std::size_t batch() const noexcept { return batch_; }
    std::size_t seq_len() const noexcept { return seq_len_; }
    std::size_t channels() const noexcept { return channels_; }
    std::size_t size() const noexcept { return values_.size(); }

    double& operator()(std::size_t b, std::size_t t, std::size_t c) {
        return values_[(b * seq_len_ + t) * channels_ + c];
    }
    double operator()(std::size_t b, std::size_t t, std::size_t c) const {
        return values_[(b * seq_len_ + t) * channels_ + c];
    }

    std::span<double> row(std::size_t b, std::size_t t) {
        return {values_.data() + (b * seq_len_ + t) * channels_, channels_};
    }
    std::span<const double> row(std::size_t b, std::size_t t) const {
        return {values_.data() + (b * seq_len_ + t) * channels_, channels_};
    }

    std::span<double> values() noexcept { return values_; }
    std::span<const double> values() const noexcept { return values_; }

    // Copy of time steps [start, start + len).
    SequenceTensor slice(std::size_t start, std::size_t len) const;
    // Writes `part` into time steps [start, start + part.seq_len()).
    void assign(std::size_t start, const SequenceTensor& part);

    // Throws Validation on NaN/Inf.
    void check_finite(const char* what) const;

    friend bool operator==(const SequenceTensor&, const SequenceTensor&) = default;

private:
    std::size_t batch_ = 0;
    std::size_t seq_len_ = 0;
    std::size_t channels_ = 0;
    std::vector<double> values_;
};

// Time-variant SSD coefficients. A_t = a_t * I with a_t > 0.
class SsmCoefficients {
public:
    SsmCoefficients() = default;
    // a = 1, B = C = 0.
    SsmCoefficients(std::size_t batch, std::size_t seq_len, std::size_t heads,
                    std::size_t state_dim);
    // Validates extents, finiteness and positivity of a.
    SsmCoefficients(std::size_t batch, std::size_t seq_len, std::size_t heads,
                    std::size_t state_dim, std::vector<double> a, std::vector<double> b,
                    std::vector<double> c);

    std::size_t batch() const noexcept { return batch_; }
    std::size_t seq_len() const noexcept { return seq_len_; }
    std::size_t heads() const noexcept { return heads_; }
    std::size_t state_dim() const noexcept { return state_dim_; }
    std::size_t element_count() const noexcept { return a_.size() + b_.size() + c_.size(); }

    double& a(std::size_t b, std::size_t t, std::size_t h) { return a_[(b * seq_len_ + t) * heads_ + h]; }
    double a(std::size_t b, std::size_t t, std::size_t h) const { return a_[(b * seq_len_ + t) * heads_ + h]; }

    std::span<double> b_row(std::size_t b, std::size_t t, std::size_t h) {
        return {b_.data() + row_offset(b, t, h), state_dim_};
    }
    std::span<const double> b_row(std::size_t b, std::size_t t, std::size_t h) const {
        return {b_.data() + row_offset(b, t, h), state_dim_};
    }
    std::span<double> c_row(std::size_t b, std::size_t t, std::size_t h) {
        return {c_.data() + row_offset(b, t, h), state_dim_};
    }
    std::span<const double> c_row(std::size_t b, std::size_t t, std::size_t h) const {
        return {c_.data() + row_offset(b, t, h), state_dim_};
    }

    std::span<const double> a_values() const noexcept { return a_; }
    std::span<const double> b_values() const noexcept { return b_; }
    std::span<const double> c_values() const noexcept { return c_; }

    // Transition scalars a_1..a_T of one (b, h) slice.
    std::vector<double> transitions(std::size_t b, std::size_t h) const;

    SsmCoefficients slice(std::size_t start, std::size_t len) const;
    void assign(std::size_t start, const SsmCoefficients& part);

    // Throws Validation on non-finite values or a_t <= 0.
    void validate() const;

    friend bool operator==(const SsmCoefficients&, const SsmCoefficients&) = default;

private:
    std::size_t row_offset(std::size_t b, std::size_t t, std::size_t h) const {
        return ((b * seq_len_ + t) * heads_ + h) * state_dim_;
    }

    std::size_t batch_ = 0;
    std::size_t seq_len_ = 0;
    std::size_t heads_ = 0;
    std::size_t state_dim_ = 0;
    std::vector<double> a_;
    std::vector<double> b_;
    std::vector<double> c_;
};

class LatentState {
public:
    LatentState() = default;
    LatentState(std::size_t batch, std::size_t heads, std::size_t state_dim);
    LatentState(std::size_t batch, std::size_t heads, std::size_t state_dim,
                std::vector<double> values);

    std::size_t batch() const noexcept { return batch_; }
    std::size_t heads() const noexcept { return heads_; }
    std::size_t state_dim() const noexcept { return state_dim_; }
    std::size_t size() const noexcept { return values_.size(); }

    double& operator()(std::size_t b, std::size_t h, std::size_t n) {
        return values_[(b * heads_ + h) * state_dim_ + n];
    }
    double operator()(std::size_t b, std::size_t h, std::size_t n) const {
        return values_[(b * heads_ + h) * state_dim_ + n];
    }

    std::span<double> vec(std::size_t b, std::size_t h) {
        return {values_.data() + (b * heads_ + h) * state_dim_, state_dim_};
    }
    std::span<const double> vec(std::size_t b, std::size_t h) const {
        return {values_.data() + (b * heads_ + h) * state_dim_, state_dim_};
    }

    std::span<double> values() noexcept { return values_; }
    std::span<const double> values() const noexcept { return values_; }

    void check_finite(const char* what) const;

    friend bool operator==(const LatentState&, const LatentState&) = default;

private:
    std::size_t batch_ = 0;
    std::size_t heads_ = 0;
    std::size_t state_dim_ = 0;
    std::vector<double> values_;
};

// Throws Dimension unless coeffs, x (channels = heads) and h0 agree.
void check_extents(const SsmCoefficients& coeffs, const SequenceTensor& x, const LatentState& h0);

// max_i |got_i - want_i| / max_i |want_i|; absolute error when `want` is all zero.
double relative_error(std::span<const double> got, std::span<const double> want);

}  // namespace ssdchunk
