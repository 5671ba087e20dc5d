// SPDX-License-Identifier: Apache-2.0

#include "ssdchunk/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "ssdchunk/errors.hpp"

namespace ssdchunk {

const char* to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::Dimension: return "dimension error";
        case ErrorKind::Validation: return "validation error";
        case ErrorKind::Index: return "index error";
        case ErrorKind::Capacity: return "capacity error";
        case ErrorKind::Integrity: return "integrity error";
        case ErrorKind::Format: return "format error";
        case ErrorKind::Io: return "io error";
    }
    return "error";
}

namespace {

bool all_finite(std::span<const double> values) {
    return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

void require_positive_extent(std::size_t extent, const char* name) {
    if (extent == 0) fail(ErrorKind::Validation, std::string(name) + " must be >= 1");
}

}  // namespace

// ---------------------------------------------------------------------------
// SequenceTensor

SequenceTensor::SequenceTensor(std::size_t batch, std::size_t seq_len, std::size_t channels)
    : batch_(batch), seq_len_(seq_len), channels_(channels), values_(batch * seq_len * channels, 0.0) {}

SequenceTensor::SequenceTensor(std::size_t batch, std::size_t seq_len, std::size_t channels,
                               std::vector<double> values)
    : batch_(batch), seq_len_(seq_len), channels_(channels), values_(std::move(values)) {
    if (values_.size() != batch * seq_len * channels) {
        fail(ErrorKind::Dimension, "sequence tensor data extent does not match its dims");
    }
}

SequenceTensor SequenceTensor::slice(std::size_t start, std::size_t len) const {
    if (start + len > seq_len_) fail(ErrorKind::Index, "sequence slice out of range");
    SequenceTensor out(batch_, len, channels_);
    for (std::size_t b = 0; b < batch_; ++b) {
        auto first = values_.begin() + static_cast<std::ptrdiff_t>((b * seq_len_ + start) * channels_);
        std::copy(first, first + static_cast<std::ptrdiff_t>(len * channels_),
                  out.values_.begin() + static_cast<std::ptrdiff_t>(b * len * channels_));
    }
    return out;
}

void SequenceTensor::assign(std::size_t start, const SequenceTensor& part) {
    if (part.batch_ != batch_ || part.channels_ != channels_) {
        fail(ErrorKind::Dimension, "sequence assign extent mismatch");
    }
    if (start + part.seq_len_ > seq_len_) fail(ErrorKind::Index, "sequence assign out of range");
    for (std::size_t b = 0; b < batch_; ++b) {
        auto first = part.values_.begin() + static_cast<std::ptrdiff_t>(b * part.seq_len_ * channels_);
        std::copy(first, first + static_cast<std::ptrdiff_t>(part.seq_len_ * channels_),
                  values_.begin() + static_cast<std::ptrdiff_t>((b * seq_len_ + start) * channels_));
    }
}

void SequenceTensor::check_finite(const char* what) const {
    if (!all_finite(values_)) fail(ErrorKind::Validation, std::string(what) + " contains non-finite values");
}

// ---------------------------------------------------------------------------
// SsmCoefficients

SsmCoefficients::SsmCoefficients(std::size_t batch, std::size_t seq_len, std::size_t heads,
                                 std::size_t state_dim)
    : batch_(batch),
      seq_len_(seq_len),
      heads_(heads),
      state_dim_(state_dim),
      a_(batch * seq_len * heads, 1.0),
      b_(batch * seq_len * heads * state_dim, 0.0),
      c_(batch * seq_len * heads * state_dim, 0.0) {}

SsmCoefficients::SsmCoefficients(std::size_t batch, std::size_t seq_len, std::size_t heads,
                                 std::size_t state_dim, std::vector<double> a,
                                 std::vector<double> b, std::vector<double> c)
    : batch_(batch),
      seq_len_(seq_len),
      heads_(heads),
      state_dim_(state_dim),
      a_(std::move(a)),
      b_(std::move(b)),
      c_(std::move(c)) {
    const std::size_t rows = batch * seq_len * heads;
    if (a_.size() != rows || b_.size() != rows * state_dim || c_.size() != rows * state_dim) {
        fail(ErrorKind::Dimension, "coefficient data extents do not match their dims");
    }
    validate();
}

std::vector<double> SsmCoefficients::transitions(std::size_t b, std::size_t h) const {
    std::vector<double> out(seq_len_);
    for (std::size_t t = 0; t < seq_len_; ++t) out[t] = a(b, t, h);
    return out;
}

SsmCoefficients SsmCoefficients::slice(std::size_t start, std::size_t len) const {
    if (start + len > seq_len_) fail(ErrorKind::Index, "coefficient slice out of range");
    SsmCoefficients out(batch_, len, heads_, state_dim_);
    for (std::size_t b = 0; b < batch_; ++b) {
        for (std::size_t t = 0; t < len; ++t) {
            for (std::size_t h = 0; h < heads_; ++h) {
                out.a(b, t, h) = a(b, start + t, h);
                std::ranges::copy(b_row(b, start + t, h), out.b_row(b, t, h).begin());
                std::ranges::copy(c_row(b, start + t, h), out.c_row(b, t, h).begin());
            }
        }
    }
    return out;
}

void SsmCoefficients::assign(std::size_t start, const SsmCoefficients& part) {
    if (part.batch_ != batch_ || part.heads_ != heads_ || part.state_dim_ != state_dim_) {
        fail(ErrorKind::Dimension, "coefficient assign extent mismatch");
    }
    if (start + part.seq_len_ > seq_len_) fail(ErrorKind::Index, "coefficient assign out of range");
    for (std::size_t b = 0; b < batch_; ++b) {
        for (std::size_t t = 0; t < part.seq_len_; ++t) {
            for (std::size_t h = 0; h < heads_; ++h) {
                a(b, start + t, h) = part.a(b, t, h);
                std::ranges::copy(part.b_row(b, t, h), b_row(b, start + t, h).begin());
                std::ranges::copy(part.c_row(b, t, h), c_row(b, start + t, h).begin());
            }
        }
    }
}

void SsmCoefficients::validate() const {
    require_positive_extent(batch_, "batch size");
    require_positive_extent(seq_len_, "sequence length");
    require_positive_extent(heads_, "head count");
    require_positive_extent(state_dim_, "state dimension");
    if (!all_finite(a_) || !all_finite(b_) || !all_finite(c_)) {
        fail(ErrorKind::Validation, "coefficients contain non-finite values");
    }
    if (!std::all_of(a_.begin(), a_.end(), [](double v) { return v > 0.0; })) {
        fail(ErrorKind::Validation, "transition scalars must be strictly positive");
    }
}

// ---------------------------------------------------------------------------
// LatentState

LatentState::LatentState(std::size_t batch, std::size_t heads, std::size_t state_dim)
    : batch_(batch), heads_(heads), state_dim_(state_dim), values_(batch * heads * state_dim, 0.0) {}

LatentState::LatentState(std::size_t batch, std::size_t heads, std::size_t state_dim,
                         std::vector<double> values)
    : batch_(batch), heads_(heads), state_dim_(state_dim), values_(std::move(values)) {
    if (values_.size() != batch * heads * state_dim) {
        fail(ErrorKind::Dimension, "latent state data extent does not match its dims");
    }
}

void LatentState::check_finite(const char* what) const {
    if (!all_finite(values_)) fail(ErrorKind::Validation, std::string(what) + " contains non-finite values");
}

// ---------------------------------------------------------------------------

void check_extents(const SsmCoefficients& coeffs, const SequenceTensor& x, const LatentState& h0) {
    if (x.batch() != coeffs.batch() || x.seq_len() != coeffs.seq_len() || x.channels() != coeffs.heads()) {
        fail(ErrorKind::Dimension, "input sequence extents do not match coefficients");
    }
    if (h0.batch() != coeffs.batch() || h0.heads() != coeffs.heads() ||
        h0.state_dim() != coeffs.state_dim()) {
        fail(ErrorKind::Dimension, "initial state extents do not match coefficients");
    }
}

double relative_error(std::span<const double> got, std::span<const double> want) {
    if (got.size() != want.size()) fail(ErrorKind::Dimension, "relative_error operands differ in size");
    double max_diff = 0.0;
    double max_ref = 0.0;
    for (std::size_t i = 0; i < got.size(); ++i) {
        if (!std::isfinite(got[i])) return std::numeric_limits<double>::infinity();
        max_diff = std::max(max_diff, std::abs(got[i] - want[i]));
        max_ref = std::max(max_ref, std::abs(want[i]));
    }
    return max_ref > 0.0 ? max_diff / max_ref : max_diff;
}

}  // namespace ssdchunk
