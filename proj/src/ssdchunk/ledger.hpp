// SPDX-License-Identifier: Apache-2.0
//
// Instrumentation for activation memory and arithmetic work.
//
// The ledger counts live activation scalars. Every activation buffer in the
// forward path is registered through a Hold for exactly as long as it is
// alive; model parameters, token ids and the buffer handed back to the
// caller are never registered. Per-layer recurrent states carried by the
// vertical schedule are tracked in their own counter.

#pragma once

#include <cstddef>
#include <cstdint>

namespace ssdchunk {

class MemoryLedger {
public:
    class Hold {
    public:
        Hold() = default;
        Hold(MemoryLedger* ledger, std::size_t elements);
        Hold(Hold&& other) noexcept;
        Hold& operator=(Hold&& other) noexcept;
        Hold(const Hold&) = delete;
        Hold& operator=(const Hold&) = delete;
        ~Hold() { reset(); }

        void reset() noexcept;
        std::size_t elements() const noexcept { return elements_; }

    private:
        MemoryLedger* ledger_ = nullptr;
        std::size_t elements_ = 0;
    };

    void acquire(std::size_t elements) noexcept;
    void release(std::size_t elements) noexcept;

    std::size_t current_elements() const noexcept { return current_; }
    std::size_t peak_elements() const noexcept { return peak_; }

    void set_state_elements(std::size_t elements) noexcept { state_elements_ = elements; }
    std::size_t per_layer_state_elements() const noexcept { return state_elements_; }

    // Activation peak plus carried per-layer states.
    std::size_t total_peak() const noexcept { return peak_ + state_elements_; }

private:
    std::size_t current_ = 0;
    std::size_t peak_ = 0;
    std::size_t state_elements_ = 0;
};

// Null-tolerant helper: returns an empty hold when no ledger is attached.
inline MemoryLedger::Hold track(MemoryLedger* ledger, std::size_t elements) {
    return ledger ? MemoryLedger::Hold(ledger, elements) : MemoryLedger::Hold();
}

// Multiply-accumulate counts per chunked stage.
struct FlopCounter {
    std::uint64_t intra = 0;
    std::uint64_t propagate = 0;
    std::uint64_t inter = 0;

    std::uint64_t total() const noexcept { return intra + propagate + inter; }

    FlopCounter& operator+=(const FlopCounter& other) noexcept {
        intra += other.intra;
        propagate += other.propagate;
        inter += other.inter;
        return *this;
    }
    friend bool operator==(const FlopCounter&, const FlopCounter&) = default;
};

}  // namespace ssdchunk
