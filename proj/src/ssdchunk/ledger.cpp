// SPDX-License-Identifier: Apache-2.0

#include "ssdchunk/ledger.hpp"

#include <algorithm>
#include <utility>

namespace ssdchunk {

MemoryLedger::Hold::Hold(MemoryLedger* ledger, std::size_t elements)
    : ledger_(ledger), elements_(elements) {
    if (ledger_) ledger_->acquire(elements_);
}

MemoryLedger::Hold::Hold(Hold&& other) noexcept
    : ledger_(std::exchange(other.ledger_, nullptr)), elements_(std::exchange(other.elements_, 0)) {}

MemoryLedger::Hold& MemoryLedger::Hold::operator=(Hold&& other) noexcept {
    if (this != &other) {
        reset();
        ledger_ = std::exchange(other.ledger_, nullptr);
        elements_ = std::exchange(other.elements_, 0);
    }
    return *this;
}

void MemoryLedger::Hold::reset() noexcept {
    if (ledger_) ledger_->release(elements_);
    ledger_ = nullptr;
    elements_ = 0;
}

void MemoryLedger::acquire(std::size_t elements) noexcept {
    current_ += elements;
    peak_ = std::max(peak_, current_);
}

void MemoryLedger::release(std::size_t elements) noexcept {
    current_ -= std::min(current_, elements);
}

}  // namespace ssdchunk
