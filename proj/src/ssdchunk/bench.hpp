// SPDX-License-Identifier: Apache-2.0
//
// Equivalence suite and runtime/memory sweeps.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ssdchunk/chunked.hpp"
#include "ssdchunk/layer_stack.hpp"

namespace ssdchunk {

// ---------------------------------------------------------------------------
// Equivalence

struct EquivalenceConfig {
    std::uint64_t seed = 42;
    std::size_t instances = 12;
    std::vector<std::size_t> seq_lens{7, 16, 33, 64, 100};  // cycled over instances
    std::vector<std::size_t> chunk_sizes{2, 4, 8, 16};
    std::vector<std::size_t> vertical_chunks{16, 32, 64};   // pairs with every Q dividing it
    std::size_t max_batch = 3;
    std::size_t max_heads = 3;
    std::size_t max_state = 6;
    std::size_t layers = 2;
    std::size_t d_model = 8;
    std::size_t vocab_size = 64;
    std::size_t dense_limit = kDefaultDenseLimit;
    double tolerance = 1e-9;
    FaultMode fault = FaultMode::None;
    std::size_t workers = 1;
};

struct CheckResult {
    std::size_t instance = 0;
    std::string name;  // "dense", "chunked Q=4", "vertical Q=4 V=16"
    std::size_t seq_len = 0;
    std::size_t num_chunks = 1;
    double rel_error = 0.0;
    bool passed = true;
};

struct InstanceSummary {
    std::size_t index = 0;
    std::size_t seq_len = 0;
    bool multi_chunk = false;
    bool passed = true;
};

struct EquivalenceReport {
    std::vector<CheckResult> checks;
    std::vector<InstanceSummary> instances;
    double max_rel_error = 0.0;

    std::size_t failed_checks() const;
    bool passed() const { return failed_checks() == 0; }
};

EquivalenceReport run_equivalence(const EquivalenceConfig& config,
                                  const std::function<void(const CheckResult&)>& on_check = {});

// ---------------------------------------------------------------------------
// Sweeps

enum class SweepStrategy { Recurrent, Dense, Horizontal, Vertical };

std::string_view to_string(SweepStrategy strategy) noexcept;
std::optional<SweepStrategy> parse_sweep_strategy(std::string_view name) noexcept;

struct SweepConfig {
    std::vector<std::size_t> seq_lens{64, 128, 256, 512, 1024};
    std::vector<std::size_t> batches{1, 8};
    std::vector<std::size_t> chunk_sizes{4, 8, 16, 32};
    std::vector<std::size_t> vertical_chunks;  // empty -> {Q, 2Q, 4Q} per Q
    std::vector<SweepStrategy> strategies{SweepStrategy::Recurrent, SweepStrategy::Dense,
                                          SweepStrategy::Horizontal, SweepStrategy::Vertical};
    std::size_t reps = 3;
    std::size_t warmup = 1;
    bool parallel = false;
    std::uint64_t token_seed = 1;
};

// One row per (cell, rep). Q is 0 for recurrent/dense cells, V is 0 for
// everything but vertical cells.
struct BenchRecord {
    std::string strategy;
    std::size_t seq_len = 0;
    std::size_t batch = 0;
    std::size_t chunk_size = 0;
    std::size_t vertical_chunk = 0;
    std::size_t rep = 0;
    double wall_time_s = 0.0;
    std::uint64_t peak_elems = 0;
    std::uint64_t flops_intra = 0;
    std::uint64_t flops_prop = 0;
    std::uint64_t flops_inter = 0;

    friend bool operator==(const BenchRecord&, const BenchRecord&) = default;
};

inline constexpr std::string_view kSweepCsvHeader =
    "strategy,T,batch,Q,V,rep,wall_time_s,peak_elems,flops_intra,flops_prop,flops_inter";

// Rows come back sorted by (strategy, T, batch, Q, V, rep).
std::vector<BenchRecord> run_sweep(const StackedModel& model, const SweepConfig& config,
                                   const std::function<void(const std::string&)>& log = {});

void write_sweep_csv(std::ostream& out, std::span<const BenchRecord> records);
// Throws Format unless the header matches exactly and every row parses.
std::vector<BenchRecord> parse_sweep_csv(std::istream& in);

struct CellSummary {
    std::string strategy;
    std::size_t seq_len = 0;
    std::size_t batch = 0;
    std::size_t chunk_size = 0;
    std::size_t vertical_chunk = 0;
    std::size_t reps = 0;
    double mean_s = 0.0;
    double min_s = 0.0;
    double max_s = 0.0;
    std::uint64_t peak_elems = 0;
    std::uint64_t flops_total = 0;
};

std::vector<CellSummary> summarize(std::span<const BenchRecord> records);
void write_report(std::ostream& out, std::span<const CellSummary> cells);

}  // namespace ssdchunk
