// SPDX-License-Identifier: Apache-2.0

#include "ssdchunk/bench.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <thread>
#include <tuple>

#include "ssdchunk/errors.hpp"
#include "ssdchunk/model_io.hpp"
#include "ssdchunk/rng.hpp"
#include "ssdchunk/ssd_core.hpp"

namespace ssdchunk {

namespace {

struct Instance {
    SsmCoefficients coeffs;
    SequenceTensor x;
    LatentState h0;
};

Instance random_instance(SplitMix64& rng, std::size_t steps, const EquivalenceConfig& config, bool nonzero_h0) {
    const std::size_t batch = 1 + rng.below(config.max_batch);
    const std::size_t heads = 1 + rng.below(config.max_heads);
    const std::size_t n_state = 1 + rng.below(config.max_state);
    Instance inst{SsmCoefficients(batch, steps, heads, n_state), SequenceTensor(batch, steps, heads),
                  LatentState(batch, heads, n_state)};
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t t = 0; t < steps; ++t) {
            for (std::size_t h = 0; h < heads; ++h) {
                const double z = rng.uniform(-5.0, 2.0);
                inst.coeffs.a(b, t, h) = std::exp(-(z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z))));
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

double scan_error(const ScanResult& got, const ScanResult& want) {
    return std::max(relative_error(got.y.values(), want.y.values()),
                    relative_error(got.final_state.values(), want.final_state.values()));
}

TokenBatch random_tokens(SplitMix64& rng, std::size_t batch, std::size_t steps, std::size_t vocab) {
    TokenBatch tokens{batch, steps, std::vector<std::int32_t>(batch * steps)};
    for (auto& id : tokens.ids) id = static_cast<std::int32_t>(rng.below(vocab - 1));
    return tokens;
}

SequenceTensor full_hidden(const StackedModel& model, const TokenBatch& tokens, std::size_t vertical_chunk,
                           InferenceOptions options) {
    SequenceTensor hidden(tokens.batch, tokens.seq_len, model.spec.d_model);
    options.sink = [&](std::size_t offset, const SequenceTensor& part) { hidden.assign(offset, part); };
    vertical_infer(model, tokens, vertical_chunk, options);
    return hidden;
}

}  // namespace

std::size_t EquivalenceReport::failed_checks() const {
    return static_cast<std::size_t>(std::count_if(checks.begin(), checks.end(), [](const auto& c) { return !c.passed; }));
}

EquivalenceReport run_equivalence(const EquivalenceConfig& config,
                                  const std::function<void(const CheckResult&)>& on_check) {
    if (config.seq_lens.empty() || config.chunk_sizes.empty()) {
        fail(ErrorKind::Validation, "equivalence grids must be non-empty");
    }
    if (config.instances == 0 || config.max_batch == 0 || config.max_heads == 0 || config.max_state == 0) {
        fail(ErrorKind::Validation, "equivalence instance dims must be positive");
    }
    EquivalenceReport report;
    SplitMix64 seeds(config.seed);

    auto record = [&](CheckResult check, InstanceSummary& summary) {
        check.passed = check.rel_error <= config.tolerance;
        summary.passed = summary.passed && check.passed;
        report.max_rel_error = std::max(report.max_rel_error, check.rel_error);
        if (on_check) on_check(check);
        report.checks.push_back(std::move(check));
    };

    for (std::size_t i = 0; i < config.instances; ++i) {
        const std::uint64_t instance_seed = seeds.next();
        SplitMix64 rng(instance_seed);
        const std::size_t steps = config.seq_lens[i % config.seq_lens.size()];
        if (steps == 0) fail(ErrorKind::Validation, "sequence lengths must be >= 1");
        InstanceSummary summary{i, steps, false, true};
        const auto inst = random_instance(rng, steps, config, i % 2 == 1);

        const auto reference = recurrent_scan(inst.coeffs, inst.x, inst.h0);
        if (steps <= config.dense_limit) {
            const auto dense = dense_dual(inst.coeffs, inst.x, inst.h0, config.dense_limit);
            record({i, "dense", steps, 1, scan_error(dense, reference), true}, summary);
        }
        for (std::size_t q : config.chunk_sizes) {
            ChunkOptions options;
            options.chunk_size = static_cast<std::int64_t>(q);
            options.fault = config.fault;
            options.workers = config.workers;
            const auto chunked = chunked_forward(inst.coeffs, inst.x, inst.h0, options);
            const std::size_t n_chunks = (steps + q - 1) / q;
            summary.multi_chunk = summary.multi_chunk || n_chunks > 1;
            record({i, "chunked Q=" + std::to_string(q), steps, n_chunks, scan_error(chunked, reference), true},
                   summary);
        }

        // Stacked model: every vertical schedule against a layer-by-layer
        // recurrent reference.
        ModelSpec spec;
        spec.seed = instance_seed;
        spec.layers = config.layers;
        spec.d_model = config.d_model;
        spec.heads = inst.coeffs.heads();
        spec.state_dim = inst.coeffs.state_dim();
        spec.vocab_size = config.vocab_size;
        spec.chunk_size = config.chunk_sizes.front();
        spec.vertical_chunk = spec.chunk_size;
        spec.dense_limit = config.dense_limit;
        const auto model = generate_model(spec);
        const auto tokens = random_tokens(rng, inst.coeffs.batch(), steps, spec.vocab_size);
        InferenceOptions ref_options;
        ref_options.kernel = Kernel::Recurrent;
        const auto stacked_reference = horizontal_infer(model, tokens, ref_options);
        for (std::size_t q : config.chunk_sizes) {
            for (std::size_t v : config.vertical_chunks) {
                if (v % q != 0) continue;
                InferenceOptions options;
                options.chunk_size = static_cast<std::int64_t>(q);
                options.fault = config.fault;
                options.workers = config.workers;
                const auto hidden = full_hidden(model, tokens, v, options);
                record({i, "vertical Q=" + std::to_string(q) + " V=" + std::to_string(v), steps, (steps + q - 1) / q,
                        relative_error(hidden.values(), stacked_reference.hidden.values()), true},
                       summary);
            }
        }
        report.instances.push_back(summary);
    }
    return report;
}

// ---------------------------------------------------------------------------

namespace {

constexpr std::array<std::pair<std::string_view, SweepStrategy>, 4> kStrategyNames{{
    {"recurrent", SweepStrategy::Recurrent},
    {"dense", SweepStrategy::Dense},
    {"chunked-horizontal", SweepStrategy::Horizontal},
    {"vertical", SweepStrategy::Vertical},
}};

auto sort_key(const BenchRecord& r) {
    return std::tie(r.strategy, r.seq_len, r.batch, r.chunk_size, r.vertical_chunk, r.rep);
}

}  // namespace

std::string_view to_string(SweepStrategy strategy) noexcept {
    for (const auto& [name, value] : kStrategyNames) {
        if (value == strategy) return name;
    }
    return "unknown";
}

std::optional<SweepStrategy> parse_sweep_strategy(std::string_view name) noexcept {
    for (const auto& [key, value] : kStrategyNames) {
        if (key == name) return value;
    }
    if (name == "horizontal") return SweepStrategy::Horizontal;
    return std::nullopt;
}

std::vector<BenchRecord> run_sweep(const StackedModel& model, const SweepConfig& config,
                                   const std::function<void(const std::string&)>& log) {
    if (config.seq_lens.empty() || config.batches.empty() || config.chunk_sizes.empty() || config.strategies.empty()) {
        fail(ErrorKind::Validation, "sweep grids must be non-empty");
    }
    if (config.reps == 0) fail(ErrorKind::Validation, "sweep repetitions must be >= 1");
    auto note = [&](const std::string& line) {
        if (log) log(line);
    };
    const std::size_t workers = config.parallel ? std::max(1u, std::thread::hardware_concurrency()) : 1;
    const std::size_t dense_limit = resolve_dense_limit(model.spec.dense_limit);

    struct Cell {
        SweepStrategy strategy;
        std::size_t q;
        std::size_t v;
    };
    std::vector<Cell> cells;
    for (auto strategy : config.strategies) {
        switch (strategy) {
            case SweepStrategy::Recurrent:
            case SweepStrategy::Dense:
                cells.push_back({strategy, 0, 0});
                break;
            case SweepStrategy::Horizontal:
                for (auto q : config.chunk_sizes) cells.push_back({strategy, q, 0});
                break;
            case SweepStrategy::Vertical:
                for (auto q : config.chunk_sizes) {
                    const std::vector<std::size_t> vs =
                        config.vertical_chunks.empty() ? std::vector<std::size_t>{q, 2 * q, 4 * q} : config.vertical_chunks;
                    for (auto v : vs) {
                        if (v == 0 || q == 0 || v % q != 0) {
                            note("skip vertical Q=" + std::to_string(q) + " V=" + std::to_string(v) +
                                 ": V is not a multiple of Q");
                            continue;
                        }
                        cells.push_back({strategy, q, v});
                    }
                }
                break;
        }
    }

    std::vector<BenchRecord> records;
    for (std::size_t steps : config.seq_lens) {
        for (std::size_t batch : config.batches) {
            SplitMix64 rng(config.token_seed ^ (steps * 0x9E3779B97F4A7C15ULL) ^ (batch << 32));
            const auto tokens = random_tokens(rng, batch, steps, model.spec.vocab_size);
            for (const auto& cell : cells) {
                if (cell.strategy == SweepStrategy::Dense && steps > dense_limit) {
                    note("skip dense T=" + std::to_string(steps) + ": exceeds dense limit " + std::to_string(dense_limit));
                    continue;
                }
                InferenceOptions options;
                options.workers = workers;
                options.chunk_size = cell.q ? static_cast<std::int64_t>(cell.q) : 0;
                options.kernel = cell.strategy == SweepStrategy::Recurrent ? Kernel::Recurrent
                                 : cell.strategy == SweepStrategy::Dense   ? Kernel::Dense
                                                                           : Kernel::Chunked;
                // Recurrent/dense ignore Q, but the model's Q must still divide V.
                auto run = [&] {
                    return cell.strategy == SweepStrategy::Vertical ? vertical_infer(model, tokens, cell.v, options)
                                                                    : horizontal_infer(model, tokens, options);
                };
                for (std::size_t w = 0; w < config.warmup; ++w) run();
                for (std::size_t rep = 0; rep < config.reps; ++rep) {
                    const auto begin = std::chrono::steady_clock::now();
                    const auto result = run();
                    const auto end = std::chrono::steady_clock::now();
                    BenchRecord r;
                    r.strategy = std::string(to_string(cell.strategy));
                    r.seq_len = steps;
                    r.batch = batch;
                    r.chunk_size = cell.q;
                    r.vertical_chunk = cell.v;
                    r.rep = rep;
                    r.wall_time_s = std::chrono::duration<double>(end - begin).count();
                    r.peak_elems = result.ledger.total_peak();
                    r.flops_intra = result.flops.intra;
                    r.flops_prop = result.flops.propagate;
                    r.flops_inter = result.flops.inter;
                    records.push_back(std::move(r));
                }
            }
        }
    }
    std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) { return sort_key(a) < sort_key(b); });
    return records;
}

void write_sweep_csv(std::ostream& out, std::span<const BenchRecord> records) {
    out << kSweepCsvHeader << '\n';
    char time_buf[40];
    for (const auto& r : records) {
        std::snprintf(time_buf, sizeof time_buf, "%.17g", r.wall_time_s);
        out << r.strategy << ',' << r.seq_len << ',' << r.batch << ',' << r.chunk_size << ',' << r.vertical_chunk << ','
            << r.rep << ',' << time_buf << ',' << r.peak_elems << ',' << r.flops_intra << ',' << r.flops_prop << ','
            << r.flops_inter << '\n';
    }
}

namespace {

std::uint64_t parse_count(const std::string& field, std::size_t line_no) {
    if (field.empty() || !std::all_of(field.begin(), field.end(), [](char c) { return c >= '0' && c <= '9'; })) {
        fail(ErrorKind::Format, "line " + std::to_string(line_no) + ": expected a non-negative integer, got '" + field + "'");
    }
    return std::stoull(field);
}

}  // namespace

std::vector<BenchRecord> parse_sweep_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != kSweepCsvHeader) fail(ErrorKind::Format, "sweep CSV header mismatch");
    std::vector<BenchRecord> records;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream row(line);
        for (std::string field; std::getline(row, field, ',');) fields.push_back(field);
        if (fields.size() != 11) {
            fail(ErrorKind::Format, "line " + std::to_string(line_no) + ": expected 11 fields");
        }
        if (!parse_sweep_strategy(fields[0]) || fields[0] == "horizontal") {
            fail(ErrorKind::Format, "line " + std::to_string(line_no) + ": unknown strategy '" + fields[0] + "'");
        }
        BenchRecord r;
        r.strategy = fields[0];
        r.seq_len = parse_count(fields[1], line_no);
        r.batch = parse_count(fields[2], line_no);
        r.chunk_size = parse_count(fields[3], line_no);
        r.vertical_chunk = parse_count(fields[4], line_no);
        r.rep = parse_count(fields[5], line_no);
        char* end = nullptr;
        r.wall_time_s = std::strtod(fields[6].c_str(), &end);
        if (fields[6].empty() || *end != '\0' || !(r.wall_time_s >= 0.0)) {
            fail(ErrorKind::Format, "line " + std::to_string(line_no) + ": bad wall time");
        }
        r.peak_elems = parse_count(fields[7], line_no);
        r.flops_intra = parse_count(fields[8], line_no);
        r.flops_prop = parse_count(fields[9], line_no);
        r.flops_inter = parse_count(fields[10], line_no);
        records.push_back(std::move(r));
    }
    return records;
}

std::vector<CellSummary> summarize(std::span<const BenchRecord> records) {
    using Key = std::tuple<std::string, std::size_t, std::size_t, std::size_t, std::size_t>;
    std::map<Key, CellSummary> cells;
    for (const auto& r : records) {
        auto [it, inserted] = cells.try_emplace(Key{r.strategy, r.seq_len, r.batch, r.chunk_size, r.vertical_chunk});
        auto& cell = it->second;
        if (inserted) {
            cell.strategy = r.strategy;
            cell.seq_len = r.seq_len;
            cell.batch = r.batch;
            cell.chunk_size = r.chunk_size;
            cell.vertical_chunk = r.vertical_chunk;
            cell.min_s = r.wall_time_s;
            cell.max_s = r.wall_time_s;
        }
        ++cell.reps;
        cell.mean_s += r.wall_time_s;
        cell.min_s = std::min(cell.min_s, r.wall_time_s);
        cell.max_s = std::max(cell.max_s, r.wall_time_s);
        cell.peak_elems = std::max(cell.peak_elems, r.peak_elems);
        cell.flops_total = std::max(cell.flops_total, r.flops_intra + r.flops_prop + r.flops_inter);
    }
    std::vector<CellSummary> out;
    out.reserve(cells.size());
    for (auto& [key, cell] : cells) {
        cell.mean_s /= static_cast<double>(cell.reps);
        out.push_back(std::move(cell));
    }
    return out;
}

void write_report(std::ostream& out, std::span<const CellSummary> cells) {
    out << "# wall time covers one full forward pass including coefficient generation; model load excluded\n";
    out << "# peak_elems = activation peak + carried per-layer state elements\n";
    out << "strategy,T,batch,Q,V,reps,mean_s,min_s,max_s,peak_elems,flops_total\n";
    char buf[128];
    for (const auto& c : cells) {
        std::snprintf(buf, sizeof buf, "%.6e,%.6e,%.6e", c.mean_s, c.min_s, c.max_s);
        out << c.strategy << ',' << c.seq_len << ',' << c.batch << ',' << c.chunk_size << ',' << c.vertical_chunk << ','
            << c.reps << ',' << buf << ',' << c.peak_elems << ',' << c.flops_total << '\n';
    }
}

}  // namespace ssdchunk
