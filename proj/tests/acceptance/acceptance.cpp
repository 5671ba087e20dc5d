// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite: one PASS/FAIL line per headline criterion, exit status 1
// if any criterion fails. Tolerances are fixed here and never loosened.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "../unit/oracles.hpp"
#include "ssdchunk/bench.hpp"
#include "ssdchunk/chunked.hpp"
#include "ssdchunk/embedding.hpp"
#include "ssdchunk/model_io.hpp"

using namespace ssdchunk;

namespace {

int g_failed = 0;

void report(bool pass, const char* name, const std::string& detail) {
    std::printf("%s  %-24s %s\n", pass ? "PASS" : "FAIL", name, detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failed;
}

std::string fmt(const char* format, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, format, args...);
    return buf;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct Case {
    oracle::Instance inst;
    std::size_t T;
};

// 100 seeded instances: T <= 256, N <= 8, H <= 4, B <= 4; odd ones carry h0.
std::vector<Case> acceptance_instances() {
    SplitMix64 rng(20240601);
    std::vector<Case> cases;
    for (int i = 0; i < 100; ++i) {
        const std::size_t T = i < 4 ? std::size_t{256} - 3 * i : 1 + rng.below(256);
        const std::size_t B = 1 + rng.below(4), H = 1 + rng.below(4), N = 1 + rng.below(8);
        cases.push_back({oracle::random_instance(rng.next(), B, T, H, N, i % 2 == 1), T});
    }
    return cases;
}

double scan_error(const ScanResult& got, const SequenceTensor& y, const LatentState& h) {
    return std::max(relative_error(got.y.values(), y.values()), relative_error(got.final_state.values(), h.values()));
}

ModelSpec stacked_spec(std::uint64_t seed, std::size_t q, std::size_t v) {
    ModelSpec spec;
    spec.seed = seed;
    spec.layers = 4;
    spec.chunk_size = q;
    spec.vertical_chunk = v;
    return spec;
}

TokenBatch random_tokens(std::uint64_t seed, std::size_t batch, std::size_t steps, std::size_t vocab) {
    SplitMix64 rng(seed);
    TokenBatch t{batch, steps, std::vector<std::int32_t>(batch * steps)};
    for (auto& id : t.ids) id = static_cast<std::int32_t>(rng.below(vocab - 1));
    return t;
}

void duality(const std::vector<Case>& cases) {
    const auto begin = std::chrono::steady_clock::now();
    double worst = 0.0, worst_oracle = 0.0;
    for (const auto& c : cases) {
        const auto rec = recurrent_scan(c.inst.coeffs, c.inst.x, c.inst.h0);
        const auto dense = dense_dual(c.inst.coeffs, c.inst.x, c.inst.h0);
        worst = std::max(worst, scan_error(dense, rec.y, rec.final_state));
        const auto ref = oracle::naive_recurrence(c.inst.coeffs, c.inst.x, c.inst.h0);
        worst_oracle = std::max(worst_oracle, scan_error(rec, ref.y, ref.h));
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - begin).count();
    report(worst <= 1e-9 && worst_oracle <= 1e-9 && secs <= 60.0, "duality-equivalence",
           fmt("instances=%zu max_rel_err(dense vs recurrent)=%.3e max_rel_err(recurrent vs reference)=%.3e "
               "time=%.2fs (limits 1e-9, 60s)",
               cases.size(), worst, worst_oracle, secs));
}

void chunk_invariance(const std::vector<Case>& cases) {
    double worst = 0.0;
    std::size_t ragged = 0, with_h0 = 0, runs = 0;
    for (const auto& c : cases) {
        const auto ref = oracle::naive_recurrence(c.inst.coeffs, c.inst.x, c.inst.h0);
        const bool has_h0 = std::any_of(c.inst.h0.values().begin(), c.inst.h0.values().end(),
                                        [](double v) { return v != 0.0; });
        for (std::size_t q : {std::size_t{1}, std::size_t{2}, std::size_t{4}, std::size_t{16}, c.T}) {
            ChunkOptions options;
            options.chunk_size = static_cast<std::int64_t>(q);
            worst = std::max(worst, scan_error(chunked_forward(c.inst.coeffs, c.inst.x, c.inst.h0, options), ref.y, ref.h));
            ++runs;
            ragged += c.T % q != 0 ? 1 : 0;
            with_h0 += has_h0 ? 1 : 0;
        }
    }
    report(worst <= 1e-9 && ragged > 0 && with_h0 > 0, "chunk-invariance",
           fmt("runs=%zu Q={1,2,4,16,T} ragged_runs=%zu nonzero_h0_runs=%zu max_rel_err=%.3e (limit 1e-9)", runs,
               ragged, with_h0, worst));
}

void strategy_equivalence() {
    double worst = 0.0;
    std::size_t runs = 0, fallbacks = 0, bitwise_misses = 0;
    for (std::size_t q : {8, 16, 32}) {
        const auto model = generate_model(stacked_spec(100 + q, q, q));
        for (std::size_t T : {64, 96, 128}) {
            const auto tokens = random_tokens(T * q, 2, T, model.spec.vocab_size);
            const auto h = horizontal_infer(model, tokens);
            for (std::size_t v : {q, 2 * q, 4 * q}) {
                SequenceTensor streamed(2, T, model.spec.d_model);
                InferenceOptions options;
                options.sink = [&](std::size_t offset, const SequenceTensor& part) { streamed.assign(offset, part); };
                const auto r = vertical_infer(model, tokens, v, options);
                const auto tail = h.hidden.slice(r.offset, r.hidden.seq_len());
                worst = std::max({worst, relative_error(r.hidden.values(), tail.values()),
                                  relative_error(streamed.values(), h.hidden.values())});
                ++runs;
                if (T <= v) {
                    ++fallbacks;
                    if (!r.horizontal_fallback || !(r.hidden == h.hidden)) ++bitwise_misses;
                }
            }
        }
    }
    report(worst <= 1e-9 && bitwise_misses == 0 && fallbacks > 0, "strategy-equivalence",
           fmt("L=4 T={64,96,128} Q={8,16,32} V={Q,2Q,4Q} runs=%zu max_rel_err=%.3e (limit 1e-9) "
               "T<=V runs=%zu bitwise_mismatches=%zu",
               runs, worst, fallbacks, bitwise_misses));
}

void memory_constancy() {
    ModelSpec spec = stacked_spec(17, 8, 32);
    const auto model = generate_model(spec);
    std::vector<std::size_t> peaks;
    std::string listing;
    for (std::size_t T : {64, 128, 256, 512}) {
        const auto r = vertical_infer(model, random_tokens(T, 1, T, spec.vocab_size), 32);
        peaks.push_back(r.ledger.total_peak());
        listing += fmt("%zu:%zu ", T, peaks.back());
    }
    const bool constant = std::all_of(peaks.begin(), peaks.end(), [&](auto p) { return p == peaks.front(); });
    const auto h64 = horizontal_infer(model, random_tokens(64, 1, 64, spec.vocab_size)).ledger.total_peak();
    const auto h128 = horizontal_infer(model, random_tokens(128, 1, 128, spec.vocab_size)).ledger.total_peak();
    const double ratio = static_cast<double>(h128) / static_cast<double>(h64);
    report(constant && ratio >= 1.9 && ratio <= 2.1, "memory-constancy",
           fmt("vertical peak elems by T {%s} horizontal T=128/T=64 = %zu/%zu = %.4f (range [1.9, 2.1])",
               listing.substr(0, listing.size() - 1).c_str(), h128, h64, ratio));
}

void compute_scaling() {
    double worst_doubling = 0.0;
    for (std::int64_t q : {4, 8, 16, 32}) {
        std::uint64_t prev = 0;
        for (std::size_t T : {64, 128, 256, 512, 1024}) {
            const auto inst = oracle::random_instance(T + q, 1, T, 2, 8, false);
            FlopCounter flops;
            ChunkOptions options;
            options.chunk_size = q;
            options.instruments.flops = &flops;
            chunked_forward(inst.coeffs, inst.x, inst.h0, options);
            if (prev) {
                const double ratio = static_cast<double>(flops.total()) / static_cast<double>(prev);
                worst_doubling = std::max(worst_doubling, std::fabs(ratio - 2.0) / 2.0);
            }
            prev = flops.total();
        }
    }
    double worst_parity = 0.0;
    const auto model = generate_model(stacked_spec(5, 8, 32));
    for (std::size_t T : {64, 100, 256}) {
        const auto tokens = random_tokens(T, 1, T, model.spec.vocab_size);
        for (std::size_t v : {8, 16, 32}) {
            const double h = static_cast<double>(horizontal_infer(model, tokens).flops.total());
            const double vt = static_cast<double>(vertical_infer(model, tokens, v).flops.total());
            worst_parity = std::max(worst_parity, std::fabs(vt - h) / h);
        }
    }
    report(worst_doubling <= 0.02 && worst_parity <= 0.01, "compute-scaling",
           fmt("max |flops(2T)/flops(T) - 2|/2 = %.4f (limit 0.02) max vertical/horizontal flop gap = %.4f (limit 0.01)",
               worst_doubling, worst_parity));
}

void mutation_sensitivity() {
    bool all = true;
    std::string detail;
    for (auto fault : {FaultMode::IntraMask, FaultMode::RowSelector, FaultMode::Transition, FaultMode::InterCorrection}) {
        std::size_t multi = 0, caught = 0;
        for (std::uint64_t seed : {42ULL, 7ULL}) {
            EquivalenceConfig config;
            config.seed = seed;
            config.fault = fault;
            const auto r = run_equivalence(config);
            for (const auto& inst : r.instances) {
                multi += inst.multi_chunk ? 1 : 0;
                caught += inst.multi_chunk && !inst.passed ? 1 : 0;
            }
        }
        all = all && multi > 0 && caught == multi;
        if (!detail.empty()) detail += ' ';
        detail += fmt("%s:%zu/%zu", std::string(to_string(fault)).c_str(), caught, multi);
    }
    report(all, "mutation-sensitivity", "failing multi-chunk instances per fault " + detail);
}

void info_nce() {
    const std::vector<double> q{1, 0, 0};
    const auto at = [](double c) { return std::vector<double>{c, std::sqrt(1.0 - c * c), 0.0}; };
    const bool zero = info_nce_loss(q, at(0.3), {}, {0.02}) == 0.0 && info_nce_loss(q, at(0.3), {}, {1.0}) == 0.0;
    double worst = 0.0;
    bool finite = true;
    std::size_t cases = 0;
    for (double tau : {1.0, 0.1, 0.02}) {
        for (double sp : {0.9, 0.3, -0.2}) {
            for (double sn : {0.5, -0.5, 0.95}) {
                for (std::size_t n : {1, 2, 5}) {
                    const std::vector<std::vector<double>> negs(n, at(sn));
                    const double loss = info_nce_loss(q, at(sp), negs, {tau});
                    // log(1 + n e^x), evaluated without overflow for large x.
                    const double x = (sn - sp) / tau;
                    const double want = x > 0 ? x + std::log(static_cast<double>(n)) +
                                                    std::log1p(std::exp(-x) / static_cast<double>(n))
                                              : std::log1p(static_cast<double>(n) * std::exp(x));
                    finite = finite && std::isfinite(loss);
                    worst = std::max(worst, std::fabs(loss - want) / want);
                    ++cases;
                }
            }
        }
    }
    report(zero && finite && worst <= 1e-12, "infonce-closed-form",
           fmt("N=0 -> 0 exactly: %s; cases=%zu tau={1,0.1,0.02} max_rel_err=%.3e (limit 1e-12) finite=%s",
               zero ? "yes" : "no", cases, worst, finite ? "yes" : "no"));
}

void template_golden() {
    std::istringstream pairs(slurp(SSD_GOLDEN_DIR "/format_query_pairs.tsv"));
    std::size_t total = 0, matched = 0;
    for (std::string line; std::getline(pairs, line);) {
        ++total;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) continue;
        const auto golden = slurp(fmt(SSD_GOLDEN_DIR "/format_query_%02zu.txt", total));
        matched += !golden.empty() && format_query(line.substr(0, tab), line.substr(tab + 1)) == golden ? 1 : 0;
    }
    report(total == 10 && matched == 10, "template-byte-exact", fmt("golden renderings matched %zu/%zu", matched, total));
}

void reproducibility() {
    ModelSpec spec;
    spec.seed = 42;
    const auto h1 = payload_hash(generate_model(spec));
    const auto h2 = payload_hash(generate_model(spec));
    const auto golden = nlohmann::json::parse(slurp(SSD_GOLDEN_DIR "/model_seed42.json"), nullptr, false);
    const std::string frozen = golden.is_object() ? golden.value("payload_hash", "") : "";
    const std::string got = fmt("%016llx", static_cast<unsigned long long>(h1));

    ModelSpec small;
    small.seed = 42;
    small.layers = 2;
    small.chunk_size = 8;
    small.vertical_chunk = 16;
    SweepConfig config;
    config.seq_lens = {32, 64};
    config.batches = {1, 2};
    config.chunk_sizes = {4, 8};
    config.reps = 3;
    config.warmup = 0;
    const auto rows = run_sweep(generate_model(small), config);
    std::ostringstream out;
    write_sweep_csv(out, rows);
    std::istringstream in(out.str());
    const auto parsed = parse_sweep_csv(in);
    std::ostringstream again;
    write_sweep_csv(again, parsed);
    const bool csv_ok = parsed == rows && again.str() == out.str();
    report(h1 == h2 && got == frozen && csv_ok, "reproducibility",
           fmt("seed-42 payload hash %s (frozen %s, repeat %s) sweep CSV rows=%zu round-trip %s", got.c_str(),
               frozen.c_str(), h1 == h2 ? "equal" : "differs", rows.size(), csv_ok ? "exact" : "broken"));
}

}  // namespace

int main() {
    const auto cases = acceptance_instances();
    const std::vector<std::function<void()>> criteria{
        [&] { duality(cases); },
        [&] { chunk_invariance(cases); },
        strategy_equivalence,
        memory_constancy,
        compute_scaling,
        mutation_sensitivity,
        info_nce,
        template_golden,
        reproducibility,
    };
    for (const auto& criterion : criteria) {
        try {
            criterion();
        } catch (const std::exception& e) {
            report(false, "error", e.what());
        }
    }
    std::printf("%s: %d of %zu criteria failed\n", g_failed ? "FAIL" : "PASS", g_failed, criteria.size());
    return g_failed ? 1 : 0;
}
