// SPDX-License-Identifier: Apache-2.0
//
// ssdchunk command-line front end. Talks to the library through the C API only.
//
// Exit codes: 0 success, 1 equivalence failure, 2 usage or input error.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "ssdchunk.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitEquivalence = 1;
constexpr int kExitUsage = 2;

struct ModelDeleter {
    void operator()(ssd_model* m) const { ssd_model_free(m); }
};
using ModelPtr = std::unique_ptr<ssd_model, ModelDeleter>;

struct CliFailure {
    std::string message;
};

void check(ssd_status status, const std::string& context) {
    if (status != SSD_OK) {
        throw CliFailure{context + ": " + ssd_status_name(status) + ": " + ssd_last_error()};
    }
}

void print_line(const char* line, void*) { std::printf("%s\n", line); }
void print_err(const char* line, void*) { std::fprintf(stderr, "%s\n", line); }

ssd_size_grid as_grid(const std::vector<std::uint64_t>& values) { return {values.data(), values.size()}; }

struct ModelSource {
    std::string model_path;
    std::string config_path;
    std::uint64_t seed = 0;
};

void add_model_options(CLI::App* cmd, ModelSource& src) {
    cmd->add_option("--model", src.model_path, "Model file written by 'generate'")->check(CLI::ExistingFile);
    cmd->add_option("--config", src.config_path, "ModelSpec JSON document")->check(CLI::ExistingFile);
    cmd->add_option("--seed", src.seed, "Seed for a generated model when --model is absent");
}

ModelPtr open_model(const ModelSource& src, bool seed_given) {
    ssd_model* raw = nullptr;
    if (!src.model_path.empty()) {
        check(ssd_model_load(src.model_path.c_str(), &raw), "loading " + src.model_path);
        return ModelPtr(raw);
    }
    ssd_model_spec spec;
    ssd_model_spec_init(&spec);
    if (!src.config_path.empty()) check(ssd_model_spec_load(src.config_path.c_str(), &spec), "reading " + src.config_path);
    if (seed_given || src.config_path.empty()) spec.seed = src.seed;
    check(ssd_model_generate(&spec, &raw), "generating model");
    return ModelPtr(raw);
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CliFailure{"cannot open " + path};
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Chunked state-space duality: equivalence checks, sweeps and embeddings"};
    app.require_subcommand(1);

    // equivalence
    auto* eq = app.add_subcommand("equivalence", "Check recurrent = dense = chunked = vertical on seeded instances");
    ssd_equivalence_config eq_cfg;
    ssd_equivalence_config_init(&eq_cfg);
    std::vector<std::uint64_t> eq_t, eq_q, eq_v;
    std::string eq_fault = "none";
    bool eq_parallel = false;
    bool eq_quiet = false;
    eq->add_option("--seed", eq_cfg.seed, "Instance seed")->capture_default_str();
    eq->add_option("--instances", eq_cfg.instances, "Number of instances")->check(CLI::PositiveNumber);
    eq->add_option("--grid-t", eq_t, "Sequence lengths, cycled over instances")->delimiter(',');
    eq->add_option("--grid-q", eq_q, "Chunk sizes")->delimiter(',');
    eq->add_option("--grid-v", eq_v, "Vertical chunk sizes")->delimiter(',');
    eq->add_option("--tolerance", eq_cfg.tolerance, "Max relative error")->check(CLI::NonNegativeNumber);
    eq->add_option("--inject-fault", eq_fault,
                   "none|intra-mask|row-selector|transition|inter-correction");
    eq->add_flag("--parallel", eq_parallel, "Use all hardware threads for the chunked stages");
    eq->add_flag("--quiet", eq_quiet, "Print the summary only");

    // sweep
    auto* sw = app.add_subcommand("sweep", "Time and instrument forward passes over a grid");
    ModelSource sw_src;
    add_model_options(sw, sw_src);
    std::vector<std::uint64_t> sw_t, sw_b, sw_q, sw_v;
    std::vector<std::string> sw_strategies;
    std::optional<std::uint64_t> sw_single_q, sw_single_v;
    ssd_sweep_config sw_cfg;
    ssd_sweep_config_init(&sw_cfg);
    bool sw_parallel = false;
    std::string sw_out;
    sw->add_option("--grid-t", sw_t, "Sequence lengths")->delimiter(',');
    sw->add_option("--grid-batch", sw_b, "Batch sizes")->delimiter(',');
    sw->add_option("--grid-q", sw_q, "Chunk sizes")->delimiter(',');
    sw->add_option("--grid-v", sw_v, "Vertical chunk sizes (default Q,2Q,4Q)")->delimiter(',');
    sw->add_option("--q", sw_single_q, "Single chunk size")->excludes("--grid-q");
    sw->add_option("--v", sw_single_v, "Single vertical chunk size")->excludes("--grid-v");
    sw->add_option("--strategy", sw_strategies, "recurrent,dense,chunked-horizontal,vertical")->delimiter(',');
    sw->add_option("--reps", sw_cfg.reps, "Repetitions per cell")->check(CLI::PositiveNumber);
    sw->add_option("--warmup", sw_cfg.warmup, "Warmup runs per cell");
    sw->add_option("--token-seed", sw_cfg.token_seed, "Seed for synthetic token ids");
    sw->add_flag("--parallel", sw_parallel, "Use all hardware threads for the chunked stages");
    sw->add_option("--out", sw_out, "CSV output path")->required();

    // embed
    auto* em = app.add_subcommand("embed", "Embed a text file and print the EOS hidden state");
    ModelSource em_src;
    add_model_options(em, em_src);
    std::string em_input;
    std::optional<std::string> em_prompt;
    bool em_vertical = false;
    bool em_memory_cap = false;
    std::optional<std::uint32_t> em_q, em_v;
    em->add_option("--input", em_input, "Text file to embed")->required()->check(CLI::ExistingFile);
    em->add_option("--format-query", em_prompt, "Instruction prompt; wraps the input as a query");
    em->add_flag("--vertical", em_vertical, "Use vertical inference");
    em->add_flag("--memory-cap", em_memory_cap, "Default V to Q instead of 2Q");
    em->add_option("--q", em_q, "Chunk size (default: model Q)")->check(CLI::PositiveNumber);
    em->add_option("--v", em_v, "Vertical chunk size (default: 2Q, or Q with --memory-cap)")->check(CLI::PositiveNumber);

    // report
    auto* rp = app.add_subcommand("report", "Summarize a sweep CSV per cell (mean/min/max)");
    std::string rp_input;
    rp->add_option("--input,input", rp_input, "Sweep CSV")->required()->check(CLI::ExistingFile);

    // generate
    auto* gen = app.add_subcommand("generate", "Write a deterministic synthetic model file");
    ModelSource gen_src;
    gen->add_option("--config", gen_src.config_path, "ModelSpec JSON document")->check(CLI::ExistingFile);
    gen->add_option("--seed", gen_src.seed, "Model seed");
    std::string gen_out;
    gen->add_option("--out", gen_out, "Model file path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*eq) {
            check(ssd_fault_from_name(eq_fault.c_str(), &eq_cfg.fault), "--inject-fault");
            eq_cfg.seq_lens = as_grid(eq_t);
            eq_cfg.chunk_sizes = as_grid(eq_q);
            eq_cfg.vertical_chunks = as_grid(eq_v);
            eq_cfg.workers = eq_parallel ? std::max(1u, std::thread::hardware_concurrency()) : 1;
            ssd_equivalence_summary summary;
            check(ssd_run_equivalence(&eq_cfg, eq_quiet ? nullptr : print_line, nullptr, &summary), "equivalence");
            std::printf("checks=%u failed=%u instances=%u failed_instances=%u multi_chunk=%u "
                        "failed_multi_chunk=%u max_rel_err=%.3e fault=%s\n",
                        summary.checks, summary.failed_checks, summary.instances, summary.failed_instances,
                        summary.multi_chunk_instances, summary.failed_multi_chunk_instances, summary.max_rel_error,
                        eq_fault.c_str());
            return summary.failed_checks == 0 ? kExitOk : kExitEquivalence;
        }
        if (*sw) {
            const auto model = open_model(sw_src, sw->count("--seed") > 0);
            if (sw_single_q) sw_q = {*sw_single_q};
            if (sw_single_v) sw_v = {*sw_single_v};
            sw_cfg.seq_lens = as_grid(sw_t);
            sw_cfg.batches = as_grid(sw_b);
            sw_cfg.chunk_sizes = as_grid(sw_q);
            sw_cfg.vertical_chunks = as_grid(sw_v);
            for (const auto& name : sw_strategies) {
                if (name == "recurrent") sw_cfg.strategy_mask |= SSD_STRATEGY_BIT(SSD_STRATEGY_RECURRENT);
                else if (name == "dense") sw_cfg.strategy_mask |= SSD_STRATEGY_BIT(SSD_STRATEGY_DENSE);
                else if (name == "chunked-horizontal" || name == "horizontal")
                    sw_cfg.strategy_mask |= SSD_STRATEGY_BIT(SSD_STRATEGY_HORIZONTAL);
                else if (name == "vertical") sw_cfg.strategy_mask |= SSD_STRATEGY_BIT(SSD_STRATEGY_VERTICAL);
                else throw CliFailure{"unknown strategy '" + name + "'"};
            }
            sw_cfg.parallel = sw_parallel ? 1 : 0;
            std::printf("timing: %s\n", sw_parallel ? "parallel (multi-threaded stages)" : "single-threaded");
            size_t rows = 0;
            check(ssd_run_sweep(model.get(), &sw_cfg, sw_out.c_str(), print_err, nullptr, &rows), "sweep");
            std::printf("wrote %zu rows to %s\n", rows, sw_out.c_str());
            return kExitOk;
        }
        if (*em) {
            const auto model = open_model(em_src, em->count("--seed") > 0);
            ssd_model_spec spec;
            check(ssd_model_get_spec(model.get(), &spec), "model spec");
            std::string text = read_file(em_input);
            if (em_prompt) {
                size_t needed = 0;
                ssd_format_query(em_prompt->c_str(), text.c_str(), nullptr, 0, &needed);
                std::string rendered(needed + 1, '\0');
                check(ssd_format_query(em_prompt->c_str(), text.c_str(), rendered.data(), rendered.size(), &needed),
                      "--format-query");
                rendered.resize(needed);
                text = std::move(rendered);
            }
            size_t count = 0;
            ssd_tokenize(model.get(), text.data(), text.size(), nullptr, 0, &count);
            std::vector<int32_t> tokens(count);
            check(ssd_tokenize(model.get(), text.data(), text.size(), tokens.data(), tokens.size(), &count),
                  "tokenizing");
            if (tokens.empty()) throw CliFailure{"validation error: input " + em_input + " contains no tokens"};
            ssd_infer_options options;
            ssd_infer_options_init(&options);
            options.chunk_size = em_q.value_or(spec.chunk_size);
            if (em_vertical) {
                options.strategy = SSD_STRATEGY_VERTICAL;
                options.vertical_chunk = em_v.value_or(em_memory_cap ? options.chunk_size : 2 * options.chunk_size);
            }
            std::vector<double> embedding(spec.d_model);
            check(ssd_embed(model.get(), tokens.data(), tokens.size(), &options, embedding.data(), embedding.size()),
                  "embedding");
            std::string line;
            char buf[40];
            for (size_t i = 0; i < embedding.size(); ++i) {
                std::snprintf(buf, sizeof buf, "%.17g", embedding[i]);
                if (i) line += ',';
                line += buf;
            }
            std::printf("%s\n", line.c_str());
            return kExitOk;
        }
        if (*rp) {
            check(ssd_report(rp_input.c_str(), print_line, nullptr), "report");
            return kExitOk;
        }
        if (*gen) {
            const auto model = open_model(gen_src, gen->count("--seed") > 0);
            check(ssd_model_save(model.get(), gen_out.c_str()), "saving " + gen_out);
            uint64_t hash = 0;
            check(ssd_model_payload_hash(model.get(), &hash), "hashing");
            std::printf("wrote %s payload_hash=%016llx\n", gen_out.c_str(), static_cast<unsigned long long>(hash));
            return kExitOk;
        }
    } catch (const CliFailure& f) {
        std::fprintf(stderr, "ssdchunk: %s\n", f.message.c_str());
        return kExitUsage;
    }
    return kExitUsage;
}
