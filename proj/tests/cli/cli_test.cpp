// SPDX-License-Identifier: Apache-2.0
//
// End-to-end checks of the ssdchunk executable: exit-code contract, embed
// output format and sweep/report plumbing.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

struct Run {
    int exit_code = -1;
    std::string out;
};

Run run(const std::string& args) {
    const std::string cmd = std::string(SSD_CLI_PATH) + " " + args + " 2>/dev/null";
    Run r;
    FILE* pipe = ::popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    char buf[4096];
    while (std::fgets(buf, sizeof buf, pipe)) r.out += buf;
    const int status = ::pclose(pipe);
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

fs::path workdir() {
    static const fs::path dir = [] {
        auto d = fs::temp_directory_path() / "ssdchunk_cli_test";
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

std::string file(const std::string& name, const std::string& contents) {
    const auto p = workdir() / name;
    std::ofstream(p, std::ios::binary | std::ios::trunc) << contents;
    return p.string();
}

std::vector<double> parse_values(const std::string& line) {
    std::vector<double> v;
    std::stringstream in(line);
    for (std::string field; std::getline(in, field, ',');) v.push_back(std::strtod(field.c_str(), nullptr));
    return v;
}

std::string model_file(int seed) {
    const auto p = (workdir() / ("model_" + std::to_string(seed) + ".bin")).string();
    if (!fs::exists(p)) REQUIRE(run("generate --seed " + std::to_string(seed) + " --out " + p).exit_code == 0);
    return p;
}

const char* kLongText =
    "state space models process long sequences with a fixed size recurrent state and the chunked algorithm splits "
    "the sequence into blocks so that memory stays bounded while the output is unchanged across every schedule";

}  // namespace

TEST_CASE("equivalence exit codes") {
    const auto ok = run("equivalence --quiet");
    CHECK(ok.exit_code == 0);
    CHECK(ok.out.find("failed=0") != std::string::npos);
    for (const char* fault : {"intra-mask", "row-selector", "transition", "inter-correction"}) {
        CAPTURE(fault);
        const auto r = run(std::string("equivalence --quiet --inject-fault ") + fault);
        CHECK(r.exit_code == 1);
        CHECK(r.out.find("failed_instances=12") != std::string::npos);
    }
    CHECK(run("equivalence --quiet --grid-t 1").exit_code == 0);
    CHECK(run("equivalence --inject-fault stage-4").exit_code == 2);
    CHECK(run("equivalence --tolerance -1").exit_code == 2);
}

TEST_CASE("usage errors exit with 2") {
    CHECK(run("").exit_code == 2);
    CHECK(run("frobnicate").exit_code == 2);
    CHECK(run("sweep --grid-t 64").exit_code == 2);
    CHECK(run("embed --model /nonexistent.bin --input /nonexistent.txt").exit_code == 2);
    CHECK(run("--help").exit_code == 0);
}

TEST_CASE("embed prints d values with 17 significant digits") {
    const auto model = model_file(4);
    const auto r = run("embed --model " + model + " --input " + file("short.txt", "hello world\n"));
    REQUIRE(r.exit_code == 0);
    const auto values = parse_values(r.out);
    CHECK(values.size() == 16);
    const auto first = r.out.substr(0, r.out.find(','));
    char again[40];
    std::snprintf(again, sizeof again, "%.17g", values[0]);
    CHECK(first == again);
    CHECK(run("embed --model " + model + " --input " + file("short.txt", "hello world\n")).out == r.out);
}

TEST_CASE("embed horizontal and vertical agree") {
    const auto model = model_file(4);
    const auto input = file("long.txt", kLongText);
    const auto h = parse_values(run("embed --model " + model + " --input " + input).out);
    for (const char* flags : {"--vertical", "--vertical --memory-cap", "--vertical --v 48"}) {
        CAPTURE(flags);
        const auto v = parse_values(run("embed --model " + model + " --input " + input + " " + flags).out);
        REQUIRE(v.size() == h.size());
        double diff = 0.0, scale = 0.0;
        for (std::size_t i = 0; i < h.size(); ++i) {
            diff = std::max(diff, std::fabs(v[i] - h[i]));
            scale = std::max(scale, std::fabs(h[i]));
        }
        CHECK(diff <= 1e-9 * scale);
    }
    CHECK(run("embed --model " + model + " --input " + input + " --vertical --v 20").exit_code == 2);
}

TEST_CASE("embed inputs") {
    const auto model = model_file(4);
    const auto a = run("embed --model " + model + " --input " + file("a.txt", "apples and pears")).out;
    const auto b = run("embed --model " + model + " --input " + file("b.txt", "rust borrow checker")).out;
    CHECK(a != b);
    const auto empty = run("embed --model " + model + " --input " + file("empty.txt", " \n\t "));
    CHECK(empty.exit_code == 2);
    CHECK(empty.out.empty());

    // --format-query is the same as embedding the rendered template.
    const auto rendered = file("rendered.txt", "Instruction: Retrieve relevant passages\nQuery: rust borrow checker");
    const auto direct = run("embed --model " + model + " --input " + rendered).out;
    const auto templated =
        run("embed --model " + model + " --input " + file("q.txt", "rust borrow checker") +
            " --format-query 'Retrieve relevant passages'")
            .out;
    CHECK(templated == direct);
    CHECK(templated != b);
}

TEST_CASE("sweep writes a CSV that report can read") {
    const auto model = model_file(4);
    const auto csv = (workdir() / "sweep.csv").string();
    const auto r = run("sweep --model " + model +
                       " --grid-t 32,64 --grid-batch 1 --q 8 --grid-v 16,20 --strategy vertical,dense --reps 3 "
                       "--warmup 0 --out " +
                       csv);
    REQUIRE(r.exit_code == 0);
    CHECK(r.out.find("timing: single-threaded") != std::string::npos);
    std::ifstream in(csv);
    std::string header;
    std::getline(in, header);
    CHECK(header == "strategy,T,batch,Q,V,rep,wall_time_s,peak_elems,flops_intra,flops_prop,flops_inter");
    std::size_t rows = 0;
    for (std::string line; std::getline(in, line);) ++rows;
    CHECK(rows == (2 + 2) * 3);
    const auto report = run("report " + csv);
    CHECK(report.exit_code == 0);
    CHECK(report.out.find("mean_s,min_s,max_s") != std::string::npos);
    CHECK(run("report " + file("bad.csv", "nope\n")).exit_code == 2);
    CHECK(run("sweep --model " + model + " --grid-t 16 --grid-batch 1 --q 4 --strategy recurrent --reps 1 --parallel --out " +
              csv)
              .out.find("timing: parallel") != std::string::npos);
    CHECK(run("sweep --model " + model + " --strategy warp --out " + csv).exit_code == 2);
}

TEST_CASE("generate honours spec documents") {
    const auto cfg = file("spec.json", R"({"seed": 9, "L": 1, "d": 4, "H": 1, "N": 2, "Q": 4, "V": 8})");
    const auto out = (workdir() / "from_spec.bin").string();
    const auto r = run("generate --config " + cfg + " --out " + out);
    CHECK(r.exit_code == 0);
    const auto e = parse_values(run("embed --model " + out + " --input " + file("w.txt", "word")).out);
    CHECK(e.size() == 4);
    CHECK(run("generate --config " + file("bad_spec.json", R"({"Q": 4, "V": 6})") + " --out " + out).exit_code == 2);
}
