// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "ssdchunk/embedding.hpp"
#include "ssdchunk/errors.hpp"
#include "ssdchunk/model_io.hpp"

using namespace ssdchunk;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Unit vector pair with cosine exactly representable as cos(theta).
std::vector<double> at_angle(double cosine) { return {cosine, std::sqrt(1.0 - cosine * cosine), 0.0}; }

double nce(const std::vector<double>& q, const std::vector<double>& p, const std::vector<std::vector<double>>& negs,
           double tau) {
    return info_nce_loss(q, p, negs, {tau});
}

ModelSpec spec_with_seed(std::uint64_t seed) {
    ModelSpec spec;
    spec.seed = seed;
    spec.layers = 2;
    spec.d_model = 8;
    spec.heads = 2;
    spec.state_dim = 4;
    spec.vocab_size = 100;
    spec.chunk_size = 4;
    spec.vertical_chunk = 8;
    return spec;
}

}  // namespace

TEST_CASE("query template") {
    CHECK(format_query("Retrieve relevant passages", "rust borrow checker") ==
          "Instruction: Retrieve relevant passages\nQuery: rust borrow checker");
    CHECK(format_query("", "q") == "Instruction: \nQuery: q");
    const auto once = format_query("p", "q");
    CHECK(format_query("p", once) == "Instruction: p\nQuery: Instruction: p\nQuery: q");
}

TEST_CASE("query template matches the golden renderings") {
    std::istringstream pairs(slurp(SSD_GOLDEN_DIR "/format_query_pairs.tsv"));
    int index = 0;
    for (std::string line; std::getline(pairs, line);) {
        ++index;
        const auto tab = line.find('\t');
        REQUIRE(tab != std::string::npos);
        char name[64];
        std::snprintf(name, sizeof name, SSD_GOLDEN_DIR "/format_query_%02d.txt", index);
        CAPTURE(index);
        CHECK(format_query(line.substr(0, tab), line.substr(tab + 1)) == slurp(name));
    }
    CHECK(index == 10);
}

TEST_CASE("hashing tokenizer") {
    const auto ids = hash_tokenize("  hello\tworld \n hello ", 1000);
    REQUIRE(ids.size() == 3);
    CHECK(ids[0] == ids[2]);
    CHECK(ids[0] == static_cast<std::int32_t>(0xa430d84680aabd0bULL % 999));
    for (auto id : hash_tokenize("a b c d e f g h i j k l m n o p", 3)) {
        CHECK(id >= 0);
        CHECK(id < 2);
    }
    CHECK(hash_tokenize(" \t\n", 10).empty());
}

TEST_CASE("embedding of a single token is the hidden state after EOS") {
    const auto model = generate_model(spec_with_seed(1));
    const std::int32_t t = 17;
    const auto e = embed_sequence(model, std::vector<std::int32_t>{t});
    CHECK(e.source_len == 2);
    const auto h = horizontal_infer(model, TokenBatch::single(std::vector<std::int32_t>{t, model.eos_id()}));
    const auto last = h.hidden.row(0, 1);
    CHECK(e.values == std::vector<double>(last.begin(), last.end()));
}

TEST_CASE("embedding strategies agree") {
    const auto model = generate_model(spec_with_seed(4));
    const auto ids = hash_tokenize(
        "state space models process long sequences with a fixed size recurrent state and the chunked "
        "algorithm splits the sequence into blocks so that memory stays bounded while the output is unchanged",
        model.spec.vocab_size);
    REQUIRE(ids.size() > 2 * model.spec.vertical_chunk);
    EmbedOptions vertical;
    vertical.strategy = Strategy::Vertical;
    vertical.vertical_chunk = default_vertical_chunk(model.spec.chunk_size, false);
    const auto h = embed_sequence(model, ids);
    const auto v = embed_sequence(model, ids, vertical);
    CHECK(relative_error(v.values, h.values) <= 1e-9);
    vertical.vertical_chunk = default_vertical_chunk(model.spec.chunk_size, true);
    CHECK(relative_error(embed_sequence(model, ids, vertical).values, h.values) <= 1e-9);
}

TEST_CASE("different suffixes give different embeddings") {
    const auto model = generate_model(spec_with_seed(4));
    const auto a = embed_sequence(model, hash_tokenize("the shared prefix of both texts then apples", 100));
    const auto b = embed_sequence(model, hash_tokenize("the shared prefix of both texts then oranges", 100));
    double diff = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) diff = std::max(diff, std::fabs(a.values[i] - b.values[i]));
    CHECK(diff > 1e-6);
    CHECK_THROWS_AS(embed_sequence(model, std::vector<std::int32_t>{}), Error);
}

TEST_CASE("cosine similarity") {
    const std::vector<double> a{1, 2, 3}, b{3, 2, 1};
    CHECK(cosine_similarity(a, a) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(cosine_similarity(std::vector<double>{1, 0}, std::vector<double>{0, 1}) == 0.0);
    CHECK(cosine_similarity(a, b) == doctest::Approx(10.0 / 14.0).epsilon(1e-15));
    try {
        cosine_similarity(a, std::vector<double>{0, 0, 0});
        FAIL("expected validation error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Validation);
    }
}

TEST_CASE("InfoNCE closed forms") {
    const std::vector<double> q{1, 0, 0};
    CHECK(info_nce_loss(q, q, {}) == 0.0);
    const std::vector<std::vector<double>> orth{{0, 1, 0}};
    CHECK(info_nce_loss(q, q, orth, {1.0}) == doctest::Approx(std::log1p(std::exp(-1.0))).epsilon(1e-14));
    CHECK(info_nce_loss(q, q, orth, {1.0}) == doctest::Approx(0.313262).epsilon(1e-6));

    const auto p = at_angle(0.9);
    const std::vector<std::vector<double>> negs{at_angle(0.5), at_angle(0.5)};
    const double want = std::log1p(2.0 * std::exp(-20.0));
    const double got = info_nce_loss(q, p, negs, {0.02});
    CHECK(std::fabs(got - want) <= 1e-12 * want);
    try {
        info_nce_loss(q, p, negs, {0.0});
        FAIL("expected validation error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Validation);
    }
}

TEST_CASE("InfoNCE monotonicity and temperature limit") {
    const std::vector<double> q{1, 0, 0};
    for (double tau : {1.0, 0.1, 0.02}) {
        const auto base = nce(q, at_angle(0.6), {at_angle(0.1), at_angle(0.3)}, tau);
        CHECK(nce(q, at_angle(0.6), {at_angle(0.1), at_angle(0.4)}, tau) > base);
        CHECK(nce(q, at_angle(0.7), {at_angle(0.1), at_angle(0.3)}, tau) < base);
    }
    double prev = std::numeric_limits<double>::infinity();
    for (double tau : {1.0, 0.1, 0.02}) {
        const auto loss = nce(q, at_angle(0.8), {at_angle(0.2), at_angle(0.5)}, tau);
        CHECK(loss < prev);
        prev = loss;
    }
    CHECK(prev < 1e-6);
}

TEST_CASE("InfoNCE stays finite at small temperatures") {
    const std::vector<double> q{1, 0, 0};
    for (double sp : {-1.0, -0.3, 0.0, 0.7, 1.0}) {
        for (double sn : {-1.0, 0.2, 1.0}) {
            for (double tau : {1e-4, 0.02, 1.0}) {
                const double loss = nce(q, at_angle(sp), {at_angle(sn), at_angle(-sn)}, tau);
                CHECK(std::isfinite(loss));
                CHECK(loss >= 0.0);
            }
        }
    }
    // Positive well below the negatives: loss ~ (s_n - s_p) / tau.
    const double loss = nce(q, at_angle(-1.0), {at_angle(1.0)}, 1e-4);
    CHECK(loss == doctest::Approx(2.0 / 1e-4).epsilon(1e-9));
}

TEST_CASE("in-batch negatives") {
    std::vector<ContrastiveExample> batch{
        {{1, 0}, {2, 0}, {{3, 0}}},
        {{0, 1}, {0, 2}, {{0, 3}, {0, 4}}},
        {{1, 1}, {2, 2}, {}},
    };
    const auto negs = in_batch_negatives(batch, 1);
    const std::vector<std::vector<double>> want{{0, 3}, {0, 4}, {2, 0}, {3, 0}, {2, 2}};
    CHECK(negs == want);
    CHECK(in_batch_negatives(batch, 2).size() == 5);
}
