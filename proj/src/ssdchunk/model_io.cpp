// SPDX-License-Identifier: Apache-2.0

#include "ssdchunk/model_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <sstream>

#include <json.hpp>

#include "ssdchunk/errors.hpp"
#include "ssdchunk/rng.hpp"

namespace ssdchunk {

namespace {

constexpr std::string_view kFormatName = "ssdchunk-model";
constexpr int kFormatVersion = 1;
constexpr std::size_t kMaxHeaderBytes = 1 << 16;

nlohmann::json spec_document(const ModelSpec& spec) {
    return nlohmann::json{{"seed", spec.seed},
                          {"L", spec.layers},
                          {"d", spec.d_model},
                          {"H", spec.heads},
                          {"N", spec.state_dim},
                          {"vocab_size", spec.vocab_size},
                          {"Q", spec.chunk_size},
                          {"V", spec.vertical_chunk},
                          {"dense_limit", spec.dense_limit}};
}

ModelSpec spec_from_document(const nlohmann::json& doc) {
    if (!doc.is_object()) fail(ErrorKind::Format, "model spec must be a JSON object");
    ModelSpec spec;
    for (const auto& [key, value] : doc.items()) {
        if (!value.is_number_unsigned()) {
            fail(ErrorKind::Format, "model spec field '" + key + "' must be a non-negative integer");
        }
        const auto v = value.get<std::uint64_t>();
        if (key == "seed") spec.seed = v;
        else if (key == "L") spec.layers = v;
        else if (key == "d") spec.d_model = v;
        else if (key == "H") spec.heads = v;
        else if (key == "N") spec.state_dim = v;
        else if (key == "vocab_size") spec.vocab_size = v;
        else if (key == "Q") spec.chunk_size = v;
        else if (key == "V") spec.vertical_chunk = v;
        else if (key == "dense_limit") spec.dense_limit = v;
        else fail(ErrorKind::Format, "unknown model spec field '" + key + "'");
    }
    spec.validate();
    return spec;
}

std::string hex64(std::uint64_t value) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
    return buf;
}

void fill(SplitMix64& rng, std::vector<double>& out, std::size_t count, double scale) {
    out.resize(count);
    for (auto& v : out) v = rng.uniform(-1.0, 1.0) * scale;
}

}  // namespace

void ModelSpec::validate() const {
    if (layers == 0 || d_model == 0 || heads == 0 || state_dim == 0 || chunk_size == 0 || vertical_chunk == 0 ||
        dense_limit == 0) {
        fail(ErrorKind::Validation, "model spec fields must be positive");
    }
    if (vocab_size < 2) fail(ErrorKind::Validation, "vocab_size must be >= 2 (one id is reserved for EOS)");
    if (vertical_chunk % chunk_size != 0) {
        fail(ErrorKind::Validation, "vertical chunk size V must be a multiple of chunk size Q");
    }
}

std::size_t resolve_dense_limit(std::size_t configured) {
    const char* env = std::getenv("SSD_CHUNK_DENSE_LIMIT");
    if (!env || *env == '\0') return configured;
    char* end = nullptr;
    const unsigned long long value = std::strtoull(env, &end, 10);
    if (*end != '\0' || value == 0 || *env == '-') {
        fail(ErrorKind::Validation, std::string("SSD_CHUNK_DENSE_LIMIT must be a positive integer, got '") + env + "'");
    }
    return static_cast<std::size_t>(value);
}

// ---------------------------------------------------------------------------

StackedModel generate_model(const ModelSpec& spec) {
    spec.validate();
    const std::size_t d = spec.d_model;
    const std::size_t heads = spec.heads;
    const std::size_t n_state = spec.state_dim;
    const double in_scale = 1.0 / std::sqrt(static_cast<double>(d));
    const double out_scale = 1.0 / std::sqrt(static_cast<double>(heads));

    SplitMix64 rng(spec.seed);
    StackedModel model;
    model.spec = spec;
    fill(rng, model.embedding, spec.vocab_size * d, 1.0);
    model.layers.reserve(spec.layers);
    for (std::size_t l = 0; l < spec.layers; ++l) {
        LayerParams p;
        p.d_model = d;
        p.heads = heads;
        p.state_dim = n_state;
        fill(rng, p.w_a, heads * d, in_scale);
        p.b_a.resize(heads);
        for (auto& v : p.b_a) v = -1.0 - 3.0 * rng.uniform();
        fill(rng, p.w_x, heads * d, in_scale);
        fill(rng, p.w_b, heads * n_state * d, in_scale);
        fill(rng, p.w_c, heads * n_state * d, in_scale);
        fill(rng, p.w_out, d * heads, out_scale);
        p.gamma.resize(d);
        for (auto& v : p.gamma) v = 1.0 + 0.1 * rng.uniform(-1.0, 1.0);
        model.layers.push_back(std::move(p));
    }
    return model;
}

std::size_t payload_length(const ModelSpec& spec) {
    const std::size_t d = spec.d_model;
    const std::size_t h = spec.heads;
    const std::size_t per_layer = h * d + h + h * d + 2 * h * spec.state_dim * d + d * h + d;
    return spec.vocab_size * d + spec.layers * per_layer;
}

std::vector<double> parameter_payload(const StackedModel& model) {
    std::vector<double> out;
    out.reserve(payload_length(model.spec));
    out.insert(out.end(), model.embedding.begin(), model.embedding.end());
    for (const auto& p : model.layers) {
        for (const auto* field : {&p.w_a, &p.b_a, &p.w_x, &p.w_b, &p.w_c, &p.w_out, &p.gamma}) {
            out.insert(out.end(), field->begin(), field->end());
        }
    }
    return out;
}

StackedModel model_from_payload(const ModelSpec& spec, std::span<const double> payload) {
    spec.validate();
    if (payload.size() != payload_length(spec)) {
        fail(ErrorKind::Format, "payload holds " + std::to_string(payload.size()) + " values, header implies " +
                                    std::to_string(payload_length(spec)));
    }
    auto cursor = payload.begin();
    auto take = [&](std::vector<double>& field, std::size_t count) {
        field.assign(cursor, cursor + static_cast<std::ptrdiff_t>(count));
        cursor += static_cast<std::ptrdiff_t>(count);
    };
    const std::size_t d = spec.d_model;
    const std::size_t h = spec.heads;
    const std::size_t n = spec.state_dim;
    StackedModel model;
    model.spec = spec;
    take(model.embedding, spec.vocab_size * d);
    for (std::size_t l = 0; l < spec.layers; ++l) {
        LayerParams p;
        p.d_model = d;
        p.heads = h;
        p.state_dim = n;
        take(p.w_a, h * d);
        take(p.b_a, h);
        take(p.w_x, h * d);
        take(p.w_b, h * n * d);
        take(p.w_c, h * n * d);
        take(p.w_out, d * h);
        take(p.gamma, d);
        model.layers.push_back(std::move(p));
    }
    model.validate();
    return model;
}

std::uint64_t fnv1a64(std::span<const unsigned char> bytes, std::uint64_t hash) {
    for (unsigned char byte : bytes) {
        hash ^= byte;
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

std::vector<unsigned char> encode_payload(std::span<const double> payload) {
    std::vector<unsigned char> bytes;
    bytes.reserve(payload.size() * 8);
    for (double v : payload) {
        const auto bits = std::bit_cast<std::uint64_t>(v);
        for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<unsigned char>(bits >> (8 * i)));
    }
    return bytes;
}

std::uint64_t payload_hash(const StackedModel& model) {
    return fnv1a64(encode_payload(parameter_payload(model)));
}

// ---------------------------------------------------------------------------

namespace {

std::uint64_t file_checksum(const std::string& header_without_checksum, std::span<const unsigned char> payload) {
    const auto* head = reinterpret_cast<const unsigned char*>(header_without_checksum.data());
    return fnv1a64(payload, fnv1a64({head, header_without_checksum.size()}));
}

}  // namespace

void save_model(const StackedModel& model, const std::string& path) {
    model.validate();
    const auto payload = encode_payload(parameter_payload(model));
    nlohmann::json header{{"format", kFormatName},
                          {"version", kFormatVersion},
                          {"spec", spec_document(model.spec)},
                          {"payload_doubles", payload.size() / 8}};
    header["checksum"] = hex64(file_checksum(header.dump(), payload));

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::Io, "cannot open '" + path + "' for writing");
    out << header.dump() << '\n';
    out.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
    if (!out) fail(ErrorKind::Io, "failed writing '" + path + "'");
}

StackedModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Io, "cannot open '" + path + "'");
    const std::vector<unsigned char> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};

    const auto limit = bytes.begin() + static_cast<std::ptrdiff_t>(std::min(bytes.size(), kMaxHeaderBytes));
    const auto newline = std::find(bytes.begin(), limit, '\n');
    if (newline == limit) {
        fail(ErrorKind::Format, "model file has no header line");
    }
    const std::string header_line(bytes.begin(), newline);
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(header_line);
    } catch (const nlohmann::json::exception&) {
        fail(ErrorKind::Format, "model header is not valid JSON");
    }
    // Only the canonical serialization is accepted, so any altered header
    // byte is caught here or by the checksum.
    if (!header.is_object() || header.dump() != header_line) fail(ErrorKind::Format, "model header is not canonical");
    if (header.value("format", std::string()) != kFormatName) fail(ErrorKind::Format, "not a ssdchunk model file");
    if (header.value("version", 0) != kFormatVersion) fail(ErrorKind::Format, "unsupported model file version");
    if (!header.contains("spec") || !header.contains("checksum") || !header["checksum"].is_string() ||
        !header.contains("payload_doubles") || !header["payload_doubles"].is_number_unsigned()) {
        fail(ErrorKind::Format, "model header is missing required fields");
    }
    const ModelSpec spec = spec_from_document(header["spec"]);
    const std::size_t expected = payload_length(spec);
    const std::span<const unsigned char> payload(bytes.data() + (newline - bytes.begin()) + 1,
                                                 bytes.end() - newline - 1);
    if (header["payload_doubles"].get<std::size_t>() != expected || payload.size() != expected * 8) {
        fail(ErrorKind::Format, "payload length " + std::to_string(payload.size()) + " bytes does not match header (" +
                                    std::to_string(expected * 8) + " expected)");
    }
    const std::string recorded = header["checksum"].get<std::string>();
    header.erase("checksum");
    if (hex64(file_checksum(header.dump(), payload)) != recorded) {
        fail(ErrorKind::Integrity, "model checksum mismatch");
    }

    std::vector<double> values(expected);
    for (std::size_t i = 0; i < expected; ++i) {
        std::uint64_t bits = 0;
        for (int k = 0; k < 8; ++k) bits |= static_cast<std::uint64_t>(payload[i * 8 + k]) << (8 * k);
        values[i] = std::bit_cast<double>(bits);
    }
    return model_from_payload(spec, values);
}

std::string spec_to_json(const ModelSpec& spec) { return spec_document(spec).dump(2); }

ModelSpec spec_from_json(std::string_view document) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(document);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Format, std::string("model spec is not valid JSON: ") + e.what());
    }
    return spec_from_document(doc);
}

ModelSpec load_spec(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Io, "cannot open '" + path + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return spec_from_json(buffer.str());
}

}  // namespace ssdchunk
