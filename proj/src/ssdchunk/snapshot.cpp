// SPDX-License-Identifier: Apache-2.0
//
// Resumable per-layer state snapshots as JSON. Doubles are written in
// shortest round-trip form, so load(save(s)) is bit-exact.

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ssdchunk/errors.hpp"
#include "ssdchunk/layer_stack.hpp"

namespace ssdchunk {

namespace {

constexpr int kSnapshotVersion = 1;

std::size_t read_extent(const nlohmann::json& doc, const char* key) {
    const auto it = doc.find(key);
    if (it == doc.end() || !it->is_number_unsigned()) {
        fail(ErrorKind::Format, std::string("snapshot field '") + key + "' missing or not a non-negative integer");
    }
    return it->get<std::size_t>();
}

}  // namespace

std::string snapshot_to_json(const StateSnapshot& snapshot) {
    nlohmann::json doc;
    doc["version"] = kSnapshotVersion;
    doc["layer_count"] = snapshot.layers.size();
    doc["b"] = snapshot.batch;
    doc["h"] = snapshot.heads;
    doc["n"] = snapshot.state_dim;
    auto& states = doc["states"] = nlohmann::json::array();
    for (const auto& layer : snapshot.layers) {
        states.push_back(std::vector<double>(layer.values().begin(), layer.values().end()));
    }
    return doc.dump();
}

StateSnapshot snapshot_from_json(std::string_view document) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(document);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Format, std::string("snapshot is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) fail(ErrorKind::Format, "snapshot must be a JSON object");
    if (read_extent(doc, "version") != kSnapshotVersion) fail(ErrorKind::Format, "unsupported snapshot version");

    StateSnapshot snapshot;
    const std::size_t layer_count = read_extent(doc, "layer_count");
    snapshot.batch = read_extent(doc, "b");
    snapshot.heads = read_extent(doc, "h");
    snapshot.state_dim = read_extent(doc, "n");
    const auto states = doc.find("states");
    if (states == doc.end() || !states->is_array() || states->size() != layer_count) {
        fail(ErrorKind::Format, "snapshot 'states' must hold one array per layer");
    }
    const std::size_t per_layer = snapshot.batch * snapshot.heads * snapshot.state_dim;
    for (const auto& entry : *states) {
        if (!entry.is_array() || entry.size() != per_layer) {
            fail(ErrorKind::Format, "snapshot state array has the wrong length");
        }
        std::vector<double> values;
        values.reserve(per_layer);
        for (const auto& v : entry) {
            if (!v.is_number()) fail(ErrorKind::Format, "snapshot state entries must be numbers");
            values.push_back(v.get<double>());
        }
        snapshot.layers.emplace_back(snapshot.batch, snapshot.heads, snapshot.state_dim, std::move(values));
    }
    return snapshot;
}

void save_snapshot(const StateSnapshot& snapshot, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::Io, "cannot open '" + path + "' for writing");
    out << snapshot_to_json(snapshot);
    if (!out) fail(ErrorKind::Io, "failed writing '" + path + "'");
}

StateSnapshot load_snapshot(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Io, "cannot open '" + path + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return snapshot_from_json(buffer.str());
}

}  // namespace ssdchunk
