#include "saratrx/manifest.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace saratrx {

using nlohmann::json;

Split split_from_string(const std::string& s) {
    if (s == "train") return Split::Train;
    if (s == "test") return Split::Test;
    if (s == "unlabeled") return Split::Unlabeled;
    throw ValidationError("invalid split value: \"" + s + "\" (expected train|test|unlabeled)");
}

std::string to_string(Split split) {
    switch (split) {
        case Split::Train: return "train";
        case Split::Test: return "test";
        case Split::Unlabeled: return "unlabeled";
    }
    throw ValidationError("bad split enum");
}

std::vector<ManifestRecord> CorpusManifest::with_split(Split split) const {
    std::vector<ManifestRecord> out;
    for (const auto& r : records)
        if (r.split == split) out.push_back(r);
    return out;
}

std::vector<std::string> CorpusManifest::class_labels() const {
    std::set<std::string> labels;
    for (const auto& r : records)
        if (r.class_label) labels.insert(*r.class_label);
    return {labels.begin(), labels.end()};
}

namespace {

json record_to_json(const ManifestRecord& r) {
    json j;
    j["schema_version"] = kManifestSchemaVersion;
    j["path"] = r.path;
    j["dataset"] = r.dataset;
    j["split"] = to_string(r.split);
    if (r.class_label) j["class"] = *r.class_label;
    if (r.resolution_m) j["resolution_m"] = *r.resolution_m;
    if (r.band) j["band"] = *r.band;
    if (r.polarization) j["polarization"] = *r.polarization;
    if (r.parent) j["parent"] = *r.parent;
    if (r.tile_origin) j["tile_origin"] = {r.tile_origin->first, r.tile_origin->second};
    return j;
}

ManifestRecord record_from_json(const json& j, std::size_t line_no) {
    auto fail = [&](const std::string& msg) {
        throw ValidationError("manifest line " + std::to_string(line_no) + ": " + msg);
    };
    ManifestRecord r;
    if (!j.contains("path")) fail("missing \"path\"");
    r.path = j.at("path").get<std::string>();
    r.dataset = j.value("dataset", std::string{});
    try {
        r.split = split_from_string(j.value("split", std::string{"unlabeled"}));
    } catch (const ValidationError& e) {
        fail(e.what());
    }
    if (j.contains("class")) r.class_label = j.at("class").get<std::string>();
    if (j.contains("resolution_m")) r.resolution_m = j.at("resolution_m").get<double>();
    if (j.contains("band")) r.band = j.at("band").get<std::string>();
    if (j.contains("polarization")) r.polarization = j.at("polarization").get<std::string>();
    if (j.contains("parent")) r.parent = j.at("parent").get<std::string>();
    if (j.contains("tile_origin")) {
        const auto& o = j.at("tile_origin");
        if (!o.is_array() || o.size() != 2) fail("tile_origin must be [row, col]");
        r.tile_origin = {o[0].get<int>(), o[1].get<int>()};
    }
    return r;
}

}  // namespace

std::string to_jsonl(const CorpusManifest& manifest) {
    std::ostringstream out;
    for (const auto& r : manifest.records) out << record_to_json(r).dump() << '\n';
    return out.str();
}

CorpusManifest manifest_from_jsonl(const std::string& text) {
    CorpusManifest m;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ValidationError("manifest line " + std::to_string(line_no) + ": " + e.what());
        }
        m.records.push_back(record_from_json(j, line_no));
    }
    return m;
}

void save_manifest(const CorpusManifest& manifest, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw RuntimeError("cannot write manifest: " + path.string());
    out << to_jsonl(manifest);
}

CorpusManifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw RuntimeError("cannot read manifest: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return manifest_from_jsonl(buf.str());
}

}  // namespace saratrx
