#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "saratrx/common.hpp"

namespace saratrx {

inline constexpr int kManifestSchemaVersion = 1;

enum class Split { Train, Test, Unlabeled };

Split split_from_string(const std::string& s);
std::string to_string(Split split);

// One corpus record. Tile records carry parent + tile_origin.
struct ManifestRecord {
    std::string path;
    std::string dataset;
    Split split = Split::Unlabeled;
    std::optional<std::string> class_label;
    std::optional<double> resolution_m;
    std::optional<std::string> band;
    std::optional<std::string> polarization;
    std::optional<std::string> parent;
    std::optional<std::pair<int, int>> tile_origin;  // (row, col)

    bool operator==(const ManifestRecord&) const = default;
};

struct CorpusManifest {
    std::vector<ManifestRecord> records;

    bool empty() const { return records.empty(); }
    std::size_t size() const { return records.size(); }

    std::vector<ManifestRecord> with_split(Split split) const;
    // Distinct class labels among labeled records, sorted.
    std::vector<std::string> class_labels() const;
};

// JSONL, one record per line, schema_version on every record. Emission uses
// alphabetical key order so equal manifests are byte-identical.
std::string to_jsonl(const CorpusManifest& manifest);
CorpusManifest manifest_from_jsonl(const std::string& text);

void save_manifest(const CorpusManifest& manifest, const std::filesystem::path& path);
CorpusManifest load_manifest(const std::filesystem::path& path);

}  // namespace saratrx
