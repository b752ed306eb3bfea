#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "saratrx/common.hpp"
#include "saratrx/manifest.hpp"

namespace saratrx::datakit {

// Images larger than `threshold` on either axis are cut into `tile`-sized
// tiles with `overlap`; final tiles shift inward so every pixel is covered
// without out-of-bounds reads.
struct TilePolicy {
    int threshold = 1000;
    int tile = 512;
    int overlap = 64;
    // Per-dataset tile-size overrides (e.g. known crop sizes).
    std::map<std::string, int> dataset_tile;

    void validate() const;
    int tile_for(const std::string& dataset) const;
};

struct Tile {
    Image pixels;
    int origin_row = 0;
    int origin_col = 0;
    bool passthrough = false;
};

std::vector<Tile> slice_large(const SarImage& image, const TilePolicy& policy,
                              const std::string& dataset = {});

struct IngestReport {
    CorpusManifest manifest;
    std::vector<std::string> errors;  // one message per failed record
};

// Validates records and files, copies them byte-for-byte into out_dir, and
// re-emits the manifest. Per-record failures are reported and skipped;
// more than 10% failures aborts the run.
IngestReport ingest(const CorpusManifest& manifest_in, const std::filesystem::path& in_root,
                    const std::filesystem::path& out_dir);

enum class RebalanceStrategy { None, OversampleToMax, UndersampleToMin };
RebalanceStrategy rebalance_from_string(const std::string& s);

// Equalizes per-class record counts. Oversampled duplicates keep their
// original path; undersampling selects a deterministic subset.
CorpusManifest rebalance(const CorpusManifest& manifest, RebalanceStrategy strategy,
                         std::uint64_t seed);

// Percentile-clipped (1st-99th), log-compressed amplitude mapped through a
// monotone colormap. Visualization only.
void pseudo_color(const SarImage& image, const std::string& colormap,
                  const std::filesystem::path& out_path);

}  // namespace saratrx::datakit
