#include "saratrx/datakit.hpp"

#include <algorithm>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "saratrx/imageio.hpp"
#include "saratrx/rng.hpp"

namespace saratrx::datakit {

void TilePolicy::validate() const {
    if (!(0 <= overlap && overlap < tile && tile <= threshold))
        throw ValidationError("tile policy requires 0 <= overlap < tile <= threshold");
    for (const auto& [ds, t] : dataset_tile)
        if (t <= overlap || t > threshold)
            throw ValidationError("tile override for dataset \"" + ds + "\" out of range");
}

int TilePolicy::tile_for(const std::string& dataset) const {
    auto it = dataset_tile.find(dataset);
    return it == dataset_tile.end() ? tile : it->second;
}

namespace {

std::vector<int> tile_starts(int dim, int tile, int stride) {
    std::vector<int> starts;
    for (int s = 0;; s += stride) {
        if (s + tile >= dim) {
            // Final tile shifts inward so the image is fully covered.
            if (starts.empty() || starts.back() != dim - tile) starts.push_back(dim - tile);
            break;
        }
        starts.push_back(s);
    }
    return starts;
}

}  // namespace

std::vector<Tile> slice_large(const SarImage& image, const TilePolicy& policy,
                              const std::string& dataset) {
    policy.validate();
    validate_amplitude(image.pixels, "slice_large");
    const int h = int(image.rows()), w = int(image.cols());
    if (std::max(h, w) <= policy.threshold) {
        Tile t;
        t.pixels = image.pixels;
        t.passthrough = true;
        return {std::move(t)};
    }
    const int tile = policy.tile_for(dataset);
    if (h < tile || w < tile)
        throw ValidationError("slice_large: tile larger than image on one axis");
    const int stride = tile - policy.overlap;
    std::vector<Tile> tiles;
    for (int r0 : tile_starts(h, tile, stride))
        for (int c0 : tile_starts(w, tile, stride)) {
            Tile t;
            t.pixels = image.pixels.block(r0, c0, tile, tile);
            t.origin_row = r0;
            t.origin_col = c0;
            tiles.push_back(std::move(t));
        }
    return tiles;
}

IngestReport ingest(const CorpusManifest& manifest_in, const std::filesystem::path& in_root,
                    const std::filesystem::path& out_dir) {
    namespace fs = std::filesystem;
    if (manifest_in.empty()) throw ValidationError("ingest: empty corpus manifest");
    std::error_code ec;
    fs::create_directories(out_dir / "files", ec);
    if (ec) throw RuntimeError("cannot create ingest dir: " + out_dir.string());

    IngestReport report;
    std::size_t index = 0;
    for (const auto& rec : manifest_in.records) {
        ++index;
        const fs::path src = fs::path(rec.path).is_absolute() ? fs::path(rec.path)
                                                              : in_root / rec.path;
        try {
            SarImage img = imageio::load_gray(src);  // validates format and depth
            validate_amplitude(img.pixels, "ingest");
            char name[64];
            std::snprintf(name, sizeof(name), "files/%06zu_%s", index,
                          src.filename().string().c_str());
            // Byte-for-byte copy keeps 16-bit values exact.
            fs::copy_file(src, out_dir / name, fs::copy_options::overwrite_existing);
            ManifestRecord out = rec;
            out.path = name;
            report.manifest.records.push_back(std::move(out));
        } catch (const std::exception& e) {
            report.errors.push_back("record " + std::to_string(index) + " (" + rec.path +
                                    "): " + e.what());
        }
    }
    if (report.errors.size() * 10 > manifest_in.size())
        throw RuntimeError("ingest: more than 10% of records failed (" +
                           std::to_string(report.errors.size()) + "/" +
                           std::to_string(manifest_in.size()) + ")");
    save_manifest(report.manifest, out_dir / "manifest.jsonl");
    return report;
}

RebalanceStrategy rebalance_from_string(const std::string& s) {
    if (s == "none") return RebalanceStrategy::None;
    if (s == "oversample-to-max") return RebalanceStrategy::OversampleToMax;
    if (s == "undersample-to-min") return RebalanceStrategy::UndersampleToMin;
    throw ValidationError("unknown rebalance strategy: " + s);
}

CorpusManifest rebalance(const CorpusManifest& manifest, RebalanceStrategy strategy,
                         std::uint64_t seed) {
    if (strategy == RebalanceStrategy::None) return manifest;

    std::vector<std::string> unlabeled;
    std::map<std::string, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < manifest.size(); ++i) {
        const auto& rec = manifest.records[i];
        if (!rec.class_label) unlabeled.push_back(rec.path);
        else by_class[*rec.class_label].push_back(i);
    }
    if (!unlabeled.empty()) {
        std::string msg = "rebalance: records missing class labels:";
        for (const auto& p : unlabeled) msg += " " + p;
        throw ValidationError(msg);
    }
    if (by_class.empty()) throw ValidationError("rebalance: no labeled records");

    std::size_t max_count = 0, min_count = SIZE_MAX;
    for (const auto& [cls, idx] : by_class) {
        max_count = std::max(max_count, idx.size());
        min_count = std::min(min_count, idx.size());
    }

    CorpusManifest out;
    Rng rng(seed);
    if (strategy == RebalanceStrategy::UndersampleToMin) {
        std::vector<bool> keep(manifest.size(), false);
        for (auto& [cls, idx] : by_class) {
            std::vector<std::size_t> pool = idx;
            // Partial Fisher-Yates: keep the first min_count after shuffling.
            for (std::size_t i = 0; i < min_count; ++i) {
                std::size_t j = i + std::size_t(rng.below(pool.size() - i));
                std::swap(pool[i], pool[j]);
                keep[pool[i]] = true;
            }
        }
        for (std::size_t i = 0; i < manifest.size(); ++i)
            if (keep[i]) out.records.push_back(manifest.records[i]);
    } else {
        out = manifest;
        for (auto& [cls, idx] : by_class)
            for (std::size_t need = max_count - idx.size(); need > 0; --need)
                out.records.push_back(manifest.records[idx[std::size_t(rng.below(idx.size()))]]);
    }
    return out;
}

void pseudo_color(const SarImage& image, const std::string& colormap,
                  const std::filesystem::path& out_path) {
    validate_amplitude(image.pixels, "pseudo_color");
    int cmap;
    if (colormap == "viridis") cmap = cv::COLORMAP_VIRIDIS;
    else if (colormap == "inferno") cmap = cv::COLORMAP_INFERNO;
    else if (colormap == "magma") cmap = cv::COLORMAP_MAGMA;
    else throw ValidationError("unknown colormap: " + colormap);

    std::vector<double> sorted(image.pixels.data(), image.pixels.data() + image.pixels.size());
    std::sort(sorted.begin(), sorted.end());
    auto pct = [&](double q) {
        return sorted[std::size_t(q * double(sorted.size() - 1))];
    };
    const double lo = pct(0.01), hi = pct(0.99);
    const double lo_log = std::log1p(lo);
    const double denom = std::max(1e-12, std::log1p(hi) - lo_log);

    cv::Mat gray(int(image.rows()), int(image.cols()), CV_8U);
    for (int y = 0; y < gray.rows; ++y)
        for (int x = 0; x < gray.cols; ++x) {
            const double v = std::clamp(image.pixels(y, x), lo, hi);
            const double t = (std::log1p(v) - lo_log) / denom;
            gray.at<std::uint8_t>(y, x) = std::uint8_t(std::clamp(t * 255.0, 0.0, 255.0));
        }
    cv::Mat colored;
    cv::applyColorMap(gray, colored, cmap);
    if (!cv::imwrite(out_path.string(), colored))
        throw RuntimeError("cannot write pseudo-color image: " + out_path.string());
}

}  // namespace saratrx::datakit
