#include "saratrx/specklesim.hpp"

#include <cmath>

#include "saratrx/features.hpp"
#include "saratrx/imageio.hpp"
#include "saratrx/rng.hpp"

namespace saratrx::specklesim {

SarImage gamma_speckle(const SarImage& clean, const SpeckleParams& params) {
    if (params.looks < 1) throw ValidationError("gamma_speckle: looks must be >= 1");
    validate_amplitude(clean.pixels, "gamma_speckle");
    Rng rng(params.seed);
    SarImage out;
    out.meta = clean.meta;
    out.pixels = Image(clean.rows(), clean.cols());
    for (Eigen::Index y = 0; y < clean.rows(); ++y)
        for (Eigen::Index x = 0; x < clean.cols(); ++x)
            out.pixels(y, x) = clean.pixels(y, x) * rng.gamma_unit_mean(params.looks);
    return out;
}

namespace {

bool inside_target(const SceneTarget& t, double row, double col) {
    const double dy = row - t.center_row;
    const double dx = col - t.center_col;
    const double c = std::cos(t.orientation), s = std::sin(t.orientation);
    const double u = c * dx + s * dy;
    const double v = -s * dx + c * dy;
    const double a = t.size;
    const double b = 0.6 * t.size;
    switch (t.shape) {
        case TargetShape::Rectangle:
            return std::abs(u) <= a && std::abs(v) <= b;
        case TargetShape::Ellipse:
            return (u * u) / (a * a) + (v * v) / (b * b) <= 1.0;
        case TargetShape::LShape: {
            const bool bar_h = std::abs(u) <= a && v >= -a && v <= -a + 0.5 * a;
            const bool bar_v = u >= -a && u <= -a + 0.5 * a && std::abs(v) <= a;
            return bar_h || bar_v;
        }
        case TargetShape::TwoBlob: {
            const double rr = 0.55 * a;
            const double d1 = (u - 0.8 * a) * (u - 0.8 * a) + v * v;
            const double d2 = (u + 0.8 * a) * (u + 0.8 * a) + v * v;
            return d1 <= rr * rr || d2 <= rr * rr;
        }
    }
    return false;
}

void validate_spec(const SceneSpec& spec) {
    if (spec.height < 1 || spec.width < 1) throw ValidationError("scene: empty size");
    if (spec.class_id < 0 || spec.class_id >= spec.num_classes)
        throw ValidationError("scene: class_id out of range");
    if (spec.background_reflectivity <= 0.0)
        throw ValidationError("scene: background reflectivity must be > 0");
    for (const auto& t : spec.targets) {
        if (t.contrast < 1.0) throw ValidationError("scene: target contrast must be >= 1");
        const double extent = 1.6 * t.size;
        if (t.center_row - extent < 0 || t.center_row + extent > spec.height ||
            t.center_col - extent < 0 || t.center_col + extent > spec.width)
            throw ValidationError("scene: target out of bounds");
    }
}

}  // namespace

Image render_reflectivity(const SceneSpec& spec) {
    validate_spec(spec);
    Image amp = Image::Constant(spec.height, spec.width, spec.background_reflectivity);
    for (const auto& t : spec.targets)
        for (int y = 0; y < spec.height; ++y)
            for (int x = 0; x < spec.width; ++x)
                if (inside_target(t, y, x))
                    amp(y, x) = spec.background_reflectivity * t.contrast;
    return amp;
}

std::pair<SarImage, int> synth_scene(const SceneSpec& spec, const SpeckleParams& params) {
    const Image amp = render_reflectivity(spec);
    // Speckle acts on intensity; amplitude is its square root.
    SarImage intensity{amp.square(), std::nullopt};
    SarImage speckled = gamma_speckle(intensity, params);
    SarImage out;
    out.pixels = speckled.pixels.sqrt();
    return {std::move(out), spec.class_id};
}

SceneSpec corpus_scene(const CorpusConfig& cfg, int index) {
    if (cfg.num_classes < 1) throw ValidationError("corpus: num_classes must be >= 1");
    Rng rng = Rng::for_index(cfg.seed, std::uint64_t(index));
    SceneSpec spec;
    spec.height = cfg.height;
    spec.width = cfg.width;
    spec.num_classes = cfg.num_classes;
    spec.class_id = index % cfg.num_classes;

    const int shape_idx = spec.class_id % kNumShapes;
    const int size_bin = spec.class_id / kNumShapes;
    const double base = std::min(cfg.height, cfg.width);

    SceneTarget t;
    t.shape = TargetShape(shape_idx);
    t.size = base * (0.09 + 0.09 * size_bin + 0.04 * rng.uniform());
    t.orientation = rng.uniform(0.0, M_PI);
    t.contrast = rng.uniform(2.5, 6.0);
    const double margin = 1.6 * t.size + 1.0;
    t.center_row = rng.uniform(margin, cfg.height - margin);
    t.center_col = rng.uniform(margin, cfg.width - margin);
    spec.targets.push_back(t);
    return spec;
}

CorpusManifest make_corpus(const CorpusConfig& cfg) {
    if (cfg.num_images < 1) throw ValidationError("corpus: num_images must be >= 1");
    if (cfg.looks_mix.empty()) throw ValidationError("corpus: empty looks mix");
    for (int looks : cfg.looks_mix)
        if (looks < 1) throw ValidationError("corpus: looks must be >= 1");
    if (!(cfg.train_fraction > 0.0 && cfg.train_fraction <= 1.0))
        throw ValidationError("corpus: train_fraction must be in (0, 1]");
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(cfg.out_dir / "images", ec);
    if (ec) throw RuntimeError("cannot create corpus dir: " + cfg.out_dir.string());

    // Per-class index streams so the train/test cut is balanced per class.
    std::vector<int> seen_of_class(std::size_t(cfg.num_classes), 0);
    const int per_class = cfg.num_images / cfg.num_classes;

    CorpusManifest manifest;
    for (int i = 0; i < cfg.num_images; ++i) {
        SceneSpec spec = corpus_scene(cfg, i);
        Rng rng = Rng::for_index(cfg.seed ^ 0x5eedf00dull, std::uint64_t(i));
        const int looks = cfg.looks_mix[rng.below(cfg.looks_mix.size())];

        Image amplitude;
        if (cfg.generic_style) {
            // Speckle-free blurred scene standing in for generic imagery.
            Image clean = render_reflectivity(spec);
            amplitude = features::gaussian_blur(clean, 1.5);
            for (Eigen::Index y = 0; y < amplitude.rows(); ++y)
                for (Eigen::Index x = 0; x < amplitude.cols(); ++x)
                    amplitude(y, x) = std::max(0.0, amplitude(y, x) + 0.05 * rng.normal());
        } else {
            SpeckleParams sp{looks, Rng::for_index(cfg.seed, std::uint64_t(i)).next_u64()};
            amplitude = synth_scene(spec, sp).first.pixels;
        }

        char name[64];
        std::snprintf(name, sizeof(name), "images/img_%05d.png", i);
        imageio::save_png16(amplitude * imageio::kAmplitudeScale, cfg.out_dir / name);

        const int k = seen_of_class[std::size_t(spec.class_id)]++;
        const int train_count = int(std::lround(cfg.train_fraction * per_class));

        ManifestRecord rec;
        rec.path = name;
        rec.dataset = cfg.generic_style ? "synthetic-generic" : "synthetic-sar";
        rec.split = (k < train_count) ? Split::Train : Split::Test;
        rec.class_label = "c" + std::to_string(spec.class_id);
        manifest.records.push_back(std::move(rec));
    }
    save_manifest(manifest, cfg.out_dir / "manifest.jsonl");
    return manifest;
}

}  // namespace saratrx::specklesim
