#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "saratrx/common.hpp"
#include "saratrx/manifest.hpp"

namespace saratrx::specklesim {

enum class TargetShape { Rectangle, Ellipse, LShape, TwoBlob };
inline constexpr int kNumShapes = 4;

struct SceneTarget {
    TargetShape shape = TargetShape::Rectangle;
    double center_row = 0.0;
    double center_col = 0.0;
    double size = 0.0;         // characteristic half-extent in pixels
    double orientation = 0.0;  // radians
    double contrast = 1.0;     // amplitude multiplier, >= 1
};

struct SceneSpec {
    int height = 64;
    int width = 64;
    double background_reflectivity = 1.0;
    std::vector<SceneTarget> targets;
    int class_id = 0;
    int num_classes = 8;
};

struct SpeckleParams {
    int looks = 1;
    std::uint64_t seed = 0;
};

// Multiplicative gamma speckle: out = clean * S with S i.i.d.
// Gamma(shape=looks, scale=1/looks), unit mean, variance 1/looks.
// Applied in whatever domain `clean` lives in.
SarImage gamma_speckle(const SarImage& clean, const SpeckleParams& params);

// Clean amplitude map of the scene (background with target regions
// multiplied by contrast); no noise.
Image render_reflectivity(const SceneSpec& spec);

// Renders the reflectivity map, applies gamma speckle in the intensity
// domain, and returns the amplitude image plus the class label.
std::pair<SarImage, int> synth_scene(const SceneSpec& spec, const SpeckleParams& params);

struct CorpusConfig {
    int num_images = 2000;
    int num_classes = 8;
    int height = 64;
    int width = 64;
    std::vector<int> looks_mix = {1, 2, 4};
    double train_fraction = 0.8;
    std::uint64_t seed = 0;
    std::filesystem::path out_dir;
    // Clean (speckle-free, blurred) rendering: used as the stand-in for a
    // generic-image corpus in two-step pre-training.
    bool generic_style = false;
};

// Deterministic scene for image `index` of a corpus. class id cycles
// round-robin so class counts stay balanced.
SceneSpec corpus_scene(const CorpusConfig& cfg, int index);

// Writes 16-bit PNGs plus a JSONL manifest with balanced classes and a
// per-class train/test split. Byte-reproducible from the seed.
CorpusManifest make_corpus(const CorpusConfig& cfg);

}  // namespace saratrx::specklesim
