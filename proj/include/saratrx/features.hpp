#pragma once

#include <string>
#include <vector>

#include "saratrx/common.hpp"

namespace saratrx::features {

enum class Direction { Horizontal, Vertical };

enum class TargetKind { Mgf, Pixel, Lowpass, Hog, SarHog };

// Horizontal/vertical log-ratio gradients at one window scale.
struct GradientPair {
    Image g_h;
    Image g_v;
    int scale_r = 0;
};

// H x W x C feature tensor used as a masked-image-modeling regression target.
struct FeatureStack {
    std::vector<Image> channels;
    std::vector<std::string> channel_names;
    TargetKind kind = TargetKind::Mgf;

    Eigen::Index rows() const { return channels.empty() ? 0 : channels[0].rows(); }
    Eigen::Index cols() const { return channels.empty() ? 0 : channels[0].cols(); }
    int num_channels() const { return int(channels.size()); }
};

struct HogParams {
    int cell = 8;
    int bins = 9;
};

struct BaselineParams {
    double lowpass_sigma = 2.0;
    HogParams hog;
    std::vector<int> sarhog_scales = {9, 13, 17};
};

TargetKind target_kind_from_string(const std::string& s);
std::string to_string(TargetKind kind);

// Positivity clamp applied before any ratio/log: max(pixel, eps) with
// eps = 1e-6 * mean(amplitude), or 1e-6 when the mean is zero.
Image clamp_positive(const Image& img);

// Mirror (symmetric) padding by `pad` on all sides; folds as often as needed
// so pad may exceed the image extent.
Image reflect_pad(const Image& img, int pad);

// Separable Gaussian with kernel radius ceil(3*sigma), reflect padding.
Image gaussian_blur(const Image& img, double sigma);

// Box means of the two opposite half-windows around each pixel. Each half is
// r columns (or rows) x (2r+1), the center line excluded; m1 is the left/up
// half. Reflect padding, means strictly positive.
std::pair<Image, Image> area_means(const SarImage& image, int r, Direction direction);

// g = log(m1/m2) in both directions; zero on constant images and invariant
// to multiplicative scaling of the input.
GradientPair ratio_gradient(const SarImage& image, int r);

// sqrt(g_h^2 + g_v^2), elementwise.
Image gradient_magnitude(const GradientPair& pair);

// Multi-scale gradient feature: one gradient-magnitude channel per scale,
// named gm_r<r>. Default scales {9, 13, 17}.
FeatureStack mgf(const SarImage& image, const std::vector<int>& scales = {9, 13, 17});

FeatureStack baseline_target(const SarImage& image, TargetKind kind,
                             const BaselineParams& params = {});

// Central-difference gradients. With normalize=true (the default used for the
// speckle comparison) each component is divided by the local 3x3 mean + eps
// so thresholds are comparable to log-ratio gradients; normalize=false gives
// the raw differential gradient.
GradientPair diff_gradient(const SarImage& image, bool normalize = true);

}  // namespace saratrx::features
