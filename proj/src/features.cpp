#include "saratrx/features.hpp"

#include <cmath>

namespace saratrx::features {

TargetKind target_kind_from_string(const std::string& s) {
    if (s == "mgf") return TargetKind::Mgf;
    if (s == "pixel") return TargetKind::Pixel;
    if (s == "lowpass") return TargetKind::Lowpass;
    if (s == "hog") return TargetKind::Hog;
    if (s == "sarhog") return TargetKind::SarHog;
    throw ValidationError("unknown target kind: " + s);
}

std::string to_string(TargetKind kind) {
    switch (kind) {
        case TargetKind::Mgf: return "mgf";
        case TargetKind::Pixel: return "pixel";
        case TargetKind::Lowpass: return "lowpass";
        case TargetKind::Hog: return "hog";
        case TargetKind::SarHog: return "sarhog";
    }
    throw ValidationError("bad target kind");
}

Image clamp_positive(const Image& img) {
    double mean = img.mean();
    double eps = mean > 0.0 ? 1e-6 * mean : 1e-6;
    return img.max(eps);
}

namespace {

// Fold an out-of-range index back into [0, n) by symmetric reflection
// (edge pixel repeated: -1 -> 0, n -> n-1).
Eigen::Index reflect_index(Eigen::Index i, Eigen::Index n) {
    if (n == 1) return 0;
    const Eigen::Index period = 2 * n;
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - 1 - i;
}

// Summed-area table: S(i, j) = sum of img over rows < i, cols < j. Used for
// the 3x3 local-mean normalization of diff_gradient; area_means avoids it so
// that opposite half-windows stay bitwise equal on constant input.
Image integral_image(const Image& img) {
    const Eigen::Index h = img.rows(), w = img.cols();
    Image s = Image::Zero(h + 1, w + 1);
    for (Eigen::Index y = 0; y < h; ++y) {
        double row_acc = 0.0;
        for (Eigen::Index x = 0; x < w; ++x) {
            row_acc += img(y, x);
            s(y + 1, x + 1) = s(y, x + 1) + row_acc;
        }
    }
    return s;
}

}  // namespace

Image reflect_pad(const Image& img, int pad) {
    const Eigen::Index h = img.rows(), w = img.cols();
    Image out(h + 2 * pad, w + 2 * pad);
    for (Eigen::Index y = 0; y < out.rows(); ++y) {
        const Eigen::Index sy = reflect_index(y - pad, h);
        for (Eigen::Index x = 0; x < out.cols(); ++x)
            out(y, x) = img(sy, reflect_index(x - pad, w));
    }
    return out;
}

std::pair<Image, Image> area_means(const SarImage& image, int r, Direction direction) {
    if (r < 1) throw ValidationError("area_means: r must be >= 1");
    validate_amplitude(image.pixels, "area_means");

    const Image clamped = clamp_positive(image.pixels);
    const Image padded = reflect_pad(clamped, r);

    // Two-pass direct summation (no prefix-sum differencing): both halves
    // accumulate the same number of terms with the same loop, so on a
    // constant image s1 == s2 bitwise and the log-ratio is exactly zero.
    const Eigen::Index h = image.rows(), w = image.cols();
    const double count = double(r) * double(2 * r + 1);
    Image m1(h, w), m2(h, w);

    if (direction == Direction::Horizontal) {
        // Column sums over the full (2r+1)-tall band, for every padded column.
        Image colsum(h, padded.cols());
        for (Eigen::Index y = 0; y < h; ++y)
            for (Eigen::Index x = 0; x < padded.cols(); ++x) {
                double acc = 0.0;
                for (int b = 0; b <= 2 * r; ++b) acc += padded(y + b, x);
                colsum(y, x) = acc;
            }
        for (Eigen::Index y = 0; y < h; ++y)
            for (Eigen::Index x = 0; x < w; ++x) {
                const Eigen::Index px = x + r;
                double s1 = 0.0, s2 = 0.0;
                for (int a = 1; a <= r; ++a) {
                    s1 += colsum(y, px - a);
                    s2 += colsum(y, px + a);
                }
                m1(y, x) = s1 / count;
                m2(y, x) = s2 / count;
            }
    } else {
        // Row sums over the full (2r+1)-wide band, for every padded row.
        Image rowsum(padded.rows(), w);
        for (Eigen::Index y = 0; y < padded.rows(); ++y)
            for (Eigen::Index x = 0; x < w; ++x) {
                double acc = 0.0;
                for (int b = 0; b <= 2 * r; ++b) acc += padded(y, x + b);
                rowsum(y, x) = acc;
            }
        for (Eigen::Index y = 0; y < h; ++y)
            for (Eigen::Index x = 0; x < w; ++x) {
                const Eigen::Index py = y + r;
                double s1 = 0.0, s2 = 0.0;
                for (int a = 1; a <= r; ++a) {
                    s1 += rowsum(py - a, x);
                    s2 += rowsum(py + a, x);
                }
                m1(y, x) = s1 / count;
                m2(y, x) = s2 / count;
            }
    }
    return {std::move(m1), std::move(m2)};
}

GradientPair ratio_gradient(const SarImage& image, int r) {
    auto [h1, h2] = area_means(image, r, Direction::Horizontal);
    auto [v1, v2] = area_means(image, r, Direction::Vertical);
    GradientPair out;
    out.g_h = (h1 / h2).log();
    out.g_v = (v1 / v2).log();
    out.scale_r = r;
    return out;
}

Image gradient_magnitude(const GradientPair& pair) {
    if (!pair.g_h.allFinite() || !pair.g_v.allFinite())
        throw ValidationError("gradient_magnitude: non-finite gradients");
    return (pair.g_h.square() + pair.g_v.square()).sqrt();
}

FeatureStack mgf(const SarImage& image, const std::vector<int>& scales) {
    if (scales.empty()) throw ValidationError("mgf: empty scale list");
    if (std::min(image.rows(), image.cols()) < 2)
        throw ValidationError("mgf: image smaller than 2x2");
    FeatureStack stack;
    stack.kind = TargetKind::Mgf;
    for (int r : scales) {
        stack.channels.push_back(gradient_magnitude(ratio_gradient(image, r)));
        stack.channel_names.push_back("gm_r" + std::to_string(r));
    }
    return stack;
}

Image gaussian_blur(const Image& img, double sigma) {
    if (sigma <= 0.0) throw ValidationError("lowpass: sigma must be > 0");
    const int radius = std::max(1, int(std::ceil(3.0 * sigma)));
    Eigen::ArrayXd kernel(2 * radius + 1);
    for (int i = -radius; i <= radius; ++i)
        kernel(i + radius) = std::exp(-0.5 * double(i) * double(i) / (sigma * sigma));
    kernel /= kernel.sum();

    const Image padded = reflect_pad(img, radius);
    const Eigen::Index h = img.rows(), w = img.cols();
    // Horizontal pass over padded rows, then vertical pass.
    Image tmp(padded.rows(), w);
    for (Eigen::Index y = 0; y < padded.rows(); ++y)
        for (Eigen::Index x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int k = 0; k < kernel.size(); ++k) acc += kernel(k) * padded(y, x + k);
            tmp(y, x) = acc;
        }
    Image out(h, w);
    for (Eigen::Index y = 0; y < h; ++y)
        for (Eigen::Index x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int k = 0; k < kernel.size(); ++k) acc += kernel(k) * tmp(y + k, x);
            out(y, x) = acc;
        }
    return out;
}

namespace {

// Per-cell orientation histograms, hard-binned over [0, pi), magnitude
// weighted, L2-normalized per cell, replicated back to pixel resolution.
void hog_channels(const GradientPair& grad, const HogParams& p, const std::string& prefix,
                  FeatureStack& stack) {
    const Eigen::Index h = grad.g_h.rows(), w = grad.g_h.cols();
    const Eigen::Index cy = (h + p.cell - 1) / p.cell;
    const Eigen::Index cx = (w + p.cell - 1) / p.cell;

    std::vector<Image> hist(p.bins, Image::Zero(cy, cx));
    for (Eigen::Index y = 0; y < h; ++y)
        for (Eigen::Index x = 0; x < w; ++x) {
            const double gh = grad.g_h(y, x), gv = grad.g_v(y, x);
            const double mag = std::sqrt(gh * gh + gv * gv);
            double theta = std::atan2(gv, gh);
            if (theta < 0.0) theta += M_PI;
            if (theta >= M_PI) theta -= M_PI;
            int bin = std::min(p.bins - 1, int(theta / M_PI * p.bins));
            hist[bin](y / p.cell, x / p.cell) += mag;
        }
    // L2 normalization per cell.
    Image norm = Image::Zero(cy, cx);
    for (const auto& hch : hist) norm += hch.square();
    norm = (norm + 1e-12).sqrt();
    for (auto& hch : hist) hch /= norm;

    for (int b = 0; b < p.bins; ++b) {
        Image full(h, w);
        for (Eigen::Index y = 0; y < h; ++y)
            for (Eigen::Index x = 0; x < w; ++x) full(y, x) = hist[b](y / p.cell, x / p.cell);
        stack.channels.push_back(std::move(full));
        stack.channel_names.push_back(prefix + "_b" + std::to_string(b));
    }
}

}  // namespace

GradientPair diff_gradient(const SarImage& image, bool normalize) {
    validate_amplitude(image.pixels, "diff_gradient");
    const Image padded = reflect_pad(image.pixels, 1);
    const Eigen::Index h = image.rows(), w = image.cols();
    GradientPair out;
    out.g_h = Image(h, w);
    out.g_v = Image(h, w);
    out.scale_r = 1;
    for (Eigen::Index y = 0; y < h; ++y)
        for (Eigen::Index x = 0; x < w; ++x) {
            out.g_h(y, x) = 0.5 * (padded(y + 1, x + 2) - padded(y + 1, x));
            out.g_v(y, x) = 0.5 * (padded(y + 2, x + 1) - padded(y, x + 1));
        }
    if (normalize) {
        double mean = image.pixels.mean();
        double eps = mean > 0.0 ? 1e-6 * mean : 1e-6;
        const Image sat = integral_image(padded);
        for (Eigen::Index y = 0; y < h; ++y)
            for (Eigen::Index x = 0; x < w; ++x) {
                double local = (sat(y + 3, x + 3) - sat(y, x + 3) - sat(y + 3, x) + sat(y, x)) / 9.0;
                out.g_h(y, x) /= local + eps;
                out.g_v(y, x) /= local + eps;
            }
    }
    return out;
}

FeatureStack baseline_target(const SarImage& image, TargetKind kind, const BaselineParams& params) {
    validate_amplitude(image.pixels, "baseline_target");
    FeatureStack stack;
    stack.kind = kind;
    switch (kind) {
        case TargetKind::Pixel:
            stack.channels.push_back(image.pixels);
            stack.channel_names.push_back("pixel");
            break;
        case TargetKind::Lowpass:
            stack.channels.push_back(gaussian_blur(image.pixels, params.lowpass_sigma));
            stack.channel_names.push_back("lowpass");
            break;
        case TargetKind::Hog:
            hog_channels(diff_gradient(image, /*normalize=*/false), params.hog, "hog", stack);
            break;
        case TargetKind::SarHog:
            // SAR-HOG swaps the differential gradient for the log-ratio
            // gradient, one histogram set per MGF scale.
            for (int r : params.sarhog_scales)
                hog_channels(ratio_gradient(image, r), params.hog,
                             "sarhog_r" + std::to_string(r), stack);
            break;
        case TargetKind::Mgf:
            return mgf(image);
    }
    return stack;
}

}  // namespace saratrx::features
