#include <cmath>

#include "doctest.h"
#include "saratrx/features.hpp"
#include "saratrx/rng.hpp"

using namespace saratrx;
using namespace saratrx::features;

namespace {

// Independent brute-force oracle: per-pixel double-loop window summation with
// symmetric reflection, no integral images.
double reflect_at(const Image& img, long y, long x) {
    auto fold = [](long i, long n) {
        const long p = 2 * n;
        i %= p;
        if (i < 0) i += p;
        return i < n ? i : p - 1 - i;
    };
    return img(fold(y, img.rows()), fold(x, img.cols()));
}

std::pair<double, double> naive_means(const Image& clamped, int r, long y, long x,
                                      Direction dir) {
    double s1 = 0.0, s2 = 0.0;
    if (dir == Direction::Horizontal) {
        for (long dy = -r; dy <= r; ++dy)
            for (long dx = 1; dx <= r; ++dx) {
                s1 += reflect_at(clamped, y + dy, x - dx);
                s2 += reflect_at(clamped, y + dy, x + dx);
            }
    } else {
        for (long dx = -r; dx <= r; ++dx)
            for (long dy = 1; dy <= r; ++dy) {
                s1 += reflect_at(clamped, y - dy, x + dx);
                s2 += reflect_at(clamped, y + dy, x + dx);
            }
    }
    const double count = double(r) * double(2 * r + 1);
    return {s1 / count, s2 / count};
}

Image random_image(Rng& rng, int h, int w, double lo = 0.1, double hi = 10.0) {
    Image img(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) img(y, x) = rng.uniform(lo, hi);
    return img;
}

// 10-column vertical-edge image: left half 4, right half 1.
SarImage step_image() {
    Image img = Image::Constant(10, 10, 1.0);
    img.leftCols(5) = 4.0;
    return {img, std::nullopt};
}

}  // namespace

TEST_CASE("area_means: constant image gives equal means") {
    SarImage img{Image::Constant(12, 12, 3.7), std::nullopt};
    for (auto dir : {Direction::Horizontal, Direction::Vertical}) {
        auto [m1, m2] = area_means(img, 3, dir);
        CHECK(((m1 - 3.7).abs() < 1e-12).all());
        CHECK(((m2 - 3.7).abs() < 1e-12).all());
    }
}

TEST_CASE("area_means: step image, windows wholly inside each region") {
    auto [m1, m2] = area_means(step_image(), 2, Direction::Horizontal);
    CHECK(m1(5, 4) == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(m2(5, 4) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("area_means matches brute-force summation on random images") {
    Rng rng(7);
    for (int trial = 0; trial < 5; ++trial) {
        const int h = 9, w = 9, r = 1 + trial % 3;
        SarImage img{random_image(rng, h, w), std::nullopt};
        const Image clamped = clamp_positive(img.pixels);
        for (auto dir : {Direction::Horizontal, Direction::Vertical}) {
            auto [m1, m2] = area_means(img, r, dir);
            for (long y = 0; y < h; ++y)
                for (long x = 0; x < w; ++x) {
                    auto [o1, o2] = naive_means(clamped, r, y, x, dir);
                    CHECK(std::abs(m1(y, x) - o1) < 1e-12);
                    CHECK(std::abs(m2(y, x) - o2) < 1e-12);
                }
        }
    }
}

TEST_CASE("area_means input validation") {
    SarImage img{Image::Constant(8, 8, 1.0), std::nullopt};
    CHECK_THROWS_AS(area_means(img, 0, Direction::Horizontal), ValidationError);
    img.pixels(3, 3) = std::nan("");
    CHECK_THROWS_AS(area_means(img, 1, Direction::Horizontal), ValidationError);
}

TEST_CASE("ratio_gradient: constant image is zero everywhere") {
    SarImage img{Image::Constant(20, 20, 5.0), std::nullopt};
    auto g = ratio_gradient(img, 3);
    CHECK((g.g_h.abs() < 1e-15).all());
    CHECK((g.g_v.abs() < 1e-15).all());
}

TEST_CASE("ratio_gradient: multiplicative scale invariance") {
    Rng rng(11);
    SarImage img{random_image(rng, 16, 16), std::nullopt};
    SarImage doubled{2.0 * img.pixels, std::nullopt};
    auto a = ratio_gradient(img, 2);
    auto b = ratio_gradient(doubled, 2);
    CHECK(((a.g_h - b.g_h).abs() < 1e-9).all());
    CHECK(((a.g_v - b.g_v).abs() < 1e-9).all());
}

TEST_CASE("ratio_gradient: step image gives log(4) horizontally, 0 vertically") {
    auto g = ratio_gradient(step_image(), 2);
    CHECK(g.g_h(5, 4) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
    CHECK(std::abs(g.g_v(5, 4)) < 1e-12);
}

TEST_CASE("gradient_magnitude: 3-4-5 and step pixel") {
    GradientPair pair;
    pair.g_h = Image::Constant(1, 1, 3.0);
    pair.g_v = Image::Constant(1, 1, 4.0);
    CHECK(gradient_magnitude(pair)(0, 0) == doctest::Approx(5.0));

    auto g = ratio_gradient(step_image(), 2);
    CHECK(gradient_magnitude(g)(5, 4) == doctest::Approx(std::log(4.0)).epsilon(1e-9));
}

TEST_CASE("mgf: shapes, channel names, zero on constant") {
    SarImage img{Image::Constant(64, 64, 2.0), std::nullopt};
    auto stack = mgf(img);
    REQUIRE(stack.num_channels() == 3);
    CHECK(stack.rows() == 64);
    CHECK(stack.cols() == 64);
    CHECK(stack.channel_names == std::vector<std::string>{"gm_r9", "gm_r13", "gm_r17"});
    for (const auto& ch : stack.channels) CHECK((ch.abs() < 1e-15).all());
    CHECK_THROWS_AS(mgf(img, {}), ValidationError);
}

TEST_CASE("mgf: flip antisymmetry of gradients, flip commutation of magnitude") {
    Rng rng(23);
    SarImage img{random_image(rng, 24, 24), std::nullopt};
    SarImage flipped{img.pixels.rowwise().reverse(), std::nullopt};

    auto g = ratio_gradient(img, 3);
    auto gf = ratio_gradient(flipped, 3);
    Image expect_h = -g.g_h.rowwise().reverse();
    CHECK(((gf.g_h - expect_h).abs() < 1e-9).all());

    SarImage vflipped{img.pixels.colwise().reverse(), std::nullopt};
    auto gv = ratio_gradient(vflipped, 3);
    Image expect_v = -g.g_v.colwise().reverse();
    CHECK(((gv.g_v - expect_v).abs() < 1e-9).all());

    auto m = mgf(img, {3});
    auto mf = mgf(flipped, {3});
    CHECK(((mf.channels[0] - m.channels[0].rowwise().reverse()).abs() < 1e-9).all());
}

TEST_CASE("mgf: determinism") {
    Rng rng(5);
    SarImage img{random_image(rng, 32, 32), std::nullopt};
    auto a = mgf(img);
    auto b = mgf(img);
    for (int c = 0; c < 3; ++c) CHECK((a.channels[c] == b.channels[c]).all());
}

TEST_CASE("baseline pixel target is the identity") {
    Rng rng(3);
    SarImage img{random_image(rng, 16, 16), std::nullopt};
    auto stack = baseline_target(img, TargetKind::Pixel);
    REQUIRE(stack.num_channels() == 1);
    CHECK((stack.channels[0] == img.pixels).all());
}

TEST_CASE("baseline lowpass approaches identity as sigma -> 0") {
    Rng rng(9);
    SarImage img{random_image(rng, 16, 16), std::nullopt};
    BaselineParams p;
    p.lowpass_sigma = 1e-3;
    auto stack = baseline_target(img, TargetKind::Lowpass, p);
    CHECK(((stack.channels[0] - img.pixels).abs() < 1e-6).all());
}

TEST_CASE("baseline hog: vertical step dominates the horizontal-orientation bin") {
    // Gradient of a vertical edge points horizontally: theta = 0 -> bin 0.
    Image img = Image::Constant(8, 8, 1.0);
    img.leftCols(4) = 4.0;
    BaselineParams p;
    p.hog.cell = 8;
    auto stack = baseline_target(SarImage{img, std::nullopt}, TargetKind::Hog, p);
    REQUIRE(stack.num_channels() == p.hog.bins);
    int best = 0;
    for (int b = 1; b < p.hog.bins; ++b)
        if (stack.channels[std::size_t(b)](0, 0) > stack.channels[std::size_t(best)](0, 0))
            best = b;
    CHECK(best == 0);
}

TEST_CASE("baseline sarhog uses the multi-scale ratio-gradient settings") {
    Rng rng(17);
    SarImage img{random_image(rng, 40, 40), std::nullopt};
    auto stack = baseline_target(img, TargetKind::SarHog);
    CHECK(stack.num_channels() == 3 * 9);
    CHECK(stack.channel_names.front() == "sarhog_r9_b0");
    CHECK(stack.channel_names.back() == "sarhog_r17_b8");
}

TEST_CASE("diff_gradient: constant is zero, raw ramp slope is constant") {
    SarImage flat{Image::Constant(10, 10, 2.0), std::nullopt};
    auto g = diff_gradient(flat);
    CHECK((g.g_h.abs() < 1e-15).all());
    CHECK((g.g_v.abs() < 1e-15).all());

    Image ramp(10, 10);
    for (int y = 0; y < 10; ++y)
        for (int x = 0; x < 10; ++x) ramp(y, x) = double(x);
    auto gr = diff_gradient(SarImage{ramp, std::nullopt}, /*normalize=*/false);
    // Interior columns see the full central-difference slope.
    for (int y = 0; y < 10; ++y)
        for (int x = 1; x < 9; ++x) CHECK(gr.g_h(y, x) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("unknown target kind string is rejected") {
    CHECK_THROWS_AS(target_kind_from_string("canny"), ValidationError);
}
