#include "saratrx/imageio.hpp"

#include <opencv2/imgcodecs.hpp>

namespace saratrx::imageio {

SarImage load_gray(const std::filesystem::path& path) {
    cv::Mat m = cv::imread(path.string(), cv::IMREAD_UNCHANGED | cv::IMREAD_ANYDEPTH);
    if (m.empty()) throw RuntimeError("cannot read image: " + path.string());
    if (m.channels() != 1)
        throw ValidationError("expected single-channel grayscale image: " + path.string());

    SarImage img;
    img.pixels = Image(m.rows, m.cols);
    switch (m.depth()) {
        case CV_8U:
            for (int y = 0; y < m.rows; ++y)
                for (int x = 0; x < m.cols; ++x) img.pixels(y, x) = m.at<std::uint8_t>(y, x);
            break;
        case CV_16U:
            for (int y = 0; y < m.rows; ++y)
                for (int x = 0; x < m.cols; ++x) img.pixels(y, x) = m.at<std::uint16_t>(y, x);
            break;
        default:
            throw ValidationError("unsupported bit depth (need 8/16-bit): " + path.string());
    }
    SarMeta meta;
    meta.source_path = path.string();
    img.meta = meta;
    return img;
}

void save_png16(const Image& values, const std::filesystem::path& path) {
    cv::Mat m(int(values.rows()), int(values.cols()), CV_16U);
    for (int y = 0; y < m.rows; ++y)
        for (int x = 0; x < m.cols; ++x) {
            double v = std::round(values(y, x));
            m.at<std::uint16_t>(y, x) = std::uint16_t(std::clamp(v, 0.0, 65535.0));
        }
    if (!cv::imwrite(path.string(), m))
        throw RuntimeError("cannot write image: " + path.string());
}

void save_png_rgb(const Image& r, const Image& g, const Image& b,
                  const std::filesystem::path& path) {
    cv::Mat m(int(r.rows()), int(r.cols()), CV_8UC3);
    for (int y = 0; y < m.rows; ++y)
        for (int x = 0; x < m.cols; ++x) {
            auto clamp8 = [](double v) { return std::uint8_t(std::clamp(v, 0.0, 255.0)); };
            // OpenCV stores BGR.
            m.at<cv::Vec3b>(y, x) = {clamp8(b(y, x)), clamp8(g(y, x)), clamp8(r(y, x))};
        }
    if (!cv::imwrite(path.string(), m))
        throw RuntimeError("cannot write image: " + path.string());
}

}  // namespace saratrx::imageio
