#pragma once

#include <Eigen/Core>
#include <optional>
#include <stdexcept>
#include <string>

namespace saratrx {

// Validation failures (bad config, bad input data). CLI maps these to exit 2.
struct ValidationError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Runtime failures (I/O, non-finite loss, incompatible checkpoints). Exit 1.
struct RuntimeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Amplitude grids and feature planes. Row index = image row.
using Image = Eigen::ArrayXXd;

template <class Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <class Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

struct SarMeta {
    std::string dataset;
    double resolution_m = 0.0;  // 0 = unknown
    std::string band;
    std::string polarization;
    std::string source_path;
};

// Single-channel non-negative amplitude grid. Metadata never affects numerics.
struct SarImage {
    Image pixels;
    std::optional<SarMeta> meta;

    Eigen::Index rows() const { return pixels.rows(); }
    Eigen::Index cols() const { return pixels.cols(); }
};

inline void validate_amplitude(const Image& img, const char* who) {
    if (img.rows() < 1 || img.cols() < 1)
        throw ValidationError(std::string(who) + ": empty image");
    if (!img.allFinite())
        throw ValidationError(std::string(who) + ": non-finite pixel values");
    if ((img < 0.0).any())
        throw ValidationError(std::string(who) + ": negative amplitude");
}

}  // namespace saratrx
