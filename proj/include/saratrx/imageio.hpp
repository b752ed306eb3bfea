#pragma once

#include <filesystem>

#include "saratrx/common.hpp"

namespace saratrx::imageio {

// Fixed amplitude-to-integer scale for 16-bit storage of synthetic imagery.
inline constexpr double kAmplitudeScale = 1000.0;

// Reads 8-bit or 16-bit single-channel PNG/TIFF. Values are returned as
// stored (no rescaling), so integer round trips are exact.
SarImage load_gray(const std::filesystem::path& path);

// Writes a 16-bit grayscale PNG; values rounded and clamped to [0, 65535].
void save_png16(const Image& values, const std::filesystem::path& path);

// Writes an 8-bit RGB PNG from per-channel [0,255] planes.
void save_png_rgb(const Image& r, const Image& g, const Image& b,
                  const std::filesystem::path& path);

}  // namespace saratrx::imageio
