#pragma once

#include "kforge/array.hpp"

#include <cstdint>
#include <filesystem>

namespace kforge {

/// H x W x 3 intensities normalized by the file's maximum code value.
using RgbImage = Tensor<double, 3>;

/// Reads 8/16-bit PNG (gray, gray+alpha, RGB, RGBA, palette) or binary/ASCII PPM/PGM.
/// Gray images are replicated across the three channels; alpha is dropped.
RgbImage read_rgb_image(const std::filesystem::path &path);

/// Quantizes [0,1] values to 8 bits. `img` is H x W x 3.
void write_png_rgb(const std::filesystem::path &path, const RgbImage &img);
/// Quantizes [0,1] values to 8 bits.
void write_png_gray(const std::filesystem::path &path, const RealImage &img);
/// 16-bit binary PPM (P6, maxval 65535) unless `eight_bit`.
void write_ppm(const std::filesystem::path &path, const RgbImage &img, bool eight_bit = true);

} // namespace kforge
