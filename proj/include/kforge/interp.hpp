#pragma once

#include "kforge/array.hpp"

namespace kforge {

/// Bilinear resampling with pixel-centre alignment and edge clamping.
RealImage resize_bilinear(const RealImage &src, std::size_t out_h, std::size_t out_w);

/// Bicubic (Keys, a = -0.5) resampling with pixel-centre alignment and edge clamping.
RealImage resize_bicubic(const RealImage &src, std::size_t out_h, std::size_t out_w);

/// Bilinear sample at fractional pixel coordinates (y, x), clamped at the borders.
double sample_bilinear(std::span<const double> img, std::size_t h, std::size_t w, double y, double x);

} // namespace kforge
