#pragma once

#include "kforge/array.hpp"

#include <filesystem>
#include <string>

namespace kforge {

/// T x H x W x 3 frames with intensities in [0, 1].
struct RGBVideo {
  Tensor<double, 4> frames;
  double frame_rate_hint = 0.0;
  std::string source_id;

  std::size_t n_frames() const { return frames.dim(0); }
  std::size_t height() const { return frames.dim(1); }
  std::size_t width() const { return frames.dim(2); }
};

/// Reads the first `limit` frames (PNG or PPM, sorted by file name) from `dir`.
/// Files past `limit` are never opened.
RGBVideo load_frame_sequence(const std::filesystem::path &dir, std::size_t limit);

/// Resamples every frame to out_h x out_w (bilinear, pixel-centre aligned, edge clamped).
RGBVideo downsample_bilinear(const RGBVideo &video, std::size_t out_h, std::size_t out_w);

/// Throws unless every sample is finite and within [0, 1] and T >= 1.
void validate(const RGBVideo &video);

} // namespace kforge
