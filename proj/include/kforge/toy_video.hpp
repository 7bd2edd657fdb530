#pragma once

#include "kforge/video.hpp"

#include <cstdint>
#include <filesystem>

namespace kforge {

/// Synthetic colour video: a slowly drifting smooth background with a few moving, deforming
/// coloured blobs and a gently oscillating stripe texture. Deterministic in `seed`.
RGBVideo toy_video(std::size_t frames, std::size_t height, std::size_t width, std::uint64_t seed);

/// Writes frame_00000.png, frame_00001.png, ... (8-bit) into `dir`, creating it.
void write_frame_directory(const RGBVideo &video, const std::filesystem::path &dir);

} // namespace kforge
