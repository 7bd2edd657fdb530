#include "kforge/video.hpp"

#include "kforge/error.hpp"
#include "kforge/image_io.hpp"
#include "kforge/interp.hpp"

#include <algorithm>
#include <cmath>

namespace kforge {

namespace fs = std::filesystem;

namespace {

bool is_frame_file(const fs::path &p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return char(std::tolower(c)); });
  return ext == ".png" || ext == ".ppm" || ext == ".pnm" || ext == ".pgm";
}

} // namespace

RGBVideo load_frame_sequence(const fs::path &dir, std::size_t limit) {
  if (!fs::is_directory(dir)) throw MissingInputError("frame directory not found: " + dir.string());
  require(limit >= 1, "load_frame_sequence: limit must be >= 1");

  std::vector<fs::path> files;
  for (const auto &entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && is_frame_file(entry.path())) files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw MissingInputError("no PNG/PPM frames in " + dir.string());
  if (files.size() > limit) files.resize(limit);

  RGBVideo video;
  video.source_id = dir.filename().string();
  for (std::size_t t = 0; t < files.size(); ++t) {
    RgbImage img;
    try {
      img = read_rgb_image(files[t]);
    } catch (const Error &e) {
      throw ValidationError("unreadable frame " + files[t].filename().string() + ": " + e.what());
    }
    if (t == 0) {
      video.frames = Tensor<double, 4>(files.size(), img.dim(0), img.dim(1), 3);
    } else if (img.dim(0) != video.height() || img.dim(1) != video.width()) {
      throw ValidationError("frame " + files[t].filename().string() + " has size " + shape_string(img) +
                            ", expected " + std::to_string(video.height()) + "x" + std::to_string(video.width()));
    }
    std::copy(img.begin(), img.end(), video.frames.slab(t).begin());
  }
  return video;
}

RGBVideo downsample_bilinear(const RGBVideo &video, std::size_t out_h, std::size_t out_w) {
  require(out_h >= 1 && out_w >= 1, "downsample_bilinear: target size must be positive");
  const std::size_t T = video.n_frames(), H = video.height(), W = video.width();
  RGBVideo out{Tensor<double, 4>(T, out_h, out_w, 3), video.frame_rate_hint, video.source_id};
  RealImage plane(H, W);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t c = 0; c < 3; ++c) {
      for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x) plane(y, x) = video.frames(t, y, x, c);
      const RealImage r = resize_bilinear(plane, out_h, out_w);
      for (std::size_t y = 0; y < out_h; ++y)
        for (std::size_t x = 0; x < out_w; ++x) out.frames(t, y, x, c) = r(y, x);
    }
  }
  return out;
}

void validate(const RGBVideo &video) {
  require(video.frames.dim(0) >= 1 && video.frames.dim(3) == 3, "RGBVideo: needs T >= 1 and 3 channels");
  for (double v : video.frames)
    require(std::isfinite(v) && v >= 0.0 && v <= 1.0, "RGBVideo: intensities must lie in [0, 1]");
}

} // namespace kforge
