#include "kforge/toy_video.hpp"

#include "kforge/error.hpp"
#include "kforge/image_io.hpp"
#include "kforge/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

namespace kforge {

using std::numbers::pi;

namespace {

struct Blob {
  double cy, cx, ry, rx, ay, ax, fy, fx, phase, rot_speed;
  double colour[3];
};

double smoothstep(double e0, double e1, double v) {
  const double t = std::clamp((v - e0) / (e1 - e0), 0.0, 1.0);
  return t * t * (3 - 2 * t);
}

} // namespace

RGBVideo toy_video(std::size_t frames, std::size_t height, std::size_t width, std::uint64_t seed) {
  require(frames >= 1 && height >= 2 && width >= 2, "toy_video: empty size");
  Rng rng(seed);
  auto U = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };

  // background: low-order cosine field per channel, drifting slowly
  double bg[3][4];
  for (auto &c : bg)
    for (auto &v : c) v = U(-1, 1);
  const double drift_y = U(-0.01, 0.01), drift_x = U(-0.01, 0.01);

  const std::size_t n_blobs = 3 + std::size_t(U(0, 3));
  std::vector<Blob> blobs(n_blobs);
  for (auto &b : blobs) {
    b = {U(0.3, 0.7), U(0.3, 0.7), U(0.08, 0.2), U(0.08, 0.2), U(0.03, 0.12), U(0.03, 0.12), U(0.05, 0.2),
         U(0.05, 0.2), U(0, 2 * pi), U(-0.05, 0.05), {U(0, 1), U(0, 1), U(0, 1)}};
  }
  const double stripe_f = U(4, 9), stripe_angle = U(0, pi), stripe_amp = U(0.03, 0.08), stripe_speed = U(0.05, 0.2);

  RGBVideo v;
  v.frames = Tensor<double, 4>(frames, height, width, std::size_t{3});
  v.frame_rate_hint = 30.0;
  v.source_id = "toy-" + std::to_string(seed);
  for (std::size_t t = 0; t < frames; ++t) {
    const double tt = double(t);
    for (std::size_t y = 0; y < height; ++y)
      for (std::size_t x = 0; x < width; ++x) {
        const double py = (double(y) + 0.5) / double(height), px = (double(x) + 0.5) / double(width);
        double rgb[3];
        for (int c = 0; c < 3; ++c) {
          const double qy = py + drift_y * tt, qx = px + drift_x * tt;
          rgb[c] = 0.45 + 0.12 * (bg[c][0] * std::cos(pi * qy) + bg[c][1] * std::cos(pi * qx) +
                                  bg[c][2] * std::cos(2 * pi * qy) * std::cos(pi * qx) + bg[c][3] * std::cos(2 * pi * qx));
        }
        const double sa = std::cos(stripe_angle) * px + std::sin(stripe_angle) * py;
        const double stripe = stripe_amp * std::sin(2 * pi * stripe_f * sa + stripe_speed * tt);
        for (const auto &b : blobs) {
          const double cy = b.cy + b.ay * std::sin(2 * pi * b.fy * tt / 10 + b.phase);
          const double cx = b.cx + b.ax * std::cos(2 * pi * b.fx * tt / 10 + b.phase);
          const double th = b.rot_speed * tt, ct = std::cos(th), st = std::sin(th);
          const double dy = py - cy, dx = px - cx;
          const double u = (ct * dy + st * dx) / b.ry, w = (-st * dy + ct * dx) / b.rx;
          const double inside = 1.0 - smoothstep(0.8, 1.0, std::sqrt(u * u + w * w));
          for (int c = 0; c < 3; ++c) rgb[c] = rgb[c] * (1 - inside) + b.colour[c] * inside;
        }
        for (int c = 0; c < 3; ++c) v.frames(t, y, x, c) = std::clamp(rgb[c] + stripe, 0.0, 1.0);
      }
  }
  return v;
}

void write_frame_directory(const RGBVideo &video, const std::filesystem::path &dir) {
  std::filesystem::create_directories(dir);
  const std::size_t H = video.height(), W = video.width();
  RgbImage img(H, W, std::size_t{3});
  for (std::size_t t = 0; t < video.n_frames(); ++t) {
    std::copy_n(video.frames.data() + t * H * W * 3, H * W * 3, img.data());
    char name[32];
    std::snprintf(name, sizeof name, "frame_%05zu.png", t);
    write_png_rgb(dir / name, img);
  }
}

} // namespace kforge
