#include "kforge/interp.hpp"

#include "kforge/error.hpp"

#include <algorithm>
#include <cmath>

namespace kforge {

namespace {

// Source coordinate of destination pixel centre i when n_in pixels map onto n_out.
double source_coord(std::size_t i, std::size_t n_in, std::size_t n_out) {
  return (double(i) + 0.5) * double(n_in) / double(n_out) - 0.5;
}

double keys_cubic(double t) {
  constexpr double a = -0.5;
  t = std::abs(t);
  if (t <= 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
  if (t < 2.0) return ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a;
  return 0.0;
}

std::size_t clamp_index(long i, std::size_t n) {
  return static_cast<std::size_t>(std::clamp<long>(i, 0, long(n) - 1));
}

} // namespace

double sample_bilinear(std::span<const double> img, std::size_t h, std::size_t w, double y, double x) {
  y = std::clamp(y, 0.0, double(h - 1));
  x = std::clamp(x, 0.0, double(w - 1));
  const auto y0 = static_cast<std::size_t>(std::floor(y));
  const auto x0 = static_cast<std::size_t>(std::floor(x));
  const std::size_t y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
  const double fy = y - double(y0), fx = x - double(x0);
  const double top = img[y0 * w + x0] * (1 - fx) + img[y0 * w + x1] * fx;
  const double bot = img[y1 * w + x0] * (1 - fx) + img[y1 * w + x1] * fx;
  return top * (1 - fy) + bot * fy;
}

RealImage resize_bilinear(const RealImage &src, std::size_t out_h, std::size_t out_w) {
  require(out_h >= 1 && out_w >= 1, "resize: target size must be positive");
  require(!src.empty(), "resize: empty source image");
  const std::size_t h = src.dim(0), w = src.dim(1);
  RealImage out(out_h, out_w);
  for (std::size_t y = 0; y < out_h; ++y) {
    const double sy = source_coord(y, h, out_h);
    for (std::size_t x = 0; x < out_w; ++x)
      out(y, x) = sample_bilinear(src.flat(), h, w, sy, source_coord(x, w, out_w));
  }
  return out;
}

RealImage resize_bicubic(const RealImage &src, std::size_t out_h, std::size_t out_w) {
  require(out_h >= 1 && out_w >= 1, "resize: target size must be positive");
  require(!src.empty(), "resize: empty source image");
  const std::size_t h = src.dim(0), w = src.dim(1);

  // Separable: rows first, then columns.
  RealImage tmp(h, out_w);
  for (std::size_t x = 0; x < out_w; ++x) {
    const double sx = source_coord(x, w, out_w);
    const long x0 = long(std::floor(sx));
    double wts[4];
    for (int k = 0; k < 4; ++k) wts[k] = keys_cubic(sx - double(x0 - 1 + k));
    for (std::size_t y = 0; y < h; ++y) {
      double acc = 0;
      for (int k = 0; k < 4; ++k) acc += wts[k] * src(y, clamp_index(x0 - 1 + k, w));
      tmp(y, x) = acc;
    }
  }
  RealImage out(out_h, out_w);
  for (std::size_t y = 0; y < out_h; ++y) {
    const double sy = source_coord(y, h, out_h);
    const long y0 = long(std::floor(sy));
    double wts[4];
    for (int k = 0; k < 4; ++k) wts[k] = keys_cubic(sy - double(y0 - 1 + k));
    for (std::size_t x = 0; x < out_w; ++x) {
      double acc = 0;
      for (int k = 0; k < 4; ++k) acc += wts[k] * tmp(clamp_index(y0 - 1 + k, h), x);
      out(y, x) = acc;
    }
  }
  return out;
}

} // namespace kforge
