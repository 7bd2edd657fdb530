#include "kforge/nufft.hpp"

#include "kforge/error.hpp"
#include "kforge/fft.hpp"

#include <cmath>
#include <numbers>

namespace kforge {

using std::numbers::pi;

namespace {

// Continuous Fourier transform of the Kaiser-Bessel kernel at frequency xi (cycles per grid cell).
double kb_transform(double xi, double width, double beta) {
  const double a = pi * width * xi;
  const double d = beta * beta - a * a;
  if (d > 0) {
    const double r = std::sqrt(d);
    return width * std::sinh(r) / r;
  }
  if (d < 0) {
    const double r = std::sqrt(-d);
    return width * std::sin(r) / r;
  }
  return width;
}

} // namespace

NufftPlan::NufftPlan(std::size_t height, std::size_t width, NufftOptions opts)
    : h_(height), w_(width), opts_(opts) {
  require(h_ >= 1 && w_ >= 1, "nufft: image size must be positive");
  require(opts_.oversampling >= 1.25, "nufft: oversampling must be >= 1.25");
  require(opts_.kernel_width >= 2 && opts_.kernel_width <= 16, "nufft: kernel width must be in [2, 16]");
  gh_ = static_cast<std::size_t>(std::lround(opts_.oversampling * double(h_)));
  gw_ = static_cast<std::size_t>(std::lround(opts_.oversampling * double(w_)));
  require(gh_ >= opts_.kernel_width && gw_ >= opts_.kernel_width, "nufft: grid smaller than kernel");
  if (opts_.beta <= 0) {
    const double wd = double(opts_.kernel_width), s = opts_.oversampling;
    opts_.beta = pi * std::sqrt((wd / s) * (wd / s) * (s - 0.5) * (s - 0.5) - 0.8);
  }

  apod_ = RealImage(h_, w_);
  const double wd = double(opts_.kernel_width);
  std::vector<double> ay(h_), ax(w_);
  for (std::size_t y = 0; y < h_; ++y) ay[y] = kb_transform((double(y) - double(h_ / 2)) / double(gh_), wd, opts_.beta);
  for (std::size_t x = 0; x < w_; ++x) ax[x] = kb_transform((double(x) - double(w_ / 2)) / double(gw_), wd, opts_.beta);
  for (std::size_t y = 0; y < h_; ++y)
    for (std::size_t x = 0; x < w_; ++x) {
      apod_(y, x) = ay[y] * ax[x];
      if (!(apod_(y, x) > 0)) throw NumericalError("nufft: non-positive apodization; widen the oversampling");
    }
  fft_ = fft2_plan(gh_, gw_);
}

double NufftPlan::kernel(double u) const {
  const double half = double(opts_.kernel_width) / 2;
  if (std::abs(u) > half) return 0.0;
  const double r = u / half;
  return std::cyl_bessel_i(0.0, opts_.beta * std::sqrt(std::max(0.0, 1.0 - r * r)));
}

GriddingTable NufftPlan::prepare(std::span<const KPoint> coords) const {
  GriddingTable t;
  const std::size_t W = opts_.kernel_width;
  const double half = double(W) / 2;
  t.width_ = W;
  t.start_y_.resize(coords.size());
  t.start_x_.resize(coords.size());
  t.wy_.resize(coords.size() * W);
  t.wx_.resize(coords.size() * W);
  auto axis = [&](double k, std::size_t g, std::uint32_t &start, double *wts) {
    const double pos = k * double(g);
    const long first = long(std::floor(pos - half)) + 1;
    for (std::size_t a = 0; a < W; ++a) wts[a] = kernel(pos - double(first + long(a)));
    const long gl = long(g);
    start = static_cast<std::uint32_t>(((first % gl) + gl) % gl);
  };
  for (std::size_t i = 0; i < coords.size(); ++i) {
    const auto &k = coords[i];
    if (!(k.ky >= -0.5 && k.ky < 0.5 && k.kx >= -0.5 && k.kx < 0.5))
      throw ValidationError("nufft: k-space coordinate (" + std::to_string(k.ky) + ", " + std::to_string(k.kx) +
                            ") outside [-0.5, 0.5)");
    axis(k.ky, gh_, t.start_y_[i], &t.wy_[i * W]);
    axis(k.kx, gw_, t.start_x_[i], &t.wx_[i * W]);
  }
  return t;
}

void NufftPlan::interpolate(std::span<const cplx> grid, const GriddingTable &t, std::span<cplx> out) const {
  const std::size_t W = t.width_;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double *wy = &t.wy_[i * W];
    const double *wx = &t.wx_[i * W];
    std::size_t row = t.start_y_[i];
    cplx acc{};
    for (std::size_t a = 0; a < W; ++a) {
      const cplx *g = grid.data() + row * gw_;
      std::size_t col = t.start_x_[i];
      cplx racc{};
      for (std::size_t b = 0; b < W; ++b) {
        racc += wx[b] * g[col];
        if (++col == gw_) col = 0;
      }
      acc += wy[a] * racc;
      if (++row == gh_) row = 0;
    }
    out[i] = acc;
  }
}

void NufftPlan::spread(std::span<const cplx> values, const GriddingTable &t, std::span<cplx> grid) const {
  const std::size_t W = t.width_;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double *wy = &t.wy_[i * W];
    const double *wx = &t.wx_[i * W];
    std::size_t row = t.start_y_[i];
    for (std::size_t a = 0; a < W; ++a) {
      cplx *g = grid.data() + row * gw_;
      const cplx v = wy[a] * values[i];
      std::size_t col = t.start_x_[i];
      for (std::size_t b = 0; b < W; ++b) {
        g[col] += wx[b] * v;
        if (++col == gw_) col = 0;
      }
      if (++row == gh_) row = 0;
    }
  }
}

std::vector<cplx> NufftPlan::forward(const ComplexImage &img, const GriddingTable &table) const {
  require(img.dim(0) == h_ && img.dim(1) == w_,
          "nufft: image " + shape_string(img) + " does not match plan " + std::to_string(h_) + "x" + std::to_string(w_));
  std::vector<cplx> grid(gh_ * gw_);
  const long cy = long(h_ / 2), cx = long(w_ / 2);
  for (std::size_t y = 0; y < h_; ++y) {
    const std::size_t gy = std::size_t((long(y) - cy + long(gh_)) % long(gh_));
    for (std::size_t x = 0; x < w_; ++x) {
      const std::size_t gx = std::size_t((long(x) - cx + long(gw_)) % long(gw_));
      grid[gy * gw_ + gx] = img(y, x) / apod_(y, x);
    }
  }
  fft_->forward(grid);
  std::vector<cplx> out(table.size());
  interpolate(grid, table, out);
  return out;
}

std::vector<cplx> NufftPlan::forward(const ComplexImage &img, std::span<const KPoint> coords) const {
  return forward(img, prepare(coords));
}

ComplexImage NufftPlan::adjoint(std::span<const cplx> samples, const GriddingTable &table,
                                std::span<const double> dcf) const {
  require(samples.size() == table.size(), "nufft: sample count does not match trajectory");
  require(dcf.empty() || dcf.size() == samples.size(), "nufft: dcf length does not match samples");
  std::vector<cplx> grid(gh_ * gw_);
  if (dcf.empty()) {
    spread(samples, table, grid);
  } else {
    std::vector<cplx> weighted(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) weighted[i] = samples[i] * dcf[i];
    spread(weighted, table, grid);
  }
  fft_->backward(grid);
  ComplexImage img(h_, w_);
  const long cy = long(h_ / 2), cx = long(w_ / 2);
  for (std::size_t y = 0; y < h_; ++y) {
    const std::size_t gy = std::size_t((long(y) - cy + long(gh_)) % long(gh_));
    for (std::size_t x = 0; x < w_; ++x) {
      const std::size_t gx = std::size_t((long(x) - cx + long(gw_)) % long(gw_));
      img(y, x) = grid[gy * gw_ + gx] / apod_(y, x);
    }
  }
  return img;
}

ComplexImage NufftPlan::adjoint(std::span<const cplx> samples, std::span<const KPoint> coords,
                                std::span<const double> dcf) const {
  return adjoint(samples, prepare(coords), dcf);
}

std::vector<double> NufftPlan::sample_density(std::span<const double> weights, const GriddingTable &table) const {
  require(weights.size() == table.size(), "nufft: weight count does not match trajectory");
  std::vector<cplx> w(weights.begin(), weights.end());
  std::vector<cplx> grid(gh_ * gw_);
  spread(w, table, grid);
  std::vector<cplx> back(table.size());
  interpolate(grid, table, back);
  std::vector<double> out(back.size());
  for (std::size_t i = 0; i < back.size(); ++i) out[i] = back[i].real();
  return out;
}

} // namespace kforge
