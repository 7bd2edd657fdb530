#pragma once

#include "kforge/array.hpp"

#include <memory>
#include <span>
#include <vector>

namespace kforge {

template <class Real> class BasicFftPlan;
using FftPlan = BasicFftPlan<double>;

/// k-space location in cycles per pixel; both components in [-0.5, 0.5).
struct KPoint {
  double ky = 0, kx = 0;
  friend bool operator==(const KPoint &, const KPoint &) = default;
};

struct NufftOptions {
  double oversampling = 2.0;
  std::size_t kernel_width = 7; // taps per dimension
  double beta = 0;              // 0 selects the Beatty optimum for (width, oversampling)
};

/// Kaiser-Bessel interpolation weights for a fixed set of sample locations.
/// Building one is the expensive part of a transform; reuse it across coils.
class GriddingTable {
public:
  std::size_t size() const { return start_y_.size(); }
  std::size_t width() const { return width_; }

private:
  friend class NufftPlan;
  std::size_t width_ = 0;
  std::vector<std::uint32_t> start_y_, start_x_; // wrapped first grid index per dimension
  std::vector<double> wy_, wx_;                  // size() * width_ weights
};

/// Convolution-gridding NUFFT for an H x W image with pixel coordinates centred at (H/2, W/2):
///
///   forward:  s_i = sum_{y,x} img[y,x] exp(-2 pi i (ky_i (y - H/2) + kx_i (x - W/2)))
///   adjoint:  img[y,x] = sum_i dcf_i s_i exp(+2 pi i (...))
///
/// Plans are immutable; forward/adjoint are reentrant.
class NufftPlan {
public:
  NufftPlan(std::size_t height, std::size_t width, NufftOptions opts = {});

  std::size_t height() const { return h_; }
  std::size_t width() const { return w_; }
  std::size_t grid_height() const { return gh_; }
  std::size_t grid_width() const { return gw_; }
  const NufftOptions &options() const { return opts_; }
  /// Deapodization divisor (continuous kernel transform), H x W, strictly positive.
  const RealImage &apodization() const { return apod_; }

  /// Validates coordinates and precomputes kernel weights.
  GriddingTable prepare(std::span<const KPoint> coords) const;

  std::vector<cplx> forward(const ComplexImage &img, const GriddingTable &table) const;
  std::vector<cplx> forward(const ComplexImage &img, std::span<const KPoint> coords) const;

  /// Empty `dcf` means unit weights.
  ComplexImage adjoint(std::span<const cplx> samples, const GriddingTable &table,
                       std::span<const double> dcf = {}) const;
  ComplexImage adjoint(std::span<const cplx> samples, std::span<const KPoint> coords,
                       std::span<const double> dcf = {}) const;

  /// Kernel convolution of real sample weights evaluated back at the sample locations:
  /// out_i = sum_j w_j sum_g K(k_i - g) K(g - k_j). Used for iterative density compensation.
  std::vector<double> sample_density(std::span<const double> weights, const GriddingTable &table) const;

  /// Kaiser-Bessel kernel value at offset `u` grid cells.
  double kernel(double u) const;

private:
  void spread(std::span<const cplx> values, const GriddingTable &table, std::span<cplx> grid) const;
  void interpolate(std::span<const cplx> grid, const GriddingTable &table, std::span<cplx> out) const;

  std::size_t h_, w_, gh_, gw_;
  NufftOptions opts_;
  RealImage apod_;
  std::shared_ptr<const FftPlan> fft_;
};

} // namespace kforge
