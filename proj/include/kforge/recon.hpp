#pragma once

#include "kforge/coils.hpp"
#include "kforge/nufft.hpp"
#include "kforge/sim.hpp"
#include "kforge/trajectory.hpp"

#include <memory>
#include <optional>
#include <vector>

namespace kforge {

template <class Real> class BasicFftPlan;
using FftPlan = BasicFftPlan<double>;

enum class Modality { cartesian_masked, noncartesian };

/// Measured data, T x C x M. Cartesian: M = H*W, the full centred grid with unsampled rows zero.
/// Non-Cartesian: M = samples per frame, in trajectory order.
using Measurements = Tensor<cplx, 3>;

/// E = M F S per frame. Both modalities use orthonormal scaling, so a trajectory that lands exactly
/// on grid points reproduces the Cartesian operator. Without coil maps the operator acts on one
/// coil with unit sensitivity.
class EncodingOperator {
public:
  static EncodingOperator cartesian(const CartesianMask &mask, std::size_t width,
                                    std::optional<CoilMapSet> maps = std::nullopt);
  static EncodingOperator noncartesian(const Trajectory &traj, std::size_t height, std::size_t width,
                                       std::optional<CoilMapSet> maps = std::nullopt, NufftOptions opts = {});

  Modality modality() const { return modality_; }
  std::size_t frames() const { return frames_; }
  std::size_t height() const { return h_; }
  std::size_t width() const { return w_; }
  std::size_t samples() const { return m_; }
  std::size_t coils() const { return maps_ ? maps_->n_coils() : 1; }
  bool has_maps() const { return maps_.has_value(); }
  const CoilMapSet &maps() const;
  /// Returns a copy of this operator with different (or no) maps; plans and tables are shared.
  EncodingOperator with_maps(std::optional<CoilMapSet> maps) const;

  /// Undersamples fully-sampled Cartesian k-space (T x C x H x W). Non-Cartesian data are
  /// resampled from the coil images with the forward NUFFT.
  Measurements sample(const MultiCoilKSpace &full) const;

  Measurements forward_coils(const MultiCoilImageSeries &coil_images) const;
  /// With `density_compensated`, non-Cartesian samples are weighted by HW * dcf (each frame of the
  /// dcf sums to 1), giving a unit-peak point spread function. Cartesian data are never weighted.
  MultiCoilImageSeries adjoint_coils(const Measurements &y, bool density_compensated = false) const;

  Measurements forward(const ComplexImageSeries &x) const;
  ComplexImageSeries adjoint(const Measurements &y, bool density_compensated = false) const;

  /// Per-coil E_c^H E_c applied to one coil image of frame t (unit weights).
  void normal_coil(std::size_t t, std::span<const cplx> in, std::span<cplx> out) const;
  /// Approximate inverse of (A_t^H A_t + shift I): exact for Cartesian masks, a circulant fit otherwise.
  void precondition_coil(std::size_t t, double shift, std::span<const cplx> in, std::span<cplx> out) const;
  /// in^H A_t^H A_t in, i.e. ||A_t in||^2, without the inverse transforms.
  double normal_energy(std::size_t t, std::span<const cplx> in) const;
  /// Single-precision versions of the two above, for inexact inner solves.
  void normal_coil(std::size_t t, std::span<const cplxf> in, std::span<cplxf> out) const;
  void precondition_coil(std::size_t t, double shift, std::span<const cplxf> in, std::span<cplxf> out) const;
  /// E^H E x over all coils (unit weights).
  ComplexImageSeries normal(const ComplexImageSeries &x) const;

  /// Cartesian only: whether phase-encode row `row` is acquired in frame t.
  bool row_sampled(std::size_t t, std::size_t row) const;

  void check(const Measurements &y) const;

private:
  struct Shared;
  Modality modality_ = Modality::cartesian_masked;
  std::size_t frames_ = 0, h_ = 0, w_ = 0, m_ = 0;
  std::optional<CoilMapSet> maps_;
  std::shared_ptr<const Shared> shared_;
};

/// Non-Cartesian trajectory visiting exactly the grid points of the sampled rows of a mask, with
/// dcf 1/(HW) so that its density-compensated adjoint equals the Cartesian zero-filled image.
Trajectory trajectory_from_mask(const CartesianMask &mask, std::size_t width);

/// Cartesian masks and non-Cartesian trajectories from the pipeline behave the same way here.
MultiCoilImageSeries zero_filled_coils(const Measurements &y, const EncodingOperator &op);
/// Coil-combined with the operator's maps (required).
ComplexImageSeries zero_filled(const Measurements &y, const EncodingOperator &op);
MagnitudeImageSeries zero_filled_rss(const Measurements &y, const EncodingOperator &op);

/// Sensitivities from the time-combined data: every frame's zero-filled coil images averaged over
/// time (Cartesian rows are averaged over the frames that sampled them).
SensitivityEstimate estimate_sensitivities(const Measurements &y, const EncodingOperator &op);

struct CsConfig {
  double lambda = 5e-4;
  std::size_t iterations = 30;
  double rho_data = 1.0;   // penalty on v = S x
  double rho_tv = 0.05;    // penalty on z = D x
  std::size_t cg_iterations = 10;
  double cg_tolerance = 1e-3;  // relative residual, per coil and frame
  double tolerance = 0;        // stop once the relative objective change falls below this

  void validate() const;
};

struct CsResult {
  MagnitudeImageSeries magnitude;
  ComplexImageSeries solution;  // in the units of the input data
  std::vector<double> objective; // normalized problem; entry 0 is the zero-filled start
  double scale = 1;              // max |zero-filled| used for normalization
  std::size_t iterations = 0;
};

/// Objective 0.5 ||E x - y||^2 + lambda * sum |x[t+1] - x[t]| (forward differences, no wrap).
double cs_objective(const ComplexImageSeries &x, const Measurements &y, const EncodingOperator &op, double lambda);

/// ADMM with splits v = S x (coil images) and z = D x (temporal differences). The data are divided
/// by max |zero-filled| first, so lambda is relative to a unit-peak image; the result is scaled back.
CsResult cs_temporal_tv(const Measurements &y, const EncodingOperator &op, const CsConfig &cfg = {});

} // namespace kforge
