#pragma once

#include "kforge/sim.hpp"

namespace kforge {

/// C_in x C_out projection onto the dominant right-singular directions of the coil data.
struct CompressionMatrix {
  Tensor<cplx, 2> matrix;
  double retained_energy = 1.0;
  std::vector<double> singular_values; // descending, all C_in of them

  std::size_t coils_in() const { return matrix.dim(0); }
  std::size_t coils_out() const { return matrix.dim(1); }
};

struct CompressedKSpace {
  MultiCoilKSpace kspace;
  CompressionMatrix compression;
};

/// One global SVD over all frames. At most `max_points` k-space locations (drawn with a fixed
/// seed) enter the SVD; all data are projected.
CompressedKSpace svd_coil_compress(const MultiCoilKSpace &ksp, std::size_t n_virtual,
                                   std::size_t max_points = 100000, std::uint64_t seed = 0);

/// out[t, v] = sum_c in[t, c] * matrix[c, v]; works for k-space or coil images.
Tensor<cplx, 4> apply_compression(const Tensor<cplx, 4> &data, const CompressionMatrix &cm);
/// Compresses C x H x W sensitivity maps with the same matrix (not renormalized).
CoilMapSet apply_compression(const CoilMapSet &maps, const CompressionMatrix &cm);

/// out[t, y, x] = sqrt(sum_c |mc[t, c, y, x]|^2)
MagnitudeImageSeries rss_combine(const MultiCoilImageSeries &mc);

/// sum_c conj(maps[c]) * mc[t, c]
ComplexImageSeries coil_combine(const MultiCoilImageSeries &mc, const CoilMapSet &maps);

struct SensitivityEstimate {
  CoilMapSet maps;
  std::size_t empty_pixels = 0; // pixels where the RSS fell below the floor; maps are 0 there
  bool degenerate = false;      // no pixel above the floor
};

constexpr double kSensitivityFloor = 1e-8;

/// Time-averaged coil images divided by their RSS.
SensitivityEstimate estimate_sensitivities(const MultiCoilImageSeries &images, double floor = kSensitivityFloor);
/// Averages k-space over frames, inverse FFTs each coil, and normalizes by the RSS.
SensitivityEstimate estimate_sensitivities(const MultiCoilKSpace &ksp, double floor = kSensitivityFloor);

} // namespace kforge
