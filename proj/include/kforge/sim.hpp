#pragma once

#include "kforge/array.hpp"
#include "kforge/video.hpp"

#include <cstdint>
#include <random>
#include <string>

namespace kforge {

using Rng = std::mt19937_64;

enum class NoiseModel { gaussian, uniform };

struct Range {
  double lo = 0, hi = 0;
  double draw(Rng &rng) const { return std::uniform_real_distribution<double>(lo, hi)(rng); }
  bool valid() const { return lo <= hi; }
};

/// Parameters of the natural-video to multi-coil k-space simulation.
/// Axis ranges are fractions of the image width; coil sigmas are fractions of the image size
/// along the same axis.
struct SimConfig {
  double phase_scale = 4.0;
  Range ellipse_long_axis{1.0, 1.4};
  Range ellipse_short_axis{0.64, 0.96};
  std::size_t bg_phase_grid = 6;
  std::size_t n_coils = 30;
  Range coil_intensity{0.1, 1.0};
  Range coil_sigma{0.16, 0.5};
  double coil_center_exclusion = 0.2; // side of the forbidden central box, fraction of size
  Range target_snr{12.0, 22.0};       // linear amplitude ratio
  NoiseModel noise_model = NoiseModel::gaussian;
  bool add_noise = true;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Sensitivity maps, C x H x W, normalized so that the RSS over coils is 1 at every pixel.
struct CoilMapSet {
  Tensor<cplx, 3> maps;
  std::size_t n_coils() const { return maps.dim(0); }
  std::size_t height() const { return maps.dim(1); }
  std::size_t width() const { return maps.dim(2); }
};

/// T x C x H x W centred Cartesian k-space (DC at [H/2, W/2]).
struct MultiCoilKSpace {
  Tensor<cplx, 4> data;
  std::size_t frames() const { return data.dim(0); }
  std::size_t coils() const { return data.dim(1); }
  std::size_t height() const { return data.dim(2); }
  std::size_t width() const { return data.dim(3); }
};

struct ChannelPair {
  int real = 0, imag = 1;
};

struct EllipseParams {
  double rotation = 0;   // radians, [0, pi)
  double long_axis = 0;  // full axis length, pixels
  double short_axis = 0; // full axis length, pixels
};

struct CoilParams {
  double peak = 1;
  double sigma_y = 1, sigma_x = 1;
  double center_y = 0, center_x = 0;
  double offset_phase = 0;
  RealImage smooth_phase; // H x W
};

ChannelPair draw_channel_pair(Rng &rng);
/// z = |a + ib| exp(i * phase_scale * arg(a + ib)) from the chosen channel pair.
ComplexImageSeries rgb_to_complex(const RGBVideo &video, ChannelPair pair, double phase_scale = 4.0);
ComplexImageSeries rgb_to_complex(const RGBVideo &video, Rng &rng, double phase_scale = 4.0);

EllipseParams draw_ellipse(const SimConfig &cfg, std::size_t width, Rng &rng);
/// 1 inside the ellipse centred on the image, 0 outside.
RealImage elliptical_mask(std::size_t h, std::size_t w, const EllipseParams &e);
ComplexImageSeries apply_elliptical_mask(const ComplexImageSeries &series, const EllipseParams &e);
ComplexImageSeries apply_elliptical_mask(const ComplexImageSeries &series, const SimConfig &cfg, Rng &rng);

/// Bicubic upscale of a grid x grid matrix of i.i.d. U[-pi, pi] draws to h x w.
RealImage random_smooth_phase(std::size_t h, std::size_t w, std::size_t grid, Rng &rng);
ComplexImageSeries add_background_phase(const ComplexImageSeries &series, const RealImage &phase);
ComplexImageSeries add_background_phase(const ComplexImageSeries &series, const SimConfig &cfg, Rng &rng);

std::vector<CoilParams> draw_coil_params(const SimConfig &cfg, std::size_t h, std::size_t w, Rng &rng);
CoilMapSet render_coil_maps(const std::vector<CoilParams> &params, std::size_t h, std::size_t w);
CoilMapSet generate_coil_maps(const SimConfig &cfg, std::size_t h, std::size_t w, Rng &rng);

/// out[t, c] = maps[c] * series[t]
MultiCoilImageSeries apply_coil_maps(const ComplexImageSeries &series, const CoilMapSet &coils);

struct NoiseDraw {
  MultiCoilImageSeries data;
  double target_snr = 0; // +inf when noise is disabled
  double sigma = 0;      // per-component standard deviation
};

/// Draws one target SNR per dataset and adds independent complex noise to every coil, frame and
/// pixel with per-component std = mean(|signal| over nonzero pixels) / snr.
NoiseDraw add_noise(const MultiCoilImageSeries &mc, const SimConfig &cfg, Rng &rng);

MultiCoilKSpace fft2_forward(const MultiCoilImageSeries &mc);
MultiCoilImageSeries ifft2_inverse(const MultiCoilKSpace &ksp);

/// Everything the pipeline produces for one video.
struct Simulation {
  ComplexImageSeries object; // after mask and background phase
  CoilMapSet coils;
  MultiCoilKSpace kspace;
  ChannelPair channels;
  EllipseParams ellipse;
  double target_snr = 0;
  double noise_sigma = 0;
};

/// Full object + coil + noise + FFT chain, drawing from `rng` in a fixed order.
Simulation simulate(const RGBVideo &video, const SimConfig &cfg, Rng &rng);

/// Independent per-video stream derived from a dataset seed and a video identifier.
std::uint64_t derive_seed(std::uint64_t base, const std::string &video_id);

} // namespace kforge
