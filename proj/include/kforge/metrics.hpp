#pragma once

#include "kforge/array.hpp"

#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace kforge {

/// Returned by psnr when mse == 0 and by snr_estimate when the noise ROI is constant.
inline constexpr double kInfinite = std::numeric_limits<double>::infinity();

double mse(const MagnitudeImageSeries &a, const MagnitudeImageSeries &b);
/// peak defaults to max(b).
double psnr(const MagnitudeImageSeries &a, const MagnitudeImageSeries &b, std::optional<double> peak = std::nullopt);

struct SsimOptions {
  std::size_t window = 11;
  double sigma = 1.5;
  double k1 = 0.01, k2 = 0.03;
  std::optional<double> dynamic_range; // default max(b) - min(b) over the series
};

/// Per-frame mean SSIM over valid (fully covered) window positions, averaged over frames.
double ssim(const MagnitudeImageSeries &a, const MagnitudeImageSeries &b, const SsimOptions &opts = {});

/// Axis-aligned rectangle of pixels, applied to every frame.
struct Roi {
  std::size_t y0 = 0, x0 = 0, h = 0, w = 0;
  std::size_t pixels() const { return h * w; }
  bool contains(std::size_t y, std::size_t x) const { return y >= y0 && y < y0 + h && x >= x0 && x < x0 + w; }
};

/// 20 log10(mean(signal) / std(noise)), both pooled over frames; std uses N - 1.
double snr_estimate(const MagnitudeImageSeries &img, const Roi &signal, const Roi &noise);

struct ProfileSpec {
  double y0 = 0, x0 = 0, y1 = 0, x1 = 0;
  std::size_t samples = 128;
};

struct EdgeSharpness {
  double mean = 0;
  double std_t = 0; // population std over frames
  std::vector<double> per_frame;
  std::size_t flat_frames = 0; // frames whose profile had max == min (ES = 0)
};

/// Bilinear profile, min-max normalized per frame; ES is the largest |forward difference|.
EdgeSharpness edge_sharpness(const MagnitudeImageSeries &series, const ProfileSpec &profile);

struct QualityReport {
  std::string dataset, method;
  double mse = 0, psnr_db = 0, ssim = 0, snr_db = 0, es_mean = 0, es_std_t = 0;
};

struct MetricsConfig {
  std::optional<Roi> signal_roi, noise_roi; // default: central box and top-left corner box
  std::optional<ProfileSpec> profile;       // default: horizontal line through the centre
  SsimOptions ssim;
};

QualityReport evaluate_quality(const MagnitudeImageSeries &pred, const MagnitudeImageSeries &truth,
                               const MetricsConfig &cfg, std::string dataset, std::string method);

/// Default ROIs and profile for an h x w image.
Roi default_signal_roi(std::size_t h, std::size_t w);
Roi default_noise_roi(std::size_t h, std::size_t w);
ProfileSpec default_profile(std::size_t h, std::size_t w);

inline constexpr const char *kQualityCsvHeader = "dataset,method,mse,psnr_db,ssim,snr_db,es_mean,es_std_t";
void write_quality_csv(std::ostream &os, const std::vector<QualityReport> &rows, bool header = true);
std::vector<QualityReport> read_quality_csv(std::istream &is);

} // namespace kforge
