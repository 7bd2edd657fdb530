#pragma once

#include "kforge/metrics.hpp"
#include "kforge/nufft.hpp"
#include "kforge/recon.hpp"
#include "kforge/sim.hpp"
#include "kforge/trajectory.hpp"

#include <array>
#include <filesystem>
#include <map>
#include <string>

namespace kforge {

struct PipelineConfig {
  std::filesystem::path video_dir = "videos"; // one sub-directory of frames per video
  std::filesystem::path out_dir = "out";
  std::size_t frames = 50; // frames loaded per video
  std::size_t height = 64, width = 64;
  SimConfig sim;
  std::size_t virtual_coils = 10;
  std::size_t compression_points = 100000;
  CartesianConfig cartesian{8, 9, 0.6, 3}; // a 15-frame window needs >= 239 phase-encode lines
  std::size_t radial_spokes = 13;
  double radial_increment = 23.8;
  std::size_t radial_samples = 0; // 0: image width
  SpiralConfig spiral;            // spiral.matrix 0: image width
  std::size_t recon_frames = 24;
  std::size_t varnet_window = 24, unet3d_window = 24, fastdvdnet_window = 5;
  std::array<double, 3> split{0.75, 0.10, 0.15};
  CsConfig cs;
  MetricsConfig metrics;
  NufftOptions nufft;
  std::uint64_t seed = 0;

  PipelineConfig();
  /// Throws ValidationError naming the offending key.
  void validate() const;
  SpiralConfig resolved_spiral() const;
  std::size_t resolved_radial_samples() const;
};

/// Parses `key = value` lines on top of `base`; '#' starts a comment. Unknown keys are errors.
PipelineConfig parse_pipeline_config(const std::string &text, const std::string &origin = "<config>",
                                     PipelineConfig base = {});
PipelineConfig load_pipeline_config(const std::filesystem::path &path, PipelineConfig base = {});
/// Applies one key/value pair (same keys as the file).
void set_config_value(PipelineConfig &cfg, const std::string &key, const std::string &value);

/// Canonical text: every key, sorted, with full-precision values. Paths are excluded so that the
/// hash identifies the numerical setup only.
std::string canonical_config(const PipelineConfig &cfg);
/// 16 hex digits (FNV-1a 64) of canonical_config.
std::string config_hash(const PipelineConfig &cfg);

} // namespace kforge
