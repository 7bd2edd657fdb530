#pragma once

#include "kforge/nufft.hpp"
#include "kforge/sim.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace kforge {

struct CartesianConfig {
  std::size_t n_center = 8;
  std::size_t n_random = 9;
  double band_fraction = 0.6;        // random lines come from the bottom band_fraction of rows
  std::size_t no_repeat_window = 15; // a random line is never reused within this many consecutive frames
};

/// Per-frame selection of phase-encode rows (T x H).
struct CartesianMask {
  std::size_t frames = 0, lines = 0;
  std::size_t n_center = 0, n_random = 0;
  std::vector<std::uint8_t> mask;

  bool sampled(std::size_t t, std::size_t row) const { return mask[t * lines + row] != 0; }
  std::size_t count(std::size_t t) const;
  /// Rows the random draw may use: the bottom band minus the centre block.
  std::vector<std::size_t> random_band(const CartesianConfig &cfg) const;
};

/// First row of the centre block (rows H/2 - n/2 .. H/2 - n/2 + n - 1).
std::size_t center_block_start(std::size_t lines, std::size_t n_center);
std::vector<std::size_t> random_band_rows(std::size_t lines, const CartesianConfig &cfg);
/// Smallest H for which `cfg` can honour its no-repeat window.
std::size_t minimum_lines(const CartesianConfig &cfg);

CartesianMask cartesian_mask(std::size_t frames, std::size_t lines, const CartesianConfig &cfg, Rng &rng);
/// Every row sampled in every frame.
CartesianMask full_cartesian_mask(std::size_t frames, std::size_t lines);

enum class TrajectoryKind : std::uint8_t { custom = 0, radial = 1, spiral = 2, cartesian = 3 };

/// Non-Cartesian sampling for T frames of S samples each, in cycles/pixel.
struct Trajectory {
  TrajectoryKind kind = TrajectoryKind::custom;
  std::size_t frames = 0, samples = 0;
  std::size_t readouts = 1;          // spokes or arms per frame
  std::size_t readout_length = 0;    // samples per spoke/arm
  std::size_t matrix_h = 0, matrix_w = 0;
  std::vector<KPoint> coords;        // frames * samples
  std::vector<double> dcf;           // frames * samples, >= 0
  std::vector<double> readout_angle; // frames * readouts, radians

  std::span<const KPoint> frame_coords(std::size_t t) const { return {coords.data() + t * samples, samples}; }
  std::span<const double> frame_dcf(std::size_t t) const { return {dcf.data() + t * samples, samples}; }
  std::span<double> frame_dcf(std::size_t t) { return {dcf.data() + t * samples, samples}; }
  void validate() const;
};

/// Global spoke n = t * spokes + j has angle n * increment (mod 180 deg); each spoke samples
/// k = -0.5 + m / samples through DC. dcf is the analytic ramp.
Trajectory radial_trajectory(std::size_t frames, std::size_t spokes, std::size_t samples,
                             double angle_increment_deg = 23.8);

struct SpiralConfig {
  std::size_t arms = 15;
  double r_inner = 0.15;   // fraction of k_max
  double r_outer = 0.56;   // fraction of k_max
  double accel_inner = 1.1;
  double accel_outer = 15.0;
  std::size_t samples_per_arm = 512;
  std::size_t frame_period = 12; // frames before the pattern repeats
  std::size_t matrix = 224;      // image matrix the acceleration factors refer to
};

/// Radius of arm 0 parameterized by its polar angle: theta(r) for the variable-density law.
double spiral_theta(double r, const SpiralConfig &cfg);
/// Radial undersampling factor at radius r (cycles/pixel).
double spiral_acceleration(double r, const SpiralConfig &cfg);

/// Arms rotated by 2 pi j / arms within a frame; the frame pattern advances by 1/frame_period
/// of the inter-arm angle so that it repeats exactly every frame_period frames.
/// dcf from Pipe-Menon iterations.
Trajectory spiral_trajectory(std::size_t frames, const SpiralConfig &cfg);

/// Every grid location of an h x w Cartesian k-space, expressed as a trajectory.
Trajectory cartesian_grid_trajectory(std::size_t frames, std::size_t h, std::size_t w);

enum class DcfMethod { ramp, pipe_menon, uniform };

/// Fills traj.dcf. Each frame is normalized to unit sum, so the dcf-weighted adjoint of the
/// forward transform of a centred delta peaks at 1.
void density_compensation(Trajectory &traj, DcfMethod method, std::size_t iterations = 10,
                          const NufftOptions &opts = {});

void write_trajectory(const std::filesystem::path &path, const Trajectory &traj);
Trajectory read_trajectory(const std::filesystem::path &path);
std::vector<std::uint8_t> encode_trajectory(const Trajectory &traj);
Trajectory decode_trajectory(std::span<const std::uint8_t> bytes);

void write_mask(const std::filesystem::path &path, const CartesianMask &mask);
CartesianMask read_mask(const std::filesystem::path &path);
std::vector<std::uint8_t> encode_mask(const CartesianMask &mask);
CartesianMask decode_mask(std::span<const std::uint8_t> bytes);

} // namespace kforge
