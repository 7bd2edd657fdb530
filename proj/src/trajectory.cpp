#include "kforge/trajectory.hpp"

#include "kforge/binio.hpp"
#include "kforge/error.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <iterator>
#include <numbers>
#include <set>

namespace kforge {

using std::numbers::pi;

namespace {

constexpr std::uint32_t kFormatVersion = 1;

// +0.5 and -0.5 are the same DFT frequency for integer pixel offsets; keep the half-open range.
double wrap_half(double k) { return k >= 0.5 ? k - 1.0 : k; }

KPoint polar_point(double r, double angle) { return {wrap_half(r * std::sin(angle)), wrap_half(r * std::cos(angle))}; }

std::vector<std::uint8_t> slurp(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingInputError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void dump(const std::filesystem::path &path, const std::vector<std::uint8_t> &bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out.write(reinterpret_cast<const char *>(bytes.data()), std::streamsize(bytes.size()));
}

} // namespace

std::size_t CartesianMask::count(std::size_t t) const {
  return std::size_t(std::count_if(mask.begin() + long(t * lines), mask.begin() + long((t + 1) * lines),
                                   [](std::uint8_t v) { return v != 0; }));
}

std::vector<std::size_t> CartesianMask::random_band(const CartesianConfig &cfg) const {
  return random_band_rows(lines, cfg);
}

std::size_t center_block_start(std::size_t lines, std::size_t n_center) {
  return lines / 2 >= n_center / 2 ? lines / 2 - n_center / 2 : 0;
}

std::vector<std::size_t> random_band_rows(std::size_t lines, const CartesianConfig &cfg) {
  const auto band = static_cast<std::size_t>(std::floor(cfg.band_fraction * double(lines) + 1e-9));
  const std::size_t c0 = center_block_start(lines, cfg.n_center);
  std::vector<std::size_t> rows;
  for (std::size_t r = lines - std::min(band, lines); r < lines; ++r)
    if (r < c0 || r >= c0 + cfg.n_center) rows.push_back(r);
  return rows;
}

std::size_t minimum_lines(const CartesianConfig &cfg) {
  const std::size_t need = cfg.n_random * std::max<std::size_t>(cfg.no_repeat_window, 1);
  for (std::size_t h = std::max<std::size_t>(cfg.n_center, 1);; ++h) {
    if (random_band_rows(h, cfg).size() >= need) return h;
    if (h > 1u << 20) throw ValidationError("cartesian_mask: configuration can never be satisfied");
  }
}

CartesianMask cartesian_mask(std::size_t frames, std::size_t lines, const CartesianConfig &cfg, Rng &rng) {
  require(frames >= 1, "cartesian_mask: need at least one frame");
  require(lines >= 32, "cartesian_mask: need at least 32 phase-encode lines");
  require(cfg.n_center <= lines, "cartesian_mask: more centre lines than rows");
  require(cfg.band_fraction > 0 && cfg.band_fraction <= 1, "cartesian_mask: band_fraction must be in (0, 1]");

  const auto band = random_band_rows(lines, cfg);
  const std::size_t window = std::max<std::size_t>(cfg.no_repeat_window, 1);
  if (cfg.n_random > 0 && band.size() < cfg.n_random * window)
    throw ValidationError("cartesian_mask: band of " + std::to_string(band.size()) + " rows cannot supply " +
                          std::to_string(cfg.n_random) + " fresh lines per frame over a " + std::to_string(window) +
                          "-frame window; need at least H = " + std::to_string(minimum_lines(cfg)));

  CartesianMask m{frames, lines, cfg.n_center, cfg.n_random, std::vector<std::uint8_t>(frames * lines, 0)};
  const std::size_t c0 = center_block_start(lines, cfg.n_center);
  std::deque<std::vector<std::size_t>> recent; // random picks of the previous window-1 frames
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t r = c0; r < c0 + cfg.n_center; ++r) m.mask[t * lines + r] = 1;

    std::set<std::size_t> blocked;
    for (const auto &picks : recent) blocked.insert(picks.begin(), picks.end());
    std::vector<std::size_t> pool;
    std::copy_if(band.begin(), band.end(), std::back_inserter(pool), [&](std::size_t r) { return !blocked.count(r); });

    // Partial Fisher-Yates: the first n_random entries become a uniform draw without replacement.
    std::vector<std::size_t> picks;
    for (std::size_t i = 0; i < cfg.n_random; ++i) {
      const std::size_t j = std::uniform_int_distribution<std::size_t>(i, pool.size() - 1)(rng);
      std::swap(pool[i], pool[j]);
      picks.push_back(pool[i]);
      m.mask[t * lines + pool[i]] = 1;
    }
    recent.push_back(std::move(picks));
    if (recent.size() > window - 1) recent.pop_front();
  }
  return m;
}

CartesianMask full_cartesian_mask(std::size_t frames, std::size_t lines) {
  return {frames, lines, lines, 0, std::vector<std::uint8_t>(frames * lines, 1)};
}

void Trajectory::validate() const {
  require(coords.size() == frames * samples, "trajectory: coordinate count does not match frames x samples");
  require(dcf.empty() || dcf.size() == coords.size(), "trajectory: dcf count does not match coordinates");
  for (const auto &k : coords)
    require(k.ky >= -0.5 && k.ky < 0.5 && k.kx >= -0.5 && k.kx < 0.5, "trajectory: coordinate outside [-0.5, 0.5)");
  for (double w : dcf) require(std::isfinite(w) && w >= 0, "trajectory: dcf must be finite and nonnegative");
}

Trajectory radial_trajectory(std::size_t frames, std::size_t spokes, std::size_t samples, double angle_increment_deg) {
  require(frames >= 1 && spokes >= 1, "radial_trajectory: need frames >= 1 and spokes >= 1");
  require(samples >= 2, "radial_trajectory: need at least 2 samples per spoke");
  Trajectory tr;
  tr.kind = TrajectoryKind::radial;
  tr.frames = frames;
  tr.samples = spokes * samples;
  tr.readouts = spokes;
  tr.readout_length = samples;
  tr.matrix_h = tr.matrix_w = samples;
  tr.coords.reserve(frames * tr.samples);
  tr.readout_angle.reserve(frames * spokes);
  for (std::size_t t = 0; t < frames; ++t)
    for (std::size_t j = 0; j < spokes; ++j) {
      const double n = double(t * spokes + j);
      const double deg = std::fmod(n * angle_increment_deg, 180.0);
      const double theta = deg * pi / 180.0;
      tr.readout_angle.push_back(theta);
      for (std::size_t m = 0; m < samples; ++m) {
        const double k = -0.5 + double(m) / double(samples);
        tr.coords.push_back(polar_point(k, theta));
      }
    }
  density_compensation(tr, DcfMethod::ramp);
  return tr;
}

double spiral_acceleration(double r, const SpiralConfig &cfg) {
  const double r1 = cfg.r_inner * 0.5, r2 = cfg.r_outer * 0.5;
  if (r <= r1) return cfg.accel_inner;
  if (r >= r2) return cfg.accel_outer;
  return cfg.accel_inner + (cfg.accel_outer - cfg.accel_inner) * (r - r1) / (r2 - r1);
}

double spiral_theta(double r, const SpiralConfig &cfg) {
  // Radial spacing between neighbouring arm passes is R(r)/N, so
  // dtheta/dr = 2 pi N / (arms R(r)); integrated piecewise in closed form.
  const double c = 2 * pi * double(cfg.matrix) / double(cfg.arms);
  const double r1 = cfg.r_inner * 0.5, r2 = cfg.r_outer * 0.5;
  const double a = cfg.accel_inner, b = cfg.accel_outer;
  if (r <= r1) return c * r / a;
  const double slope = (b - a) / (r2 - r1);
  auto ramp = [&](double rr) {
    return std::abs(slope) < 1e-15 ? (rr - r1) / a : std::log((a + slope * (rr - r1)) / a) / slope;
  };
  if (r <= r2) return c * (r1 / a + ramp(r));
  return c * (r1 / a + ramp(r2) + (r - r2) / b);
}

Trajectory spiral_trajectory(std::size_t frames, const SpiralConfig &cfg) {
  require(frames >= 1, "spiral_trajectory: need at least one frame");
  require(cfg.arms >= 1 && cfg.samples_per_arm >= 2 && cfg.frame_period >= 1 && cfg.matrix >= 2,
          "spiral_trajectory: invalid arm/sample/period/matrix counts");
  require(cfg.r_inner >= 0 && cfg.r_inner < cfg.r_outer && cfg.r_outer <= 1,
          "spiral_trajectory: radii must satisfy 0 <= r_inner < r_outer <= 1");
  require(cfg.accel_inner > 0 && cfg.accel_outer > 0, "spiral_trajectory: acceleration factors must be positive");

  // Arm 0 sampled at equal arc length from DC to k_max = 0.5.
  constexpr std::size_t fine = 1 << 16;
  std::vector<double> arc(fine + 1, 0.0);
  double prev_theta = 0;
  for (std::size_t i = 1; i <= fine; ++i) {
    const double r0 = 0.5 * double(i - 1) / fine, r1 = 0.5 * double(i) / fine;
    const double th = spiral_theta(r1, cfg);
    const double rm = 0.5 * (r0 + r1), dth = th - prev_theta, dr = r1 - r0;
    arc[i] = arc[i - 1] + std::sqrt(dr * dr + rm * rm * dth * dth);
    prev_theta = th;
  }
  const std::size_t S = cfg.samples_per_arm;
  std::vector<double> radius(S), theta(S);
  for (std::size_t j = 0; j < S; ++j) {
    const double s = arc.back() * double(j) / double(S - 1);
    const auto it = std::lower_bound(arc.begin(), arc.end(), s);
    const std::size_t i = std::clamp<std::size_t>(std::size_t(it - arc.begin()), 1, fine);
    const double f = (s - arc[i - 1]) / std::max(arc[i] - arc[i - 1], 1e-300);
    radius[j] = 0.5 * (double(i - 1) + std::clamp(f, 0.0, 1.0)) / fine;
    theta[j] = spiral_theta(radius[j], cfg);
  }
  radius.front() = 0.0;
  radius.back() = 0.5;
  theta.back() = spiral_theta(0.5, cfg);

  Trajectory tr;
  tr.kind = TrajectoryKind::spiral;
  tr.frames = frames;
  tr.samples = cfg.arms * S;
  tr.readouts = cfg.arms;
  tr.readout_length = S;
  tr.matrix_h = tr.matrix_w = cfg.matrix;
  tr.coords.reserve(frames * tr.samples);
  const double arm_step = 2 * pi / double(cfg.arms);
  for (std::size_t t = 0; t < frames; ++t) {
    const double base = arm_step * double(t % cfg.frame_period) / double(cfg.frame_period);
    for (std::size_t a = 0; a < cfg.arms; ++a) {
      const double rot = arm_step * double(a) + base;
      tr.readout_angle.push_back(rot);
      for (std::size_t j = 0; j < S; ++j) tr.coords.push_back(polar_point(radius[j], theta[j] + rot));
    }
  }
  density_compensation(tr, DcfMethod::pipe_menon);
  return tr;
}

Trajectory cartesian_grid_trajectory(std::size_t frames, std::size_t h, std::size_t w) {
  Trajectory tr;
  tr.kind = TrajectoryKind::cartesian;
  tr.frames = frames;
  tr.samples = h * w;
  tr.readouts = h;
  tr.readout_length = w;
  tr.matrix_h = h;
  tr.matrix_w = w;
  for (std::size_t t = 0; t < frames; ++t)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x)
        tr.coords.push_back({(double(y) - double(h / 2)) / double(h), (double(x) - double(w / 2)) / double(w)});
  density_compensation(tr, DcfMethod::uniform);
  return tr;
}

void density_compensation(Trajectory &traj, DcfMethod method, std::size_t iterations, const NufftOptions &opts) {
  require(traj.coords.size() == traj.frames * traj.samples && traj.samples > 0,
          "density_compensation: trajectory has no coordinates");
  traj.dcf.assign(traj.coords.size(), 0.0);

  std::unique_ptr<NufftPlan> plan;
  if (method == DcfMethod::pipe_menon) {
    const std::size_t h = traj.matrix_h ? traj.matrix_h : 64, w = traj.matrix_w ? traj.matrix_w : 64;
    plan = std::make_unique<NufftPlan>(h, w, opts);
  }

  for (std::size_t t = 0; t < traj.frames; ++t) {
    const auto pts = traj.frame_coords(t);
    const bool degenerate = std::all_of(pts.begin(), pts.end(), [&](const KPoint &k) { return k == pts.front(); });
    if (degenerate && pts.size() > 1)
      throw ValidationError("density_compensation: degenerate trajectory (all samples identical) in frame " +
                            std::to_string(t));
    auto w = traj.frame_dcf(t);
    switch (method) {
    case DcfMethod::uniform:
      std::fill(w.begin(), w.end(), 1.0);
      break;
    case DcfMethod::ramp: {
      double innermost = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < pts.size(); ++i) {
        w[i] = std::hypot(pts[i].ky, pts[i].kx);
        if (w[i] > 0) innermost = std::min(innermost, w[i]);
      }
      if (!std::isfinite(innermost)) innermost = 1.0;
      // Every spoke crosses DC; the DC location gets the innermost weight once, split between its copies.
      const auto at_dc = double(std::count(w.begin(), w.end(), 0.0));
      for (auto &v : w)
        if (v == 0) v = innermost / at_dc;
      break;
    }
    case DcfMethod::pipe_menon: {
      const GriddingTable table = plan->prepare(pts);
      std::vector<double> cur(pts.size(), 1.0);
      for (std::size_t it = 0; it < iterations; ++it) {
        const auto density = plan->sample_density(cur, table);
        for (std::size_t i = 0; i < cur.size(); ++i) {
          if (!(density[i] > 0)) throw NumericalError("density_compensation: non-positive sample density");
          cur[i] /= density[i];
        }
      }
      std::copy(cur.begin(), cur.end(), w.begin());
      break;
    }
    }
    double sum = 0;
    for (double v : w) sum += v;
    if (!(sum > 0)) throw NumericalError("density_compensation: zero total weight");
    for (auto &v : w) v /= sum;
  }
}

std::vector<std::uint8_t> encode_trajectory(const Trajectory &traj) {
  traj.validate();
  require(!traj.dcf.empty(), "write_trajectory: dcf not populated");
  std::vector<std::uint8_t> out;
  out.reserve(16 + traj.coords.size() * 12);
  binio::put_bytes(out, "KTRJ");
  binio::put_u32(out, kFormatVersion);
  binio::put_u32(out, std::uint32_t(traj.frames));
  binio::put_u32(out, std::uint32_t(traj.samples));
  for (const auto &k : traj.coords) {
    binio::put_f32(out, float(k.ky));
    binio::put_f32(out, float(k.kx));
  }
  for (double w : traj.dcf) binio::put_f32(out, float(w));
  return out;
}

Trajectory decode_trajectory(std::span<const std::uint8_t> bytes) {
  binio::Reader<FormatError> in(bytes.data(), bytes.size(), "trajectory");
  const auto magic = in.take(4);
  if (std::string(magic, magic + 4) != "KTRJ") throw FormatError("trajectory: bad magic");
  if (in.u32() != kFormatVersion) throw FormatError("trajectory: unsupported version");
  Trajectory tr;
  tr.frames = in.u32();
  tr.samples = in.u32();
  const std::uint64_t n = std::uint64_t(tr.frames) * tr.samples;
  if (n * 12 != in.remaining()) throw FormatError("trajectory: payload size does not match header");
  tr.readout_length = tr.samples;
  tr.coords.resize(n);
  tr.dcf.resize(n);
  for (auto &k : tr.coords) {
    k.ky = in.f32();
    k.kx = in.f32();
  }
  for (auto &w : tr.dcf) w = in.f32();
  tr.validate();
  return tr;
}

void write_trajectory(const std::filesystem::path &path, const Trajectory &traj) { dump(path, encode_trajectory(traj)); }

Trajectory read_trajectory(const std::filesystem::path &path) { return decode_trajectory(slurp(path)); }

std::vector<std::uint8_t> encode_mask(const CartesianMask &m) {
  require(m.mask.size() == m.frames * m.lines, "write_mask: inconsistent mask");
  std::vector<std::uint8_t> out;
  binio::put_bytes(out, "KMSK");
  binio::put_u32(out, kFormatVersion);
  binio::put_u32(out, std::uint32_t(m.frames));
  binio::put_u32(out, std::uint32_t(m.lines));
  std::vector<std::uint8_t> packed((m.mask.size() + 7) / 8, 0);
  for (std::size_t i = 0; i < m.mask.size(); ++i)
    if (m.mask[i]) packed[i / 8] |= std::uint8_t(1u << (i % 8));
  out.insert(out.end(), packed.begin(), packed.end());
  return out;
}

CartesianMask decode_mask(std::span<const std::uint8_t> bytes) {
  binio::Reader<FormatError> in(bytes.data(), bytes.size(), "mask");
  const auto magic = in.take(4);
  if (std::string(magic, magic + 4) != "KMSK") throw FormatError("mask: bad magic");
  if (in.u32() != kFormatVersion) throw FormatError("mask: unsupported version");
  CartesianMask m;
  m.frames = in.u32();
  m.lines = in.u32();
  const std::uint64_t n = std::uint64_t(m.frames) * m.lines;
  if ((n + 7) / 8 != in.remaining()) throw FormatError("mask: payload size does not match header");
  const auto *packed = in.take((n + 7) / 8);
  m.mask.resize(n);
  for (std::size_t i = 0; i < n; ++i) m.mask[i] = (packed[i / 8] >> (i % 8)) & 1u;
  // Centre/random split is not stored; recover the per-frame count as "random" lines.
  m.n_center = 0;
  m.n_random = m.frames ? m.count(0) : 0;
  return m;
}

void write_mask(const std::filesystem::path &path, const CartesianMask &mask) { dump(path, encode_mask(mask)); }

CartesianMask read_mask(const std::filesystem::path &path) { return decode_mask(slurp(path)); }

} // namespace kforge
