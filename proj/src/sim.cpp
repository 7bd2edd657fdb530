#include "kforge/sim.hpp"

#include "kforge/error.hpp"
#include "kforge/fft.hpp"
#include "kforge/interp.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace kforge {

using std::numbers::pi;

void SimConfig::validate() const {
  require(phase_scale > 0, "sim: phase_scale must be positive");
  require(ellipse_long_axis.valid() && ellipse_short_axis.valid() && coil_intensity.valid() &&
              coil_sigma.valid() && target_snr.valid(),
          "sim: every range needs lo <= hi");
  require(ellipse_short_axis.lo > 0 && coil_sigma.lo > 0 && coil_intensity.lo > 0, "sim: ranges must be positive");
  require(bg_phase_grid >= 2, "sim: bg_phase_grid must be >= 2");
  require(n_coils >= 1, "sim: n_coils must be >= 1");
  require(coil_center_exclusion >= 0 && coil_center_exclusion < 1, "sim: coil_center_exclusion must be in [0, 1)");
  require(!add_noise || target_snr.lo > 0, "sim: target SNR must be positive");
}

ChannelPair draw_channel_pair(Rng &rng) {
  const int a = std::uniform_int_distribution<int>(0, 2)(rng);
  const int b = (a + 1 + std::uniform_int_distribution<int>(0, 1)(rng)) % 3;
  return {a, b};
}

ComplexImageSeries rgb_to_complex(const RGBVideo &video, ChannelPair pair, double phase_scale) {
  validate(video);
  require(pair.real != pair.imag && pair.real >= 0 && pair.real < 3 && pair.imag >= 0 && pair.imag < 3,
          "rgb_to_complex: channels must be two distinct indices in [0, 3)");
  const std::size_t T = video.n_frames(), H = video.height(), W = video.width();
  ComplexImageSeries out(T, H, W);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t x = 0; x < W; ++x) {
        const cplx z0(video.frames(t, y, x, pair.real), video.frames(t, y, x, pair.imag));
        out(t, y, x) = std::polar(std::abs(z0), phase_scale * std::arg(z0));
      }
  return out;
}

ComplexImageSeries rgb_to_complex(const RGBVideo &video, Rng &rng, double phase_scale) {
  return rgb_to_complex(video, draw_channel_pair(rng), phase_scale);
}

EllipseParams draw_ellipse(const SimConfig &cfg, std::size_t width, Rng &rng) {
  EllipseParams e;
  e.rotation = std::uniform_real_distribution<double>(0.0, pi)(rng);
  e.long_axis = cfg.ellipse_long_axis.draw(rng) * double(width);
  e.short_axis = cfg.ellipse_short_axis.draw(rng) * double(width);
  return e;
}

RealImage elliptical_mask(std::size_t h, std::size_t w, const EllipseParams &e) {
  RealImage mask(h, w);
  const double cy = (double(h) - 1) / 2, cx = (double(w) - 1) / 2;
  const double a = e.long_axis / 2, b = e.short_axis / 2;
  const double c = std::cos(e.rotation), s = std::sin(e.rotation);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const double dy = double(y) - cy, dx = double(x) - cx;
      const double u = c * dx + s * dy;  // along the long axis
      const double v = -s * dx + c * dy; // along the short axis
      mask(y, x) = (u * u) / (a * a) + (v * v) / (b * b) <= 1.0 ? 1.0 : 0.0;
    }
  return mask;
}

ComplexImageSeries apply_elliptical_mask(const ComplexImageSeries &series, const EllipseParams &e) {
  require(!series.empty(), "apply_elliptical_mask: empty series");
  const std::size_t H = series.dim(1), W = series.dim(2);
  const RealImage mask = elliptical_mask(H, W, e);
  ComplexImageSeries out(series.shape());
  for (std::size_t t = 0; t < series.dim(0); ++t)
    for (std::size_t p = 0; p < H * W; ++p) out[t * H * W + p] = mask[p] > 0 ? series[t * H * W + p] : cplx{};
  return out;
}

ComplexImageSeries apply_elliptical_mask(const ComplexImageSeries &series, const SimConfig &cfg, Rng &rng) {
  return apply_elliptical_mask(series, draw_ellipse(cfg, series.dim(2), rng));
}

RealImage random_smooth_phase(std::size_t h, std::size_t w, std::size_t grid, Rng &rng) {
  RealImage coarse(grid, grid);
  std::uniform_real_distribution<double> u(-pi, pi);
  for (auto &v : coarse) v = u(rng);
  return resize_bicubic(coarse, h, w);
}

ComplexImageSeries add_background_phase(const ComplexImageSeries &series, const RealImage &phase) {
  const std::size_t H = series.dim(1), W = series.dim(2);
  require(phase.dim(0) == H && phase.dim(1) == W, "add_background_phase: phase map size mismatch");
  ComplexImageSeries out(series.shape());
  std::vector<cplx> rot(H * W);
  for (std::size_t p = 0; p < H * W; ++p) rot[p] = std::polar(1.0, phase[p]);
  for (std::size_t t = 0; t < series.dim(0); ++t)
    for (std::size_t p = 0; p < H * W; ++p) out[t * H * W + p] = series[t * H * W + p] * rot[p];
  return out;
}

ComplexImageSeries add_background_phase(const ComplexImageSeries &series, const SimConfig &cfg, Rng &rng) {
  require(series.dim(1) >= cfg.bg_phase_grid && series.dim(2) >= cfg.bg_phase_grid,
          "add_background_phase: image smaller than the phase grid");
  return add_background_phase(series, random_smooth_phase(series.dim(1), series.dim(2), cfg.bg_phase_grid, rng));
}

std::vector<CoilParams> draw_coil_params(const SimConfig &cfg, std::size_t h, std::size_t w, Rng &rng) {
  require(h >= 10 && w >= 10, "generate_coil_maps: image must be at least 10x10");
  const double cy = (double(h) - 1) / 2, cx = (double(w) - 1) / 2;
  const double half_y = cfg.coil_center_exclusion * double(h) / 2;
  const double half_x = cfg.coil_center_exclusion * double(w) / 2;
  std::uniform_real_distribution<double> uy(0.0, double(h) - 1), ux(0.0, double(w) - 1);
  std::uniform_real_distribution<double> uphase(-pi, pi);

  std::vector<CoilParams> coils(cfg.n_coils);
  for (auto &c : coils) {
    c.peak = cfg.coil_intensity.draw(rng);
    c.sigma_y = cfg.coil_sigma.draw(rng) * double(h);
    c.sigma_x = cfg.coil_sigma.draw(rng) * double(w);
    do {
      c.center_y = uy(rng);
      c.center_x = ux(rng);
    } while (std::abs(c.center_y - cy) < half_y && std::abs(c.center_x - cx) < half_x);
    c.offset_phase = uphase(rng);
    c.smooth_phase = random_smooth_phase(h, w, cfg.bg_phase_grid, rng);
  }
  return coils;
}

CoilMapSet render_coil_maps(const std::vector<CoilParams> &params, std::size_t h, std::size_t w) {
  require(!params.empty(), "render_coil_maps: no coils");
  CoilMapSet set{Tensor<cplx, 3>(params.size(), h, w)};
  std::vector<double> ss(h * w, 0.0);
  for (std::size_t c = 0; c < params.size(); ++c) {
    const auto &p = params[c];
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        const double dy = (double(y) - p.center_y) / p.sigma_y;
        const double dx = (double(x) - p.center_x) / p.sigma_x;
        const double mag = p.peak * std::exp(-0.5 * (dy * dy + dx * dx));
        const cplx v = std::polar(mag, p.offset_phase + p.smooth_phase(y, x));
        set.maps(c, y, x) = v;
        ss[y * w + x] += std::norm(v);
      }
  }
  for (std::size_t c = 0; c < params.size(); ++c)
    for (std::size_t q = 0; q < h * w; ++q) {
      if (ss[q] <= 0) throw NumericalError("render_coil_maps: zero coil sum of squares");
      set.maps[c * h * w + q] /= std::sqrt(ss[q]);
    }
  return set;
}

CoilMapSet generate_coil_maps(const SimConfig &cfg, std::size_t h, std::size_t w, Rng &rng) {
  return render_coil_maps(draw_coil_params(cfg, h, w, rng), h, w);
}

MultiCoilImageSeries apply_coil_maps(const ComplexImageSeries &series, const CoilMapSet &coils) {
  const std::size_t T = series.dim(0), H = series.dim(1), W = series.dim(2), C = coils.n_coils();
  require(coils.height() == H && coils.width() == W,
          "apply_coil_maps: coil maps " + shape_string(coils.maps) + " do not match series " + shape_string(series));
  MultiCoilImageSeries out(T, C, H, W);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t q = 0; q < H * W; ++q)
        out[(t * C + c) * H * W + q] = coils.maps[c * H * W + q] * series[t * H * W + q];
  return out;
}

NoiseDraw add_noise(const MultiCoilImageSeries &mc, const SimConfig &cfg, Rng &rng) {
  require(!mc.empty(), "add_noise: empty input");
  if (!cfg.add_noise) return {mc, std::numeric_limits<double>::infinity(), 0.0};

  double sum = 0;
  std::size_t n = 0;
  for (const auto &v : mc)
    if (v != cplx{}) {
      sum += std::abs(v);
      ++n;
    }
  if (n == 0) throw NumericalError("add_noise: all-zero signal, noise level undefined");

  NoiseDraw out;
  out.target_snr = cfg.target_snr.draw(rng);
  out.sigma = (sum / double(n)) / out.target_snr;
  out.data = mc;
  if (cfg.noise_model == NoiseModel::gaussian) {
    std::normal_distribution<double> g(0.0, out.sigma);
    for (auto &v : out.data) {
      const double re = g(rng);
      const double im = g(rng);
      v += cplx(re, im);
    }
  } else {
    const double half = std::sqrt(3.0) * out.sigma;
    std::uniform_real_distribution<double> u(-half, half);
    for (auto &v : out.data) {
      const double re = u(rng);
      const double im = u(rng);
      v += cplx(re, im);
    }
  }
  return out;
}

MultiCoilKSpace fft2_forward(const MultiCoilImageSeries &mc) {
  const std::size_t H = mc.dim(2), W = mc.dim(3);
  MultiCoilKSpace ksp{MultiCoilImageSeries(mc.shape())};
  for (std::size_t i = 0; i < mc.dim(0) * mc.dim(1); ++i)
    centered_fft2(mc.flat().subspan(i * H * W, H * W), ksp.data.flat().subspan(i * H * W, H * W), H, W);
  return ksp;
}

MultiCoilImageSeries ifft2_inverse(const MultiCoilKSpace &ksp) {
  const std::size_t H = ksp.height(), W = ksp.width();
  MultiCoilImageSeries mc(ksp.data.shape());
  for (std::size_t i = 0; i < ksp.frames() * ksp.coils(); ++i)
    centered_ifft2(ksp.data.flat().subspan(i * H * W, H * W), mc.flat().subspan(i * H * W, H * W), H, W);
  return mc;
}

Simulation simulate(const RGBVideo &video, const SimConfig &cfg, Rng &rng) {
  cfg.validate();
  Simulation sim;
  sim.channels = draw_channel_pair(rng);
  ComplexImageSeries obj = rgb_to_complex(video, sim.channels, cfg.phase_scale);
  sim.ellipse = draw_ellipse(cfg, obj.dim(2), rng);
  obj = apply_elliptical_mask(obj, sim.ellipse);
  sim.object = add_background_phase(obj, cfg, rng);
  sim.coils = generate_coil_maps(cfg, obj.dim(1), obj.dim(2), rng);
  NoiseDraw noisy = add_noise(apply_coil_maps(sim.object, sim.coils), cfg, rng);
  sim.target_snr = noisy.target_snr;
  sim.noise_sigma = noisy.sigma;
  sim.kspace = fft2_forward(noisy.data);
  return sim;
}

std::uint64_t derive_seed(std::uint64_t base, const std::string &video_id) {
  // FNV-1a over the id, mixed with the base seed through splitmix64.
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : video_id) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::uint64_t z = base ^ h;
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

} // namespace kforge
