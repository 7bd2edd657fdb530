#include "kforge/config.hpp"

#include "kforge/error.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

namespace kforge {

PipelineConfig::PipelineConfig() { spiral.matrix = 0; }

SpiralConfig PipelineConfig::resolved_spiral() const {
  SpiralConfig s = spiral;
  if (s.matrix == 0) s.matrix = width;
  return s;
}

std::size_t PipelineConfig::resolved_radial_samples() const { return radial_samples ? radial_samples : width; }

namespace {

std::string trim(const std::string &s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> words(const std::string &v) {
  std::istringstream is(v);
  std::vector<std::string> out;
  for (std::string w; is >> w;) out.push_back(w);
  return out;
}

double to_double(const std::string &key, const std::string &v) {
  double d = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), d);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size())
    throw ValidationError("config: " + key + ": expected a number, got '" + v + "'");
  return d;
}

std::uint64_t to_u64(const std::string &key, const std::string &v) {
  std::uint64_t d = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), d);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size())
    throw ValidationError("config: " + key + ": expected a non-negative integer, got '" + v + "'");
  return d;
}

bool to_bool(const std::string &key, const std::string &v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ValidationError("config: " + key + ": expected true/false, got '" + v + "'");
}

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Accessors are written once against a mutable config and reused by the getters.
PipelineConfig &mut(const PipelineConfig &c) { return const_cast<PipelineConfig &>(c); }

// One entry per key: setter from text and getter to canonical text.
struct Field {
  std::function<void(PipelineConfig &, const std::string &, const std::string &)> set;
  std::function<std::string(const PipelineConfig &)> get;
  bool path = false;
};

template <typename M>
Field size_field(M member) {
  return {[member](PipelineConfig &c, const std::string &k, const std::string &v) {
            std::invoke(member, c) = static_cast<std::size_t>(to_u64(k, v));
          },
          [member](const PipelineConfig &c) { return std::to_string(std::invoke(member, mut(c))); }};
}

template <typename M>
Field double_field(M member) {
  return {[member](PipelineConfig &c, const std::string &k, const std::string &v) { std::invoke(member, c) = to_double(k, v); },
          [member](const PipelineConfig &c) { return num(std::invoke(member, mut(c))); }};
}

template <typename M>
Field range_field(M member) {
  return {[member](PipelineConfig &c, const std::string &k, const std::string &v) {
            const auto w = words(v);
            if (w.size() != 2) throw ValidationError("config: " + k + ": expected 'lo hi'");
            std::invoke(member, c) = Range{to_double(k, w[0]), to_double(k, w[1])};
          },
          [member](const PipelineConfig &c) {
            const Range &r = std::invoke(member, mut(c));
            return num(r.lo) + " " + num(r.hi);
          }};
}

template <typename M>
Field roi_field(M member) {
  return {[member](PipelineConfig &c, const std::string &k, const std::string &v) {
            if (v == "auto") {
              std::invoke(member, c).reset();
              return;
            }
            const auto w = words(v);
            if (w.size() != 4) throw ValidationError("config: " + k + ": expected 'y0 x0 h w' or 'auto'");
            std::invoke(member, c) = Roi{std::size_t(to_u64(k, w[0])), std::size_t(to_u64(k, w[1])),
                                         std::size_t(to_u64(k, w[2])), std::size_t(to_u64(k, w[3]))};
          },
          [member](const PipelineConfig &c) -> std::string {
            const auto &r = std::invoke(member, mut(c));
            if (!r) return "auto";
            return std::to_string(r->y0) + " " + std::to_string(r->x0) + " " + std::to_string(r->h) + " " +
                   std::to_string(r->w);
          }};
}

const std::map<std::string, Field> &fields() {
  using C = PipelineConfig;
  static const std::map<std::string, Field> f = [] {
    std::map<std::string, Field> m;
    m["video_dir"] = {[](C &c, const std::string &, const std::string &v) { c.video_dir = v; },
                      [](const C &c) { return c.video_dir.string(); }, true};
    m["out_dir"] = {[](C &c, const std::string &, const std::string &v) { c.out_dir = v; },
                    [](const C &c) { return c.out_dir.string(); }, true};
    m["frames"] = size_field(&C::frames);
    m["height"] = size_field(&C::height);
    m["width"] = size_field(&C::width);
    m["seed"] = {[](C &c, const std::string &k, const std::string &v) { c.seed = to_u64(k, v); },
                 [](const C &c) { return std::to_string(c.seed); }};

    m["sim.phase_scale"] = double_field([](C &c) -> double & { return c.sim.phase_scale; });
    m["sim.ellipse_long_axis"] = range_field([](C &c) -> Range & { return c.sim.ellipse_long_axis; });
    m["sim.ellipse_short_axis"] = range_field([](C &c) -> Range & { return c.sim.ellipse_short_axis; });
    m["sim.bg_phase_grid"] = size_field([](C &c) -> std::size_t & { return c.sim.bg_phase_grid; });
    m["sim.n_coils"] = size_field([](C &c) -> std::size_t & { return c.sim.n_coils; });
    m["sim.coil_intensity"] = range_field([](C &c) -> Range & { return c.sim.coil_intensity; });
    m["sim.coil_sigma"] = range_field([](C &c) -> Range & { return c.sim.coil_sigma; });
    m["sim.coil_center_exclusion"] = double_field([](C &c) -> double & { return c.sim.coil_center_exclusion; });
    m["sim.target_snr"] = range_field([](C &c) -> Range & { return c.sim.target_snr; });
    m["sim.noise_model"] = {[](C &c, const std::string &k, const std::string &v) {
                              if (v == "gaussian")
                                c.sim.noise_model = NoiseModel::gaussian;
                              else if (v == "uniform")
                                c.sim.noise_model = NoiseModel::uniform;
                              else
                                throw ValidationError("config: " + k + ": expected gaussian or uniform");
                            },
                            [](const C &c) {
                              return std::string(c.sim.noise_model == NoiseModel::gaussian ? "gaussian" : "uniform");
                            }};
    m["sim.add_noise"] = {[](C &c, const std::string &k, const std::string &v) { c.sim.add_noise = to_bool(k, v); },
                          [](const C &c) { return std::string(c.sim.add_noise ? "true" : "false"); }};

    m["coils.virtual"] = size_field(&C::virtual_coils);
    m["coils.svd_points"] = size_field(&C::compression_points);

    m["cartesian.n_center"] = size_field([](C &c) -> std::size_t & { return c.cartesian.n_center; });
    m["cartesian.n_random"] = size_field([](C &c) -> std::size_t & { return c.cartesian.n_random; });
    m["cartesian.band_fraction"] = double_field([](C &c) -> double & { return c.cartesian.band_fraction; });
    m["cartesian.no_repeat_window"] = size_field([](C &c) -> std::size_t & { return c.cartesian.no_repeat_window; });

    m["radial.spokes"] = size_field(&C::radial_spokes);
    m["radial.increment_deg"] = double_field(&C::radial_increment);
    m["radial.samples"] = size_field(&C::radial_samples);

    m["spiral.arms"] = size_field([](C &c) -> std::size_t & { return c.spiral.arms; });
    m["spiral.r_inner"] = double_field([](C &c) -> double & { return c.spiral.r_inner; });
    m["spiral.r_outer"] = double_field([](C &c) -> double & { return c.spiral.r_outer; });
    m["spiral.accel_inner"] = double_field([](C &c) -> double & { return c.spiral.accel_inner; });
    m["spiral.accel_outer"] = double_field([](C &c) -> double & { return c.spiral.accel_outer; });
    m["spiral.samples_per_arm"] = size_field([](C &c) -> std::size_t & { return c.spiral.samples_per_arm; });
    m["spiral.frame_period"] = size_field([](C &c) -> std::size_t & { return c.spiral.frame_period; });
    m["spiral.matrix"] = size_field([](C &c) -> std::size_t & { return c.spiral.matrix; });

    m["recon.frames"] = size_field(&C::recon_frames);
    m["export.varnet_window"] = size_field(&C::varnet_window);
    m["export.unet3d_window"] = size_field(&C::unet3d_window);
    m["export.fastdvdnet_window"] = size_field(&C::fastdvdnet_window);
    m["split"] = {[](C &c, const std::string &k, const std::string &v) {
                    const auto w = words(v);
                    if (w.size() != 3) throw ValidationError("config: " + k + ": expected 'train val test'");
                    for (int i = 0; i < 3; ++i) c.split[std::size_t(i)] = to_double(k, w[std::size_t(i)]);
                  },
                  [](const C &c) { return num(c.split[0]) + " " + num(c.split[1]) + " " + num(c.split[2]); }};

    m["cs.lambda"] = double_field([](C &c) -> double & { return c.cs.lambda; });
    m["cs.iterations"] = size_field([](C &c) -> std::size_t & { return c.cs.iterations; });
    m["cs.rho_data"] = double_field([](C &c) -> double & { return c.cs.rho_data; });
    m["cs.rho_tv"] = double_field([](C &c) -> double & { return c.cs.rho_tv; });
    m["cs.cg_iterations"] = size_field([](C &c) -> std::size_t & { return c.cs.cg_iterations; });
    m["cs.cg_tolerance"] = double_field([](C &c) -> double & { return c.cs.cg_tolerance; });
    m["cs.tolerance"] = double_field([](C &c) -> double & { return c.cs.tolerance; });

    m["nufft.oversampling"] = double_field([](C &c) -> double & { return c.nufft.oversampling; });
    m["nufft.kernel_width"] = size_field([](C &c) -> std::size_t & { return c.nufft.kernel_width; });

    m["metrics.signal_roi"] = roi_field([](C &c) -> std::optional<Roi> & { return c.metrics.signal_roi; });
    m["metrics.noise_roi"] = roi_field([](C &c) -> std::optional<Roi> & { return c.metrics.noise_roi; });
    m["metrics.profile"] = {[](C &c, const std::string &k, const std::string &v) {
                              if (v == "auto") {
                                c.metrics.profile.reset();
                                return;
                              }
                              const auto w = words(v);
                              if (w.size() != 5) throw ValidationError("config: " + k + ": expected 'y0 x0 y1 x1 samples' or 'auto'");
                              c.metrics.profile = ProfileSpec{to_double(k, w[0]), to_double(k, w[1]), to_double(k, w[2]),
                                                              to_double(k, w[3]), std::size_t(to_u64(k, w[4]))};
                            },
                            [](const C &c) -> std::string {
                              if (!c.metrics.profile) return "auto";
                              const auto &p = *c.metrics.profile;
                              return num(p.y0) + " " + num(p.x0) + " " + num(p.y1) + " " + num(p.x1) + " " +
                                     std::to_string(p.samples);
                            }};
    return m;
  }();
  return f;
}

} // namespace

void set_config_value(PipelineConfig &cfg, const std::string &key, const std::string &value) {
  const auto it = fields().find(key);
  if (it == fields().end()) throw ValidationError("config: unknown key '" + key + "'");
  it->second.set(cfg, key, value);
}

PipelineConfig parse_pipeline_config(const std::string &text, const std::string &origin, PipelineConfig cfg) {
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ValidationError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
    try {
      set_config_value(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ValidationError &e) {
      throw ValidationError(origin + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return cfg;
}

PipelineConfig load_pipeline_config(const std::filesystem::path &path, PipelineConfig base) {
  std::ifstream is(path);
  if (!is) throw MissingInputError("config: cannot open " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_pipeline_config(ss.str(), path.string(), std::move(base));
}

std::string canonical_config(const PipelineConfig &cfg) {
  std::string out;
  for (const auto &[k, f] : fields()) {
    if (f.path) continue;
    out += k + " = " + f.get(cfg) + "\n";
  }
  return out;
}

std::string config_hash(const PipelineConfig &cfg) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : canonical_config(cfg)) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void PipelineConfig::validate() const {
  auto fail = [](const std::string &key, const std::string &why) { throw ValidationError("config: " + key + ": " + why); };
  if (frames < 1) fail("frames", "must be >= 1");
  if (height < 32 || width < 32) fail("height/width", "must be >= 32");
  sim.validate();
  if (virtual_coils < 1 || virtual_coils > sim.n_coils) fail("coils.virtual", "must be in [1, sim.n_coils]");
  if (compression_points < sim.n_coils) fail("coils.svd_points", "must be >= sim.n_coils");
  if (cartesian.n_center + cartesian.n_random > height) fail("cartesian", "more lines than the image has");
  if (!(cartesian.band_fraction > 0 && cartesian.band_fraction <= 1)) fail("cartesian.band_fraction", "must be in (0, 1]");
  if (height < minimum_lines(cartesian))
    fail("cartesian.no_repeat_window", "needs at least " + std::to_string(minimum_lines(cartesian)) +
                                           " phase-encode lines, image has " + std::to_string(height));
  if (radial_spokes < 1) fail("radial.spokes", "must be >= 1");
  if (resolved_radial_samples() < 2) fail("radial.samples", "must be >= 2");
  if (!(spiral.r_inner >= 0 && spiral.r_inner < spiral.r_outer && spiral.r_outer <= 1))
    fail("spiral.r_inner/r_outer", "must satisfy 0 <= r_inner < r_outer <= 1");
  if (spiral.arms < 1 || spiral.samples_per_arm < 2 || spiral.frame_period < 1) fail("spiral", "invalid counts");
  if (recon_frames < 2) fail("recon.frames", "must be >= 2");
  if (recon_frames > frames) fail("recon.frames", "exceeds frames");
  if (varnet_window < 1 || unet3d_window < 1 || fastdvdnet_window < 1) fail("export.*_window", "must be >= 1");
  double s = 0;
  for (double f : split) {
    if (!(f >= 0)) fail("split", "fractions must be >= 0");
    s += f;
  }
  if (std::abs(s - 1.0) > 1e-9) fail("split", "fractions must sum to 1");
  cs.validate();
  if (!(nufft.oversampling >= 1.25)) fail("nufft.oversampling", "must be >= 1.25");
  if (nufft.kernel_width < 2 || nufft.kernel_width > 16) fail("nufft.kernel_width", "must be in [2, 16]");
}

} // namespace kforge
