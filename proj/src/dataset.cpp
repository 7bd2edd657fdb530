#include "kforge/dataset.hpp"

#include "kforge/coils.hpp"
#include "kforge/error.hpp"
#include "kforge/recon.hpp"

#include <algorithm>
#include <cmath>

namespace kforge {

const char *arch_name(Arch a) {
  switch (a) {
  case Arch::varnet: return "varnet";
  case Arch::unet3d: return "unet3d";
  case Arch::fastdvdnet: return "fastdvdnet";
  }
  return "?";
}

Arch parse_arch(const std::string &s) {
  if (s == "varnet") return Arch::varnet;
  if (s == "unet3d") return Arch::unet3d;
  if (s == "fastdvdnet") return Arch::fastdvdnet;
  throw ValidationError("unknown architecture '" + s + "' (expected varnet, unet3d or fastdvdnet)");
}

namespace {

MultiCoilKSpace frame_window(const MultiCoilKSpace &k, std::size_t start, std::size_t len) {
  MultiCoilKSpace out{Tensor<cplx, 4>(len, k.coils(), k.height(), k.width())};
  const std::size_t slab = k.data.stride0();
  std::copy_n(k.data.data() + start * slab, len * slab, out.data.data());
  return out;
}

template <typename T, std::size_t R>
nlohmann::json shape_json(const Tensor<T, R> &t) {
  nlohmann::json s = nlohmann::json::array();
  for (std::size_t i = 0; i < R; ++i) s.push_back(t.dim(i));
  return s;
}

struct Builder {
  KfrgFile file;
  nlohmann::json names = nlohmann::json::array();

  template <typename T, std::size_t R>
  void add(const std::string &name, const Tensor<T, R> &t) {
    file.arrays.push_back(to_kfrg_array(t));
    names.push_back({{"name", name}, {"shape", shape_json(t)}, {"real", !std::is_same_v<T, cplx>}});
  }
};

MagnitudeImageSeries abs_series(const ComplexImageSeries &x) {
  MagnitudeImageSeries m(x.dim(0), x.dim(1), x.dim(2));
  for (std::size_t i = 0; i < x.size(); ++i) m[i] = std::abs(x[i]);
  return m;
}

} // namespace

std::vector<DatasetRecord> build_records(const VideoKSpace &video, const PipelineConfig &cfg, Arch arch) {
  const std::size_t T = video.kspace.frames(), H = video.kspace.height(), W = video.kspace.width();
  const std::size_t win = arch == Arch::varnet ? cfg.varnet_window
                          : arch == Arch::unet3d ? cfg.unet3d_window
                                                 : cfg.fastdvdnet_window;
  if (T < win)
    throw ValidationError("build_record: video '" + video.video_id + "' has " + std::to_string(T) +
                          " frames, " + arch_name(arch) + " needs " + std::to_string(win));

  std::vector<DatasetRecord> out;
  auto base_meta = [&](std::size_t w, std::size_t f0, const std::string &traj) {
    nlohmann::json m;
    m["video_id"] = video.video_id;
    m["arch"] = arch_name(arch);
    m["window"] = w;
    m["frame_start"] = f0;
    m["frames"] = win;
    m["seed"] = cfg.seed;
    m["video_seed"] = video.video_seed;
    m["config_hash"] = config_hash(cfg);
    m["simulation"] = video.sim_metadata;
    m["trajectory"] = traj;
    m["coils"] = video.kspace.coils();
    m["height"] = H;
    m["width"] = W;
    return m;
  };

  if (arch == Arch::fastdvdnet) {
    // Spiral zero-filled RSS for the whole video, then 5-frame windows; target = latest frame.
    const auto op = EncodingOperator::noncartesian(spiral_trajectory(T, cfg.resolved_spiral()), H, W, std::nullopt, cfg.nufft);
    const auto zf = zero_filled_rss(op.sample(video.kspace), op);
    const auto truth = rss_combine(ifft2_inverse(video.kspace));
    const std::size_t P = H * W;
    for (std::size_t w = 0; (w + 1) * win <= T; ++w) {
      const std::size_t f0 = w * win;
      MagnitudeImageSeries in(win, H, W), tgt(std::size_t{1}, H, W);
      std::copy_n(zf.data() + f0 * P, win * P, in.data());
      std::copy_n(truth.data() + (f0 + win - 1) * P, P, tgt.data());
      Builder b;
      b.file.kind = RecordKind::magnitude_frames;
      b.add("input", in);
      b.add("target", tgt);
      b.file.metadata = base_meta(w, f0, "spiral-" + std::to_string(cfg.spiral.arms) + "arms");
      b.file.metadata["target_frame"] = f0 + win - 1;
      b.file.metadata["arrays"] = b.names;
      out.push_back({video.video_id, arch, w, f0, std::move(b.file)});
    }
    return out;
  }

  for (std::size_t w = 0; (w + 1) * win <= T; ++w) {
    const std::size_t f0 = w * win;
    const MultiCoilKSpace full = frame_window(video.kspace, f0, win);
    Builder b;
    if (arch == Arch::varnet) {
      Rng rng(derive_seed(video.video_seed, "varnet-mask-" + std::to_string(w)));
      const CartesianMask mask = cartesian_mask(win, H, cfg.cartesian, rng);
      const auto op0 = EncodingOperator::cartesian(mask, W);
      const Measurements y = op0.sample(full);
      const auto maps = estimate_sensitivities(y, op0).maps;
      const auto op = op0.with_maps(maps);
      const auto zf = zero_filled(y, op);
      const auto full_maps = estimate_sensitivities(full).maps;
      const auto target = abs_series(coil_combine(ifft2_inverse(full), full_maps));
      Tensor<cplx, 4> masked(win, full.coils(), H, W);
      for (std::size_t i = 0; i < masked.size(); ++i) masked[i] = y[i];
      RealImage m(win, H);
      for (std::size_t t = 0; t < win; ++t)
        for (std::size_t r = 0; r < H; ++r) m(t, r) = mask.sampled(t, r) ? 1.0 : 0.0;
      b.file.kind = RecordKind::cartesian;
      b.add("kspace", masked);
      b.add("mask", m);
      b.add("sensitivities", maps.maps);
      b.add("zero_filled", zf);
      b.add("target", target);
      b.file.metadata = base_meta(w, f0, "cartesian-" + std::to_string(cfg.cartesian.n_center + cfg.cartesian.n_random) + "lines");
    } else {
      const auto traj = radial_trajectory(win, cfg.radial_spokes, cfg.resolved_radial_samples(), cfg.radial_increment);
      const auto op = EncodingOperator::noncartesian(traj, H, W, std::nullopt, cfg.nufft);
      const auto input = zero_filled_coils(op.sample(full), op);
      const auto target = rss_combine(ifft2_inverse(full));
      b.file.kind = RecordKind::multicoil_gridded;
      b.add("input", input);
      b.add("target", target);
      b.file.metadata = base_meta(w, f0, "radial-" + std::to_string(cfg.radial_spokes) + "spokes");
    }
    b.file.metadata["arrays"] = b.names;
    out.push_back({video.video_id, arch, w, f0, std::move(b.file)});
  }
  return out;
}

SplitManifest make_split(std::vector<std::string> ids, const std::array<double, 3> &f, std::uint64_t seed) {
  if (ids.empty()) throw ValidationError("make_split: empty id list");
  for (double v : f)
    if (!(v >= 0)) throw ValidationError("make_split: fractions must be >= 0");
  if (std::abs(f[0] + f[1] + f[2] - 1.0) > 1e-9) throw ValidationError("make_split: fractions must sum to 1");
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) throw ValidationError("make_split: duplicate ids");
  Rng rng(seed);
  std::shuffle(ids.begin(), ids.end(), rng);
  const std::size_t n = ids.size();
  const std::size_t n_train = std::min<std::size_t>(n, std::size_t(std::llround(f[0] * double(n))));
  const std::size_t n_val = std::min<std::size_t>(n - n_train, std::size_t(std::llround(f[1] * double(n))));
  SplitManifest m;
  m.train.assign(ids.begin(), ids.begin() + long(n_train));
  m.val.assign(ids.begin() + long(n_train), ids.begin() + long(n_train + n_val));
  m.test.assign(ids.begin() + long(n_train + n_val), ids.end());
  return m;
}

nlohmann::json manifest_json(const SplitManifest &split, const std::vector<ManifestEntry> &records,
                             const PipelineConfig &cfg) {
  nlohmann::json j;
  j["format"] = "kfrg";
  j["format_version"] = kKfrgVersion;
  j["config_hash"] = config_hash(cfg);
  j["seed"] = cfg.seed;
  j["split"] = {{"train", split.train}, {"val", split.val}, {"test", split.test}};
  nlohmann::json recs = nlohmann::json::array();
  for (const auto &r : records)
    recs.push_back({{"path", r.path}, {"video_id", r.video_id}, {"split", r.split}, {"arch", r.arch}, {"window", r.window}});
  j["records"] = recs;
  return j;
}

} // namespace kforge
