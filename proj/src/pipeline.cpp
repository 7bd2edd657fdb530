#include "kforge/pipeline.hpp"

#include "kforge/coils.hpp"
#include "kforge/error.hpp"
#include "kforge/image_io.hpp"
#include "kforge/video.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <thread>

namespace fs = std::filesystem;

namespace kforge {

const char *sampling_name(Sampling s) {
  switch (s) {
  case Sampling::cartesian: return "cartesian";
  case Sampling::radial: return "radial";
  case Sampling::spiral: return "spiral";
  }
  return "?";
}

Sampling parse_sampling(const std::string &s) {
  if (s == "cartesian") return Sampling::cartesian;
  if (s == "radial") return Sampling::radial;
  if (s == "spiral") return Sampling::spiral;
  throw ValidationError("unknown sampling '" + s + "' (expected cartesian, radial or spiral)");
}

const char *method_name(ReconMethod m) { return m == ReconMethod::zf ? "zf" : "cs"; }

ReconMethod parse_method(const std::string &s) {
  if (s == "zf") return ReconMethod::zf;
  if (s == "cs") return ReconMethod::cs;
  throw ValidationError("unknown method '" + s + "' (expected zf or cs)");
}

void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)> &fn) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t nt = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(n, 1));
  if (nt == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < nt; ++t) pool.emplace_back(worker);
    for (auto &t : pool) t.join();
  }
  for (auto &e : errors)
    if (e) std::rethrow_exception(e);
}

namespace {

bool is_frame_file(const fs::path &p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return char(std::tolower(c)); });
  return ext == ".png" || ext == ".ppm" || ext == ".pnm" || ext == ".pgm";
}

template <typename F>
auto with_context(const std::string &ctx, F &&f) -> decltype(f()) {
  try {
    return f();
  } catch (const ValidationError &e) {
    throw ValidationError(ctx + ": " + e.what());
  } catch (const MissingInputError &e) {
    throw MissingInputError(ctx + ": " + e.what());
  } catch (const NumericalError &e) {
    throw NumericalError(ctx + ": " + e.what());
  }
}

std::vector<fs::path> kfrg_files(const fs::path &dir) {
  if (!fs::is_directory(dir)) throw MissingInputError("input directory not found: " + dir.string());
  std::vector<fs::path> out;
  for (const auto &e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".kfrg") out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

void write_text(const fs::path &path, const std::string &text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw MissingInputError("cannot write " + path.string());
  os << text;
}

MagnitudeImageSeries abs_series(const ComplexImageSeries &x) {
  MagnitudeImageSeries m(x.dim(0), x.dim(1), x.dim(2));
  for (std::size_t i = 0; i < x.size(); ++i) m[i] = std::abs(x[i]);
  return m;
}

MultiCoilKSpace first_frames(const MultiCoilKSpace &k, std::size_t n) {
  if (k.frames() == n) return k;
  MultiCoilKSpace out{Tensor<cplx, 4>(n, k.coils(), k.height(), k.width())};
  std::copy_n(k.data.data(), n * k.data.stride0(), out.data.data());
  return out;
}

} // namespace

std::vector<VideoSource> discover_videos(const fs::path &video_dir) {
  if (!fs::is_directory(video_dir)) throw MissingInputError("video directory not found: " + video_dir.string());
  std::vector<VideoSource> out;
  bool has_frames = false;
  for (const auto &e : fs::directory_iterator(video_dir)) {
    if (e.is_directory())
      out.push_back({e.path().filename().string(), e.path()});
    else if (e.is_regular_file() && is_frame_file(e.path()))
      has_frames = true;
  }
  std::sort(out.begin(), out.end(), [](const auto &a, const auto &b) { return a.id < b.id; });
  if (out.empty() && has_frames) out.push_back({fs::absolute(video_dir).lexically_normal().filename().string(), video_dir});
  if (out.empty()) throw MissingInputError("no videos (frame directories) under " + video_dir.string());
  return out;
}

SimulatedVideo simulate_video(const VideoSource &src, const PipelineConfig &cfg) {
  return with_context("video '" + src.id + "'", [&] {
    RGBVideo v = load_frame_sequence(src.dir, cfg.frames);
    if (v.height() != cfg.height || v.width() != cfg.width) v = downsample_bilinear(v, cfg.height, cfg.width);
    v.source_id = src.id;
    SimulatedVideo out;
    out.id = src.id;
    out.seed = derive_seed(cfg.seed, src.id);
    Rng rng(out.seed);
    out.sim = simulate(v, cfg.sim, rng);
    return out;
  });
}

KfrgFile kspace_file(const SimulatedVideo &v, const PipelineConfig &cfg) {
  KfrgFile f;
  f.kind = RecordKind::fully_sampled_kspace;
  f.arrays.push_back(to_kfrg_array(v.sim.kspace.data));
  nlohmann::json m;
  m["video_id"] = v.id;
  m["seed"] = cfg.seed;
  m["video_seed"] = v.seed;
  m["config_hash"] = config_hash(cfg);
  m["target_snr"] = std::isfinite(v.sim.target_snr) ? nlohmann::json(v.sim.target_snr) : nlohmann::json("inf");
  m["noise_sigma"] = v.sim.noise_sigma;
  m["channels"] = {v.sim.channels.real, v.sim.channels.imag};
  m["ellipse"] = {{"rotation", v.sim.ellipse.rotation},
                  {"long_axis", v.sim.ellipse.long_axis},
                  {"short_axis", v.sim.ellipse.short_axis}};
  m["arrays"] = nlohmann::json::array({{{"name", "kspace"},
                                        {"shape", {v.sim.kspace.frames(), v.sim.kspace.coils(), v.sim.kspace.height(),
                                                   v.sim.kspace.width()}},
                                        {"real", false}}});
  f.metadata = m;
  return f;
}

VideoKSpace compress_video(const std::string &id, std::uint64_t seed, const MultiCoilKSpace &full,
                           nlohmann::json sim_metadata, const PipelineConfig &cfg) {
  VideoKSpace v;
  v.video_id = id;
  v.video_seed = seed;
  auto cc = svd_coil_compress(full, std::min(cfg.virtual_coils, full.coils()), cfg.compression_points,
                              derive_seed(seed, "coil-compression"));
  v.kspace = std::move(cc.kspace);
  sim_metadata["retained_energy"] = cc.compression.retained_energy;
  v.sim_metadata = std::move(sim_metadata);
  return v;
}

VideoKSpace load_video_kspace(const fs::path &path, const PipelineConfig &cfg) {
  const KfrgFile f = read_kfrg(path);
  if (f.kind != RecordKind::fully_sampled_kspace || f.arrays.size() != 1)
    throw ValidationError(path.string() + ": not a fully-sampled k-space record");
  const auto &m = f.metadata;
  const std::string id = m.value("video_id", path.stem().string());
  const std::uint64_t seed = m.value("video_seed", std::uint64_t{0});
  nlohmann::json sim = m;
  sim.erase("arrays");
  return compress_video(id, seed, MultiCoilKSpace{complex_tensor(f.arrays[0])}, sim, cfg);
}

CartesianMask pipeline_mask(const PipelineConfig &cfg, std::size_t frames) {
  Rng rng(derive_seed(cfg.seed, "cartesian-mask"));
  return cartesian_mask(frames, cfg.height, cfg.cartesian, rng);
}

Trajectory pipeline_trajectory(Sampling s, const PipelineConfig &cfg, std::size_t frames) {
  switch (s) {
  case Sampling::radial:
    return radial_trajectory(frames, cfg.radial_spokes, cfg.resolved_radial_samples(), cfg.radial_increment);
  case Sampling::spiral:
    return spiral_trajectory(frames, cfg.resolved_spiral());
  case Sampling::cartesian:
    return trajectory_from_mask(pipeline_mask(cfg, frames), cfg.width);
  }
  throw ValidationError("unknown sampling");
}

EncodingOperator sampling_operator(Sampling s, const PipelineConfig &cfg, std::size_t frames) {
  if (s == Sampling::cartesian) return EncodingOperator::cartesian(pipeline_mask(cfg, frames), cfg.width);
  return EncodingOperator::noncartesian(pipeline_trajectory(s, cfg, frames), cfg.height, cfg.width, std::nullopt,
                                        cfg.nufft);
}

ReconCase reconstruct(const MultiCoilKSpace &full, const EncodingOperator &op, ReconMethod method,
                      const PipelineConfig &cfg) {
  ReconCase rc;
  const Measurements y = op.sample(full);
  const auto est = estimate_sensitivities(y, op);
  if (est.degenerate) throw NumericalError("reconstruct: no signal in the undersampled data");
  const auto opm = op.with_maps(est.maps);
  if (method == ReconMethod::zf) {
    rc.recon = abs_series(zero_filled(y, opm));
  } else {
    auto cs = cs_temporal_tv(y, opm, cfg.cs);
    rc.recon = std::move(cs.magnitude);
    rc.objective = std::move(cs.objective);
  }
  const auto full_maps = estimate_sensitivities(full).maps;
  rc.truth = abs_series(coil_combine(ifft2_inverse(full), full_maps));
  return rc;
}

KfrgFile image_file(const MagnitudeImageSeries &img, nlohmann::json metadata) {
  KfrgFile f;
  f.kind = RecordKind::image;
  f.arrays.push_back(to_kfrg_array(img));
  metadata["arrays"] = nlohmann::json::array(
      {{{"name", "image"}, {"shape", {img.dim(0), img.dim(1), img.dim(2)}}, {"real", true}}});
  f.metadata = std::move(metadata);
  return f;
}

MagnitudeImageSeries read_image_file(const fs::path &path) {
  const KfrgFile f = read_kfrg(path);
  if (f.kind != RecordKind::image || f.arrays.size() != 1)
    throw ValidationError(path.string() + ": not an image record");
  return real_tensor3(f.arrays[0]);
}

void write_figures(const MagnitudeImageSeries &img, double peak, const fs::path &stem) {
  const std::size_t T = img.dim(0), H = img.dim(1), W = img.dim(2);
  const double s = peak > 0 ? 1.0 / peak : 1.0;
  RealImage frame(H, W), yt(H, T);
  for (std::size_t y = 0; y < H; ++y)
    for (std::size_t x = 0; x < W; ++x) frame(y, x) = std::clamp(img(0, y, x) * s, 0.0, 1.0);
  for (std::size_t y = 0; y < H; ++y)
    for (std::size_t t = 0; t < T; ++t) yt(y, t) = std::clamp(img(t, y, W / 2) * s, 0.0, 1.0);
  fs::create_directories(stem.parent_path());
  write_png_gray(stem.string() + "_frame000.png", frame);
  write_png_gray(stem.string() + "_yt.png", yt);
}

std::vector<fs::path> run_simulate(const PipelineConfig &cfg, const RunOptions &opts) {
  cfg.validate();
  const auto videos = discover_videos(cfg.video_dir);
  const fs::path dir = cfg.out_dir / "kspace";
  fs::create_directories(dir);
  std::vector<fs::path> paths(videos.size());
  parallel_for(videos.size(), opts.jobs, [&](std::size_t i) {
    const auto sim = simulate_video(videos[i], cfg);
    paths[i] = dir / (videos[i].id + ".kfrg");
    write_kfrg(paths[i], kspace_file(sim, cfg));
  });
  nlohmann::json man;
  man["config_hash"] = config_hash(cfg);
  man["seed"] = cfg.seed;
  man["records"] = nlohmann::json::array();
  for (std::size_t i = 0; i < videos.size(); ++i)
    man["records"].push_back({{"path", paths[i].filename().string()}, {"video_id", videos[i].id}});
  write_text(dir / "manifest.json", man.dump(2) + "\n");
  write_text(cfg.out_dir / "pipeline.cfg", canonical_config(cfg));
  return paths;
}

void run_traj(const PipelineConfig &cfg) {
  cfg.validate();
  const fs::path dir = cfg.out_dir / "traj";
  fs::create_directories(dir);
  const std::size_t T = cfg.recon_frames;
  write_mask(dir / "cartesian.kmsk", pipeline_mask(cfg, T));
  write_trajectory(dir / "radial.ktrj", pipeline_trajectory(Sampling::radial, cfg, T));
  write_trajectory(dir / "spiral.ktrj", pipeline_trajectory(Sampling::spiral, cfg, T));
}

std::vector<QualityReport> run_recon(const PipelineConfig &cfg, ReconMethod method, Sampling sampling,
                                     const RunOptions &opts, std::optional<fs::path> input) {
  cfg.validate();
  std::vector<fs::path> files;
  const fs::path in = input ? *input : cfg.out_dir / "kspace";
  if (fs::is_regular_file(in))
    files.push_back(in);
  else if (!fs::exists(in))
    throw MissingInputError("simulated k-space not found: " + in.string());
  else
    files = kfrg_files(in);
  if (files.empty()) throw MissingInputError("no .kfrg files in " + in.string());

  const fs::path base = cfg.out_dir / "recon" / sampling_name(sampling);
  const fs::path out_dir = base / method_name(method), truth_dir = base / "truth";
  fs::create_directories(out_dir);
  fs::create_directories(truth_dir);
  const EncodingOperator op = sampling_operator(sampling, cfg, cfg.recon_frames);

  std::vector<QualityReport> reports(files.size());
  parallel_for(files.size(), opts.jobs, [&](std::size_t i) {
    const std::string ctx = files[i].filename().string();
    with_context(ctx, [&] {
      const VideoKSpace v = load_video_kspace(files[i], cfg);
      if (v.kspace.frames() < cfg.recon_frames)
        throw ValidationError("video has " + std::to_string(v.kspace.frames()) + " frames, recon.frames is " +
                              std::to_string(cfg.recon_frames));
      if (v.kspace.height() != cfg.height || v.kspace.width() != cfg.width)
        throw ValidationError("k-space size does not match config height/width");
      const ReconCase rc = reconstruct(first_frames(v.kspace, cfg.recon_frames), op, method, cfg);
      nlohmann::json meta;
      meta["video_id"] = v.video_id;
      meta["method"] = method_name(method);
      meta["sampling"] = sampling_name(sampling);
      meta["config_hash"] = config_hash(cfg);
      if (!rc.objective.empty()) meta["objective"] = rc.objective;
      write_kfrg(out_dir / (v.video_id + ".kfrg"), image_file(rc.recon, meta));
      nlohmann::json tmeta{{"video_id", v.video_id}, {"sampling", sampling_name(sampling)}, {"config_hash", config_hash(cfg)},
                           {"method", "truth"}};
      write_kfrg(truth_dir / (v.video_id + ".kfrg"), image_file(rc.truth, tmeta));
      reports[i] = evaluate_quality(rc.recon, rc.truth, cfg.metrics, v.video_id, method_name(method));
      if (opts.emit_figures) {
        const double peak = *std::max_element(rc.truth.begin(), rc.truth.end());
        const fs::path fig = cfg.out_dir / "figures" / sampling_name(sampling);
        write_figures(rc.recon, peak, fig / method_name(method) / v.video_id);
        write_figures(rc.truth, peak, fig / "truth" / v.video_id);
      }
      return 0;
    });
  });
  std::ofstream csv(out_dir / "metrics.csv", std::ios::trunc);
  write_quality_csv(csv, reports);
  return reports;
}

EvaluationSummary run_evaluate(const fs::path &pred_dir, const fs::path &truth_dir, const PipelineConfig &cfg,
                               const fs::path &out_dir) {
  if (!fs::is_directory(pred_dir)) throw MissingInputError("prediction directory not found: " + pred_dir.string());
  const auto truth_files = kfrg_files(truth_dir);
  std::set<std::string> truth_ids;
  for (const auto &p : truth_files) truth_ids.insert(p.stem().string());

  EvaluationSummary s;
  std::vector<fs::path> method_dirs;
  for (const auto &e : fs::directory_iterator(pred_dir))
    if (e.is_directory() && fs::weakly_canonical(e.path()) != fs::weakly_canonical(truth_dir)) {
      bool any = false;
      for (const auto &f : fs::directory_iterator(e.path())) any |= f.path().extension() == ".kfrg";
      if (any) method_dirs.push_back(e.path());
    }
  std::sort(method_dirs.begin(), method_dirs.end());
  if (method_dirs.empty()) throw MissingInputError("no method sub-directories with .kfrg files in " + pred_dir.string());

  std::vector<std::string> unpaired;
  for (const auto &md : method_dirs) {
    std::set<std::string> ids;
    for (const auto &p : kfrg_files(md)) ids.insert(p.stem().string());
    for (const auto &id : ids)
      if (!truth_ids.count(id)) unpaired.push_back((md.filename() / (id + ".kfrg")).string() + " (no truth)");
    for (const auto &id : truth_ids)
      if (!ids.count(id)) unpaired.push_back((md.filename() / (id + ".kfrg")).string() + " (missing prediction)");
  }
  if (!unpaired.empty()) {
    std::string msg = "evaluate: unpaired files:";
    for (const auto &u : unpaired) msg += "\n  " + u;
    throw ValidationError(msg);
  }

  s.datasets.assign(truth_ids.begin(), truth_ids.end());
  for (const auto &md : method_dirs) s.methods.push_back(md.filename().string());
  RealImage table(s.datasets.size(), s.methods.size());
  for (std::size_t d = 0; d < s.datasets.size(); ++d) {
    const auto truth = read_image_file(truth_dir / (s.datasets[d] + ".kfrg"));
    for (std::size_t m = 0; m < method_dirs.size(); ++m) {
      const auto pred = read_image_file(method_dirs[m] / (s.datasets[d] + ".kfrg"));
      auto q = evaluate_quality(pred, truth, cfg.metrics, s.datasets[d], s.methods[m]);
      table(d, m) = -q.psnr_db; // rank 1 = highest PSNR
      if (std::isinf(table(d, m))) table(d, m) = -1e300;
      s.reports.push_back(std::move(q));
    }
  }
  fs::create_directories(out_dir);
  {
    std::ofstream csv(out_dir / "metrics.csv", std::ios::trunc);
    write_quality_csv(csv, s.reports);
  }
  nlohmann::json j;
  j["metric"] = s.ranked_metric;
  j["methods"] = s.methods;
  j["datasets"] = s.datasets;
  if (s.datasets.size() >= 2 && s.methods.size() >= 3) {
    s.friedman = friedman_nemenyi(table);
  } else if (s.datasets.size() >= 2 && s.methods.size() == 2) {
    // Friedman needs k >= 3; the pairwise Nemenyi value is still defined.
    FriedmanResult fr;
    const RealImage r = midranks(table);
    fr.subjects = s.datasets.size();
    fr.methods = 2;
    fr.mean_ranks.assign(2, 0.0);
    for (std::size_t d = 0; d < fr.subjects; ++d)
      for (std::size_t m = 0; m < 2; ++m) fr.mean_ranks[m] += r(d, m) / double(fr.subjects);
    fr.statistic = std::nan("");
    fr.p_value = std::nan("");
    fr.nemenyi_p = nemenyi_pvalues(table);
    s.friedman = fr;
  }
  if (s.friedman) {
    const auto &f = *s.friedman;
    j["friedman"] = {{"statistic", std::isnan(f.statistic) ? nlohmann::json(nullptr) : nlohmann::json(f.statistic)},
                     {"p_value", std::isnan(f.p_value) ? nlohmann::json(nullptr) : nlohmann::json(f.p_value)},
                     {"mean_ranks", f.mean_ranks}};
    nlohmann::json pm = nlohmann::json::array();
    for (std::size_t a = 0; a < f.methods; ++a) {
      nlohmann::json row = nlohmann::json::array();
      for (std::size_t b = 0; b < f.methods; ++b) row.push_back(f.nemenyi_p(a, b));
      pm.push_back(row);
    }
    j["nemenyi_p"] = pm;
  }
  write_text(out_dir / "friedman.json", j.dump(2) + "\n");
  return s;
}

fs::path run_export(const PipelineConfig &cfg, const std::vector<Arch> &archs, const RunOptions &opts,
                    std::optional<fs::path> input) {
  cfg.validate();
  const fs::path in = input ? *input : cfg.out_dir / "kspace";
  const auto files = kfrg_files(in);
  if (files.empty()) throw MissingInputError("no .kfrg files in " + in.string());
  const fs::path root = cfg.out_dir / "export";

  std::vector<std::string> ids(files.size());
  std::vector<std::vector<ManifestEntry>> entries(files.size());
  parallel_for(files.size(), opts.jobs, [&](std::size_t i) {
    with_context(files[i].filename().string(), [&] {
      const VideoKSpace v = load_video_kspace(files[i], cfg);
      ids[i] = v.video_id;
      for (Arch a : archs)
        for (auto &rec : build_records(v, cfg, a)) {
          const fs::path rel = fs::path(arch_name(a)) / (v.video_id + "_w" + std::to_string(rec.window) + ".kfrg");
          write_kfrg(root / rel, rec.file);
          entries[i].push_back({rel.generic_string(), v.video_id, "", arch_name(a), rec.window});
        }
      return 0;
    });
  });
  const SplitManifest split = make_split(ids, cfg.split, derive_seed(cfg.seed, "split"));
  std::map<std::string, std::string> which;
  for (const auto &id : split.train) which[id] = "train";
  for (const auto &id : split.val) which[id] = "val";
  for (const auto &id : split.test) which[id] = "test";
  std::vector<ManifestEntry> all;
  for (auto &e : entries)
    for (auto &r : e) {
      r.split = which[r.video_id];
      all.push_back(r);
    }
  const fs::path man = root / "manifest.json";
  write_text(man, manifest_json(split, all, cfg).dump(2) + "\n");
  return man;
}

void run_all(const PipelineConfig &cfg, const RunOptions &opts) {
  run_simulate(cfg, opts);
  run_traj(cfg);
  for (Sampling s : {Sampling::cartesian, Sampling::radial, Sampling::spiral}) {
    for (ReconMethod m : {ReconMethod::zf, ReconMethod::cs}) run_recon(cfg, m, s, opts);
    const fs::path base = cfg.out_dir / "recon" / sampling_name(s);
    run_evaluate(base, base / "truth", cfg, cfg.out_dir / "evaluation" / sampling_name(s));
  }
  run_export(cfg, {Arch::varnet, Arch::unet3d, Arch::fastdvdnet}, opts);
}

} // namespace kforge
