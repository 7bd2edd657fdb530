#pragma once

#include "kforge/config.hpp"
#include "kforge/dataset.hpp"
#include "kforge/metrics.hpp"
#include "kforge/recon.hpp"
#include "kforge/stats.hpp"

#include <exception>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace kforge {

enum class Sampling { cartesian, radial, spiral };
enum class ReconMethod { zf, cs };

const char *sampling_name(Sampling s);
Sampling parse_sampling(const std::string &s);
const char *method_name(ReconMethod m);
ReconMethod parse_method(const std::string &s);

/// Runs fn(i) for i in [0, n) on `jobs` threads. Every index runs to completion; the exception of
/// the lowest failing index is rethrown afterwards.
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)> &fn);

struct VideoSource {
  std::string id;
  std::filesystem::path dir;
};

/// Sub-directories of `video_dir` in name order; a directory holding frames directly is one video.
std::vector<VideoSource> discover_videos(const std::filesystem::path &video_dir);

struct SimulatedVideo {
  std::string id;
  std::uint64_t seed = 0; // derive_seed(cfg.seed, id)
  Simulation sim;
};

SimulatedVideo simulate_video(const VideoSource &src, const PipelineConfig &cfg);
KfrgFile kspace_file(const SimulatedVideo &v, const PipelineConfig &cfg);

/// Reads a simulate output and compresses it to cfg.virtual_coils.
VideoKSpace load_video_kspace(const std::filesystem::path &path, const PipelineConfig &cfg);
VideoKSpace compress_video(const std::string &id, std::uint64_t seed, const MultiCoilKSpace &full,
                           nlohmann::json sim_metadata, const PipelineConfig &cfg);

/// The Cartesian mask used by `recon` and `traj` (seeded from cfg.seed only).
CartesianMask pipeline_mask(const PipelineConfig &cfg, std::size_t frames);
Trajectory pipeline_trajectory(Sampling s, const PipelineConfig &cfg, std::size_t frames);
/// Operator without coil maps.
EncodingOperator sampling_operator(Sampling s, const PipelineConfig &cfg, std::size_t frames);

struct ReconCase {
  MagnitudeImageSeries recon, truth;
  std::vector<double> objective; // empty for zf
};

/// Undersamples `full` with `op`, estimates sensitivities from the undersampled data and
/// reconstructs. truth = |sensitivity-combined fully-sampled images|.
ReconCase reconstruct(const MultiCoilKSpace &full, const EncodingOperator &op, ReconMethod method,
                      const PipelineConfig &cfg);

/// Magnitude series stored as a kind=image record.
KfrgFile image_file(const MagnitudeImageSeries &img, nlohmann::json metadata);
MagnitudeImageSeries read_image_file(const std::filesystem::path &path);

struct RunOptions {
  std::size_t jobs = 1;
  bool emit_figures = false;
};

std::vector<std::filesystem::path> run_simulate(const PipelineConfig &cfg, const RunOptions &opts);
void run_traj(const PipelineConfig &cfg);
std::vector<QualityReport> run_recon(const PipelineConfig &cfg, ReconMethod method, Sampling sampling,
                                     const RunOptions &opts, std::optional<std::filesystem::path> input = std::nullopt);

struct EvaluationSummary {
  std::vector<QualityReport> reports;
  std::vector<std::string> methods, datasets;
  std::string ranked_metric = "psnr_db";
  std::optional<FriedmanResult> friedman; // needs >= 2 datasets and >= 2 methods
};

/// pred_dir holds one sub-directory per method with <dataset>.kfrg files; truth_dir holds the
/// matching <dataset>.kfrg references. Writes metrics.csv and friedman.json into out_dir.
EvaluationSummary run_evaluate(const std::filesystem::path &pred_dir, const std::filesystem::path &truth_dir,
                               const PipelineConfig &cfg, const std::filesystem::path &out_dir);

std::filesystem::path run_export(const PipelineConfig &cfg, const std::vector<Arch> &archs, const RunOptions &opts,
                                 std::optional<std::filesystem::path> input = std::nullopt);

/// simulate, traj, recon (zf and cs for every sampling), evaluate per sampling, export.
void run_all(const PipelineConfig &cfg, const RunOptions &opts);

/// Writes frame 0 and a y-t profile through the centre column as 8-bit PNGs, scaled by `peak`.
void write_figures(const MagnitudeImageSeries &img, double peak, const std::filesystem::path &stem);

} // namespace kforge
