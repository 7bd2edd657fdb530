#pragma once

#include "kforge/config.hpp"
#include "kforge/kfrg.hpp"

#include <array>
#include <string>
#include <vector>

namespace kforge {

enum class Arch { varnet, unet3d, fastdvdnet };
const char *arch_name(Arch a);
Arch parse_arch(const std::string &s);

/// One training example. `file.metadata` carries everything needed to regenerate it.
struct DatasetRecord {
  std::string video_id;
  Arch arch = Arch::varnet;
  std::size_t window = 0, frame_start = 0;
  KfrgFile file;
};

/// Inputs shared by all architectures for one video.
struct VideoKSpace {
  std::string video_id;
  std::uint64_t video_seed = 0;
  MultiCoilKSpace kspace;                        // T x C_virtual x H x W, fully sampled
  nlohmann::json sim_metadata = nlohmann::json::object(); // SNR draw, channels, ellipse, ...
};

/// Records for every non-overlapping window of the video (stride = window length).
///   varnet:     kspace (masked), mask, sensitivities, zero_filled, target   (cartesian lines)
///   unet3d:     input (gridded coil images), target                         (radial spokes)
///   fastdvdnet: input (window magnitude frames), target (latest frame)      (spiral arms)
std::vector<DatasetRecord> build_records(const VideoKSpace &video, const PipelineConfig &cfg, Arch arch);

struct SplitManifest {
  std::vector<std::string> train, val, test;
};

/// Sorts, shuffles with `seed`, and cuts: train = round(f0 n), val = round(f1 n), test = rest.
SplitManifest make_split(std::vector<std::string> ids, const std::array<double, 3> &fractions, std::uint64_t seed);

struct ManifestEntry {
  std::string path; // relative to the manifest
  std::string video_id;
  std::string split;
  std::string arch;
  std::size_t window = 0;
};

nlohmann::json manifest_json(const SplitManifest &split, const std::vector<ManifestEntry> &records,
                             const PipelineConfig &cfg);

} // namespace kforge
