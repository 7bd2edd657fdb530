#include "kforge/dataset.hpp"
#include "kforge/error.hpp"
#include "kforge/pipeline.hpp"
#include "kforge/toy_video.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <set>

using namespace kforge;

namespace {

std::vector<std::string> ids(std::size_t n) {
  std::vector<std::string> v;
  for (std::size_t i = 0; i < n; ++i) v.push_back("vid" + std::to_string(i));
  return v;
}

PipelineConfig small_config() {
  PipelineConfig cfg;
  cfg.height = cfg.width = 32;
  cfg.frames = 26;
  cfg.sim.n_coils = 6;
  cfg.virtual_coils = 4;
  cfg.cartesian = {4, 5, 0.6, 1};
  cfg.spiral.samples_per_arm = 128;
  cfg.seed = 3;
  return cfg;
}

VideoKSpace small_video(const PipelineConfig &cfg) {
  Rng rng(derive_seed(cfg.seed, "toy"));
  const auto sim = simulate(toy_video(cfg.frames, cfg.height, cfg.width, 4), cfg.sim, rng);
  return compress_video("toy", derive_seed(cfg.seed, "toy"), sim.kspace, {{"snr", sim.target_snr}}, cfg);
}

} // namespace

TEST(Split, SizesFollowRoundedFractions) {
  const auto m = make_split(ids(692), {0.75, 0.10, 0.15}, 7);
  EXPECT_EQ(m.train.size(), 519u);
  EXPECT_EQ(m.val.size(), 69u);
  EXPECT_EQ(m.test.size(), 104u);
  std::set<std::string> all(m.train.begin(), m.train.end());
  all.insert(m.val.begin(), m.val.end());
  all.insert(m.test.begin(), m.test.end());
  EXPECT_EQ(all.size(), 692u);
}

TEST(Split, DeterministicAndOrderIndependent) {
  auto shuffled = ids(50);
  std::reverse(shuffled.begin(), shuffled.end());
  const auto a = make_split(ids(50), {0.6, 0.2, 0.2}, 1);
  const auto b = make_split(shuffled, {0.6, 0.2, 0.2}, 1);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.test, b.test);
  EXPECT_NE(make_split(ids(50), {0.6, 0.2, 0.2}, 2).train, a.train);
}

TEST(Split, DegenerateFractions) {
  const auto m = make_split(ids(10), {1, 0, 0}, 0);
  EXPECT_EQ(m.train.size(), 10u);
  EXPECT_TRUE(m.val.empty());
  EXPECT_TRUE(m.test.empty());
  EXPECT_THROW(make_split(ids(10), {0.5, 0.5, 0.5}, 0), ValidationError);
  EXPECT_THROW(make_split({}, {1, 0, 0}, 0), ValidationError);
  EXPECT_THROW(make_split({"a", "a"}, {1, 0, 0}, 0), ValidationError);
}

TEST(Records, WindowsAndArrays) {
  auto cfg = small_config();
  cfg.varnet_window = 12;
  cfg.unet3d_window = 12;
  const auto video = small_video(cfg);

  const auto v = build_records(video, cfg, Arch::varnet);
  ASSERT_EQ(v.size(), 2u); // 26 frames, stride 12
  EXPECT_EQ(v[1].frame_start, 12u);
  EXPECT_EQ(v[0].file.kind, RecordKind::cartesian);
  ASSERT_EQ(v[0].file.arrays.size(), 5u);
  EXPECT_EQ(v[0].file.arrays[0].dims, (std::array<std::uint32_t, 4>{12, 4, 32, 32}));
  EXPECT_EQ(v[0].file.arrays[1].dims, (std::array<std::uint32_t, 4>{1, 1, 12, 32}));
  EXPECT_EQ(v[0].file.metadata["arrays"][2]["name"], "sensitivities");
  EXPECT_EQ(v[0].file.metadata["config_hash"], config_hash(cfg));
  // each window draws its own mask
  EXPECT_NE(v[0].file.arrays[1].data, v[1].file.arrays[1].data);
  // 9 lines in every frame of the mask
  for (std::size_t t = 0; t < 12; ++t) {
    float n = 0;
    for (std::size_t r = 0; r < 32; ++r) n += v[0].file.arrays[1].data[t * 32 + r].real();
    EXPECT_EQ(n, 9.0f);
  }

  const auto u = build_records(video, cfg, Arch::unet3d);
  ASSERT_EQ(u.size(), 2u);
  EXPECT_EQ(u[0].file.kind, RecordKind::multicoil_gridded);
  EXPECT_EQ(u[0].file.arrays[0].dims, (std::array<std::uint32_t, 4>{12, 4, 32, 32}));

  const auto f = build_records(video, cfg, Arch::fastdvdnet);
  ASSERT_EQ(f.size(), 5u);
  EXPECT_EQ(f[0].file.arrays[0].dims, (std::array<std::uint32_t, 4>{1, 5, 32, 32}));
  EXPECT_EQ(f[0].file.arrays[1].dims, (std::array<std::uint32_t, 4>{1, 1, 32, 32}));
  EXPECT_EQ(f[3].file.metadata["target_frame"], 19);
}

TEST(Records, DefaultVarnetWindowIsTwentyFour) {
  auto cfg = small_config();
  const auto v = build_records(small_video(cfg), cfg, Arch::varnet);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].file.arrays[0].dims[0], 24u);
}

TEST(Records, RegenerationIsByteIdentical) {
  const auto cfg = small_config();
  const auto a = build_records(small_video(cfg), cfg, Arch::varnet);
  const auto b = build_records(small_video(cfg), cfg, Arch::varnet);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(encode_kfrg(a[i].file), encode_kfrg(b[i].file));
}

TEST(Records, ShortVideoIsRejected) {
  auto cfg = small_config();
  cfg.varnet_window = 30;
  try {
    build_records(small_video(cfg), cfg, Arch::varnet);
    FAIL();
  } catch (const ValidationError &e) {
    EXPECT_NE(std::string(e.what()).find("toy"), std::string::npos);
  }
}

TEST(Manifest, ListsSplitsAndRecords) {
  const auto cfg = small_config();
  const auto split = make_split({"a", "b", "c", "d"}, {0.5, 0.25, 0.25}, 1);
  const auto j = manifest_json(split, {{"varnet/a_w0.kfrg", "a", "train", "varnet", 0}}, cfg);
  EXPECT_EQ(j["format"], "kfrg");
  EXPECT_EQ(j["config_hash"], config_hash(cfg));
  EXPECT_EQ(j["split"]["train"].size(), 2u);
  EXPECT_EQ(j["records"][0]["path"], "varnet/a_w0.kfrg");
}
