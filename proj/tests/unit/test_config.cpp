#include "kforge/config.hpp"
#include "kforge/error.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <fstream>

using namespace kforge;

TEST(Config, ParsesKeysCommentsAndRanges) {
  const auto cfg = parse_pipeline_config("# comment\n"
                                         "seed = 42\n"
                                         "frames = 30   # trailing comment\n"
                                         "sim.target_snr = 10 20\n"
                                         "sim.noise_model = uniform\n"
                                         "split = 0.5 0.25 0.25\n"
                                         "cs.lambda = 1e-3\n"
                                         "metrics.profile = 1 2 3 4 50\n");
  EXPECT_EQ(cfg.seed, 42u);
  EXPECT_EQ(cfg.frames, 30u);
  EXPECT_EQ(cfg.sim.target_snr.lo, 10.0);
  EXPECT_EQ(cfg.sim.target_snr.hi, 20.0);
  EXPECT_EQ(cfg.sim.noise_model, NoiseModel::uniform);
  EXPECT_EQ(cfg.split[1], 0.25);
  EXPECT_EQ(cfg.cs.lambda, 1e-3);
  ASSERT_TRUE(cfg.metrics.profile);
  EXPECT_EQ(cfg.metrics.profile->samples, 50u);
  EXPECT_NO_THROW(cfg.validate());
}

TEST(Config, ErrorsNameKeyAndLine) {
  try {
    parse_pipeline_config("frames = 10\nbogus.key = 3\n", "my.cfg");
    FAIL();
  } catch (const ValidationError &e) {
    const std::string w = e.what();
    EXPECT_NE(w.find("my.cfg:2"), std::string::npos) << w;
    EXPECT_NE(w.find("bogus.key"), std::string::npos) << w;
  }
  EXPECT_THROW(parse_pipeline_config("frames = ten\n"), ValidationError);
  EXPECT_THROW(parse_pipeline_config("frames\n"), ValidationError);
  EXPECT_THROW(parse_pipeline_config("sim.noise_model = pink\n"), ValidationError);
}

TEST(Config, ValidateRejectsInconsistentSettings) {
  PipelineConfig cfg;
  cfg.split = {0.5, 0.5, 0.5};
  EXPECT_THROW(cfg.validate(), ValidationError);
  cfg = PipelineConfig{};
  cfg.virtual_coils = 40;
  EXPECT_THROW(cfg.validate(), ValidationError);
  cfg = PipelineConfig{};
  cfg.cartesian.no_repeat_window = 15;
  try {
    cfg.validate();
    FAIL();
  } catch (const ValidationError &e) {
    EXPECT_NE(std::string(e.what()).find("239"), std::string::npos) << e.what();
  }
  cfg.height = 240;
  EXPECT_NO_THROW(cfg.validate());
}

TEST(Config, BaseIsOverriddenOnlyWhereSet) {
  PipelineConfig base;
  base.seed = 99;
  base.frames = 12;
  const auto cfg = parse_pipeline_config("frames = 20\n", "<t>", base);
  EXPECT_EQ(cfg.seed, 99u);
  EXPECT_EQ(cfg.frames, 20u);
}

TEST(Config, CanonicalFormRoundTripsAndHashes) {
  PipelineConfig a;
  a.cs.lambda = 0.1 + 0.2; // not exactly representable in short decimal
  a.out_dir = "/somewhere";
  const auto text = canonical_config(a);
  EXPECT_EQ(text.find("out_dir"), std::string::npos);
  const auto b = parse_pipeline_config(text);
  EXPECT_EQ(b.cs.lambda, a.cs.lambda);
  EXPECT_EQ(canonical_config(b), text);
  EXPECT_EQ(config_hash(b), config_hash(a));
  EXPECT_EQ(config_hash(a).size(), 16u);
  PipelineConfig c = a;
  c.seed = 1;
  EXPECT_NE(config_hash(c), config_hash(a));
  c = a;
  c.video_dir = "elsewhere";
  EXPECT_EQ(config_hash(c), config_hash(a));
}

TEST(Config, LoadFromFile) {
  const auto dir = oracle::scratch_dir("config");
  std::ofstream(dir / "p.cfg") << "seed = 5\nheight = 48\nwidth = 48\n";
  const auto cfg = load_pipeline_config(dir / "p.cfg");
  EXPECT_EQ(cfg.seed, 5u);
  EXPECT_EQ(cfg.height, 48u);
  EXPECT_THROW(load_pipeline_config(dir / "none.cfg"), MissingInputError);
}
