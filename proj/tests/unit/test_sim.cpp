#include "kforge/error.hpp"
#include "kforge/sim.hpp"
#include "kforge/toy_video.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <numbers>

using namespace kforge;

namespace {

RGBVideo small_video(std::size_t T = 3, std::size_t n = 32, std::uint64_t seed = 1) { return toy_video(T, n, n, seed); }

ComplexImageSeries random_series(std::size_t T, std::size_t H, std::size_t W, std::uint64_t seed) {
  ComplexImageSeries s(T, H, W);
  const auto v = oracle::random_complex(s.size(), seed);
  std::copy(v.begin(), v.end(), s.begin());
  return s;
}

} // namespace

TEST(RgbToComplex, ChannelPairAndPhaseScaling) {
  RGBVideo v;
  v.frames = Tensor<double, 4>(1, 1, 1, 3);
  v.frames(0, 0, 0, 0) = 0.3;
  v.frames(0, 0, 0, 1) = 0.8;
  v.frames(0, 0, 0, 2) = 0.4;
  const auto z = rgb_to_complex(v, ChannelPair{2, 0}, 4.0);
  const double mag = std::hypot(0.4, 0.3), ph = 4.0 * std::atan2(0.3, 0.4);
  EXPECT_NEAR(std::abs(z[0] - std::polar(mag, ph)), 0, 1e-15);
}

TEST(RgbToComplex, ChannelDrawUsesDistinctChannels) {
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    const auto p = draw_channel_pair(rng);
    EXPECT_NE(p.real, p.imag);
    EXPECT_GE(std::min(p.real, p.imag), 0);
    EXPECT_LT(std::max(p.real, p.imag), 3);
  }
  EXPECT_THROW(rgb_to_complex(small_video(), ChannelPair{1, 1}), ValidationError);
}

TEST(PhaseSteps, MaskAndBackgroundPhasePreserveMagnitude) {
  const auto s = random_series(2, 24, 24, 4);
  SimConfig cfg;
  Rng rng(5);
  const auto e = draw_ellipse(cfg, 24, rng);
  const auto mask = elliptical_mask(24, 24, e);
  const auto masked = apply_elliptical_mask(s, e);
  const auto phased = add_background_phase(masked, cfg, rng);
  for (std::size_t t = 0; t < 2; ++t)
    for (std::size_t p = 0; p < 24 * 24; ++p) {
      const double m = mask[p] > 0 ? std::abs(s[t * 576 + p]) : 0.0;
      EXPECT_NEAR(std::abs(masked[t * 576 + p]), m, 1e-9);
      EXPECT_NEAR(std::abs(phased[t * 576 + p]), m, 1e-9);
    }
}

TEST(Ellipse, AxesAreFullLengths) {
  // an axis-aligned ellipse with full long axis 20 spans 20 pixels along x through the centre
  EllipseParams e{0.0, 20.0, 10.0};
  const auto m = elliptical_mask(41, 41, e);
  double across = 0, down = 0;
  for (std::size_t x = 0; x < 41; ++x) across += m(20, x);
  for (std::size_t y = 0; y < 41; ++y) down += m(y, 20);
  EXPECT_EQ(across, 21); // |dx| <= 10
  EXPECT_EQ(down, 11);   // |dy| <= 5
}

TEST(Ellipse, DrawnAxesFollowWidthFractions) {
  SimConfig cfg;
  Rng rng(6);
  for (int i = 0; i < 100; ++i) {
    const auto e = draw_ellipse(cfg, 100, rng);
    EXPECT_GE(e.long_axis, 100.0);
    EXPECT_LE(e.long_axis, 140.0);
    EXPECT_GE(e.short_axis, 64.0);
    EXPECT_LE(e.short_axis, 96.0);
    EXPECT_GE(e.rotation, 0.0);
    EXPECT_LT(e.rotation, std::numbers::pi);
  }
}

TEST(CoilMaps, RootSumOfSquaresIsOne) {
  SimConfig cfg;
  for (std::uint64_t seed : {1, 2, 3}) {
    Rng rng(seed);
    const auto maps = generate_coil_maps(cfg, 48, 40, rng);
    ASSERT_EQ(maps.n_coils(), 30u);
    for (std::size_t p = 0; p < 48 * 40; ++p) {
      double ss = 0;
      for (std::size_t c = 0; c < 30; ++c) ss += std::norm(maps.maps[c * 48 * 40 + p]);
      EXPECT_NEAR(std::sqrt(ss), 1.0, 1e-6);
    }
  }
}

TEST(CoilMaps, CentresAvoidTheCentralBox) {
  SimConfig cfg;
  Rng rng(8);
  const auto params = draw_coil_params(cfg, 100, 100, rng);
  for (const auto &p : params) {
    const bool inside = std::abs(p.center_y - 49.5) < 10 && std::abs(p.center_x - 49.5) < 10;
    EXPECT_FALSE(inside) << p.center_y << "," << p.center_x;
  }
}

TEST(Noise, EmpiricalSnrWithinFivePercentOfDraw) {
  SimConfig cfg;
  for (std::uint64_t seed : {11, 12, 13}) {
    Rng rng(seed);
    const auto obj = random_series(4, 32, 32, seed);
    const auto maps = generate_coil_maps(cfg, 32, 32, rng);
    const auto mc = apply_coil_maps(obj, maps);
    const auto nd = add_noise(mc, cfg, rng);
    EXPECT_GE(nd.target_snr, 12.0);
    EXPECT_LE(nd.target_snr, 22.0);
    double mean_sig = 0, ss = 0;
    for (std::size_t i = 0; i < mc.size(); ++i) {
      mean_sig += std::abs(mc[i]);
      const cplx n = nd.data[i] - mc[i];
      ss += n.real() * n.real() + n.imag() * n.imag();
    }
    mean_sig /= double(mc.size());
    const double sd = std::sqrt(ss / double(2 * mc.size() - 1));
    EXPECT_NEAR(mean_sig / sd / nd.target_snr, 1.0, 0.05);
  }
}

TEST(Noise, UniformModelHasSameStd) {
  SimConfig cfg;
  cfg.noise_model = NoiseModel::uniform;
  Rng rng(14);
  const auto mc = apply_coil_maps(random_series(2, 32, 32, 3), generate_coil_maps(cfg, 32, 32, rng));
  const auto nd = add_noise(mc, cfg, rng);
  double ss = 0;
  for (std::size_t i = 0; i < mc.size(); ++i) ss += std::norm(nd.data[i] - mc[i]);
  EXPECT_NEAR(std::sqrt(ss / double(2 * mc.size())) / nd.sigma, 1.0, 0.02);
}

TEST(Noise, DisabledMeansInfiniteSnr) {
  SimConfig cfg;
  cfg.add_noise = false;
  Rng rng(1);
  const auto mc = apply_coil_maps(random_series(1, 16, 16, 3), generate_coil_maps(cfg, 16, 16, rng));
  const auto nd = add_noise(mc, cfg, rng);
  EXPECT_TRUE(std::isinf(nd.target_snr));
  EXPECT_TRUE(nd.data == mc);
}

TEST(Noise, AllZeroSignalIsNumericalError) {
  SimConfig cfg;
  Rng rng(1);
  EXPECT_THROW(add_noise(MultiCoilImageSeries(1, 2, 4, 4), cfg, rng), NumericalError);
}

TEST(Simulate, KSpaceIsForwardTransformOfCoilImages) {
  SimConfig cfg;
  cfg.add_noise = false;
  cfg.n_coils = 4;
  Rng rng(21);
  const auto sim = simulate(small_video(2, 16), cfg, rng);
  const auto mc = apply_coil_maps(sim.object, sim.coils);
  for (std::size_t i = 0; i < 2 * 4; ++i) {
    const auto ref = oracle::centered_dft2(mc.flat().subspan(i * 256, 256), 16, 16, false);
    EXPECT_LT(oracle::rel_l2(sim.kspace.data.flat().subspan(i * 256, 256), ref), 1e-12);
  }
  const auto back = ifft2_inverse(sim.kspace);
  EXPECT_LT(oracle::rel_l2(back.flat(), mc.flat()), 1e-13);
}

TEST(Simulate, SameSeedSameBits) {
  SimConfig cfg;
  Rng a(5), b(5), c(6);
  const auto v = small_video();
  const auto sa = simulate(v, cfg, a), sb = simulate(v, cfg, b), sc = simulate(v, cfg, c);
  EXPECT_TRUE(sa.kspace.data == sb.kspace.data);
  EXPECT_FALSE(sa.kspace.data == sc.kspace.data);
}

TEST(Simulate, DerivedSeedsDifferPerVideo) {
  EXPECT_EQ(derive_seed(1, "a"), derive_seed(1, "a"));
  EXPECT_NE(derive_seed(1, "a"), derive_seed(1, "b"));
  EXPECT_NE(derive_seed(1, "a"), derive_seed(2, "a"));
}

TEST(SimConfig, RejectsBadRanges) {
  SimConfig cfg;
  cfg.n_coils = 0;
  EXPECT_THROW(cfg.validate(), ValidationError);
  cfg = SimConfig{};
  cfg.coil_sigma = {0.5, 0.1};
  EXPECT_THROW(cfg.validate(), ValidationError);
}
