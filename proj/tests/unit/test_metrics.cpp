#include "kforge/error.hpp"
#include "kforge/metrics.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>
#include <sstream>

using namespace kforge;

namespace {

MagnitudeImageSeries random_series(std::size_t T, std::size_t H, std::size_t W, std::uint64_t seed, double lo = 0,
                                   double hi = 1) {
  MagnitudeImageSeries s(T, H, W);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  for (auto &v : s) v = u(rng);
  return s;
}

MagnitudeImageSeries perturbed(const MagnitudeImageSeries &b, double noise, std::uint64_t seed) {
  MagnitudeImageSeries a = b;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0, noise);
  for (auto &v : a) v = std::abs(v + n(rng));
  return a;
}

} // namespace

TEST(Metrics, MseAndPsnrMatchDefinitions) {
  const auto b = random_series(3, 20, 24, 1, 0.2, 3.0);
  const auto a = perturbed(b, 0.05, 2);
  EXPECT_NEAR(mse(a, b), oracle::mse(a, b), 1e-15);
  EXPECT_NEAR(psnr(a, b), oracle::psnr(a, b), 1e-10);
  EXPECT_NEAR(psnr(a, b, 10.0), 10 * std::log10(100.0 / oracle::mse(a, b)), 1e-10);
  EXPECT_EQ(psnr(b, b), kInfinite);
  EXPECT_EQ(mse(b, b), 0.0);
}

TEST(Metrics, SsimMatchesWindowedOracle) {
  for (std::uint64_t seed : {3, 4}) {
    const auto b = random_series(2, 24, 30, seed, 0.0, 2.0);
    const auto a = perturbed(b, 0.2, seed + 10);
    EXPECT_NEAR(ssim(a, b), oracle::ssim(a, b), 1e-10);
  }
  const auto b = random_series(1, 16, 16, 5);
  EXPECT_NEAR(ssim(b, b), 1.0, 1e-12);
}

TEST(Metrics, SsimExplicitRangeAndDegenerateInput) {
  const auto b = random_series(1, 16, 16, 6);
  const auto a = perturbed(b, 0.1, 7);
  SsimOptions o;
  o.dynamic_range = 1.0;
  EXPECT_NE(ssim(a, b, o), ssim(a, b));
  const MagnitudeImageSeries flat(1, 16, 16);
  EXPECT_THROW(ssim(flat, flat), ValidationError);
  EXPECT_THROW(ssim(random_series(1, 8, 8, 8), random_series(1, 8, 8, 9)), ValidationError); // smaller than window
  EXPECT_THROW(mse(a, random_series(1, 16, 15, 8)), ValidationError);
}

TEST(Metrics, SnrUsesSampleStd) {
  MagnitudeImageSeries img(2, 10, 10);
  std::fill(img.begin(), img.end(), 4.0);
  const Roi signal{5, 5, 4, 4}, noise{0, 0, 4, 4};
  // noise ROI alternates 1 and 3: 32 pooled values, mean 2, sample variance 32 / 31
  for (std::size_t t = 0; t < 2; ++t)
    for (std::size_t y = 0; y < 4; ++y)
      for (std::size_t x = 0; x < 4; ++x) img(t, y, x) = (x % 2) ? 3.0 : 1.0;
  EXPECT_NEAR(snr_estimate(img, signal, noise), 20 * std::log10(4.0 / std::sqrt(32.0 / 31.0)), 1e-12);
  for (std::size_t t = 0; t < 2; ++t)
    for (std::size_t y = 0; y < 4; ++y)
      for (std::size_t x = 0; x < 4; ++x) img(t, y, x) = 1.0;
  EXPECT_EQ(snr_estimate(img, signal, noise), kInfinite);
  EXPECT_THROW(snr_estimate(img, signal, Roi{0, 0, 2, 2}), ValidationError);
  EXPECT_THROW(snr_estimate(img, signal, Roi{4, 4, 4, 4}), ValidationError);
}

TEST(Metrics, EdgeSharpnessOfStep) {
  MagnitudeImageSeries img(3, 16, 16);
  for (std::size_t t = 0; t < 3; ++t)
    for (std::size_t y = 0; y < 16; ++y)
      for (std::size_t x = 8; x < 16; ++x) img(t, y, x) = 1 + double(t);
  // samples on integer pixels: the profile jumps 0 -> 1 in one step
  const ProfileSpec p{8, 0, 8, 15, 16};
  const auto es = edge_sharpness(img, p);
  EXPECT_NEAR(es.mean, 1.0, 1e-12);
  EXPECT_NEAR(es.std_t, 0.0, 1e-12);
  EXPECT_EQ(es.per_frame.size(), 3u);
  // a linear ramp over the whole profile rises by 1/15 per step
  for (std::size_t x = 0; x < 16; ++x) img(0, 8, x) = double(x);
  EXPECT_NEAR(edge_sharpness(img, p).per_frame[0], 1.0 / 15, 1e-12);
  MagnitudeImageSeries flat(2, 16, 16);
  const auto fe = edge_sharpness(flat, p);
  EXPECT_EQ(fe.flat_frames, 2u);
  EXPECT_EQ(fe.mean, 0.0);
}

TEST(Metrics, QualityCsvRoundTrip) {
  std::vector<QualityReport> rows{{"vid_a", "zf", 0.125, 21.5, 0.75, 18.25, 0.5, 0.0625},
                                  {"vid_b", "cs", 1e-7, 40.0, 0.99, kInfinite, 0.3, 0.01}};
  std::stringstream ss;
  write_quality_csv(ss, rows);
  EXPECT_EQ(ss.str().substr(0, ss.str().find('\n')), kQualityCsvHeader);
  const auto back = read_quality_csv(ss);
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back[i].dataset, rows[i].dataset);
    EXPECT_EQ(back[i].method, rows[i].method);
    EXPECT_EQ(back[i].mse, rows[i].mse);
    EXPECT_EQ(back[i].psnr_db, rows[i].psnr_db);
    EXPECT_EQ(back[i].ssim, rows[i].ssim);
    EXPECT_EQ(back[i].snr_db, rows[i].snr_db);
    EXPECT_EQ(back[i].es_std_t, rows[i].es_std_t);
  }
  std::stringstream bad("dataset,method\nx,y\n");
  EXPECT_THROW(read_quality_csv(bad), ValidationError);
}

TEST(Metrics, EvaluateQualityUsesDefaults) {
  const auto b = random_series(2, 32, 32, 11, 0.5, 1.5);
  const auto a = perturbed(b, 0.02, 12);
  const auto r = evaluate_quality(a, b, MetricsConfig{}, "d", "m");
  EXPECT_EQ(r.dataset, "d");
  EXPECT_NEAR(r.mse, oracle::mse(a, b), 1e-15);
  EXPECT_NEAR(r.ssim, oracle::ssim(a, b), 1e-10);
  EXPECT_NEAR(r.snr_db, snr_estimate(a, default_signal_roi(32, 32), default_noise_roi(32, 32)), 1e-12);
}
