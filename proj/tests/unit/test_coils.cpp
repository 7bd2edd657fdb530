#include "kforge/coils.hpp"
#include "kforge/error.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace kforge;

namespace {

MultiCoilKSpace random_kspace(std::size_t T, std::size_t C, std::size_t H, std::size_t W, std::uint64_t seed) {
  MultiCoilKSpace k;
  k.data = Tensor<cplx, 4>(T, C, H, W);
  const auto v = oracle::random_complex(k.data.size(), seed);
  std::copy(v.begin(), v.end(), k.data.begin());
  return k;
}

// Coils that are linear mixtures of `rank` sources, so the data have exact rank `rank`.
MultiCoilKSpace low_rank_kspace(std::size_t T, std::size_t C, std::size_t rank, std::size_t N, std::uint64_t seed) {
  const auto src = random_kspace(T, rank, N, N, seed);
  const auto mix = oracle::random_complex(rank * C, seed + 1);
  MultiCoilKSpace k;
  k.data = Tensor<cplx, 4>(T, C, N, N);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t r = 0; r < rank; ++r)
        for (std::size_t p = 0; p < N * N; ++p) k.data.slab(t)[c * N * N + p] += mix[r * C + c] * src.data.slab(t)[r * N * N + p];
  return k;
}

} // namespace

TEST(CoilCompression, OrthonormalColumnsAndSortedSpectrum) {
  const auto k = random_kspace(3, 8, 16, 16, 1);
  const auto out = svd_coil_compress(k, 4);
  const auto &m = out.compression.matrix;
  ASSERT_EQ(m.dim(0), 8u);
  ASSERT_EQ(m.dim(1), 4u);
  for (std::size_t a = 0; a < 4; ++a)
    for (std::size_t b = 0; b < 4; ++b) {
      cplx s = 0;
      for (std::size_t c = 0; c < 8; ++c) s += std::conj(m(c, a)) * m(c, b);
      EXPECT_NEAR(std::abs(s - cplx(a == b ? 1.0 : 0.0)), 0.0, 1e-12);
    }
  const auto &sv = out.compression.singular_values;
  ASSERT_EQ(sv.size(), 8u);
  for (std::size_t i = 1; i < sv.size(); ++i) EXPECT_GE(sv[i - 1], sv[i]);
  double kept = 0, all = 0;
  for (std::size_t i = 0; i < 8; ++i) (i < 4 ? kept : all) += sv[i] * sv[i];
  EXPECT_NEAR(out.compression.retained_energy, kept / (kept + all), 1e-12);
  EXPECT_EQ(out.kspace.data.dim(1), 4u);
}

TEST(CoilCompression, FullCountIsLossless) {
  const auto k = random_kspace(2, 6, 8, 8, 2);
  const auto out = svd_coil_compress(k, 6);
  EXPECT_NEAR(out.compression.retained_energy, 1.0, 1e-12);
  // unitary projection preserves energy per frame
  for (std::size_t t = 0; t < 2; ++t) {
    double a = 0, b = 0;
    for (auto v : k.data.slab(t)) a += std::norm(v);
    for (auto v : out.kspace.data.slab(t)) b += std::norm(v);
    EXPECT_NEAR(a, b, 1e-10 * a);
  }
}

TEST(CoilCompression, ExactRankIsCapturedCompletely) {
  const auto k = low_rank_kspace(2, 10, 3, 12, 3);
  const auto out = svd_coil_compress(k, 3);
  EXPECT_NEAR(out.compression.retained_energy, 1.0, 1e-10);
  EXPECT_LT(out.compression.singular_values[3], 1e-6 * out.compression.singular_values[0]);
}

TEST(CoilCompression, ProjectionMatchesDefinition) {
  const auto k = random_kspace(2, 5, 4, 4, 4);
  const auto out = svd_coil_compress(k, 2);
  const auto &m = out.compression.matrix;
  for (std::size_t t = 0; t < 2; ++t)
    for (std::size_t v = 0; v < 2; ++v)
      for (std::size_t p = 0; p < 16; ++p) {
        cplx s = 0;
        for (std::size_t c = 0; c < 5; ++c) s += k.data.slab(t)[c * 16 + p] * m(c, v);
        EXPECT_NEAR(std::abs(out.kspace.data.slab(t)[v * 16 + p] - s), 0.0, 1e-12);
      }
}

TEST(CoilCompression, RejectsTooManyVirtualCoils) {
  const auto k = random_kspace(1, 4, 4, 4, 5);
  EXPECT_THROW(svd_coil_compress(k, 5), ValidationError);
  EXPECT_THROW(svd_coil_compress(k, 0), ValidationError);
}

TEST(CoilCombine, RssMatchesDefinition) {
  MultiCoilImageSeries mc(2, 3, 4, 5);
  const auto v = oracle::random_complex(mc.size(), 6);
  std::copy(v.begin(), v.end(), mc.begin());
  const auto r = rss_combine(mc);
  for (std::size_t t = 0; t < 2; ++t)
    for (std::size_t y = 0; y < 4; ++y)
      for (std::size_t x = 0; x < 5; ++x) {
        double s = 0;
        for (std::size_t c = 0; c < 3; ++c) s += std::norm(mc(t, c, y, x));
        EXPECT_NEAR(r(t, y, x), std::sqrt(s), 1e-14);
      }
}

TEST(CoilCombine, SensitivityWeightedSumRecoversObject) {
  const std::size_t T = 2, C = 4, H = 6, W = 6;
  CoilMapSet maps;
  maps.maps = Tensor<cplx, 3>(C, H, W);
  const auto raw = oracle::random_complex(maps.maps.size(), 7);
  std::copy(raw.begin(), raw.end(), maps.maps.begin());
  for (std::size_t p = 0; p < H * W; ++p) {
    double s = 0;
    for (std::size_t c = 0; c < C; ++c) s += std::norm(maps.maps[c * H * W + p]);
    for (std::size_t c = 0; c < C; ++c) maps.maps[c * H * W + p] /= std::sqrt(s);
  }
  ComplexImageSeries obj(T, H, W);
  const auto o = oracle::random_complex(obj.size(), 8);
  std::copy(o.begin(), o.end(), obj.begin());
  const auto back = coil_combine(apply_coil_maps(obj, maps), maps);
  EXPECT_LT(oracle::rel_l2(back.flat(), obj.flat()), 1e-14);
}

TEST(CoilSensitivities, UnitRssAndEmptyPixels) {
  const std::size_t T = 3, C = 4, H = 8, W = 8;
  MultiCoilImageSeries mc(T, C, H, W);
  const auto v = oracle::random_complex(mc.size(), 9);
  std::copy(v.begin(), v.end(), mc.begin());
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t c = 0; c < C; ++c) mc(t, c, 0, 0) = 0;
  const auto est = estimate_sensitivities(mc);
  EXPECT_EQ(est.empty_pixels, 1u);
  EXPECT_FALSE(est.degenerate);
  for (std::size_t y = 0; y < H; ++y)
    for (std::size_t x = 0; x < W; ++x) {
      double s = 0;
      for (std::size_t c = 0; c < C; ++c) s += std::norm(est.maps.maps(c, y, x));
      EXPECT_NEAR(s, (y == 0 && x == 0) ? 0.0 : 1.0, 1e-12);
    }
  const auto zero = estimate_sensitivities(MultiCoilImageSeries(T, C, H, W));
  EXPECT_TRUE(zero.degenerate);
}

TEST(CoilSensitivities, KSpaceAndImageRoutesAgree) {
  const auto k = random_kspace(2, 3, 8, 8, 10);
  const auto a = estimate_sensitivities(k);
  const auto b = estimate_sensitivities(ifft2_inverse(k));
  EXPECT_LT(oracle::rel_l2(a.maps.maps.flat(), b.maps.maps.flat()), 1e-12);
}
