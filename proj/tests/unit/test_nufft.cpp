#include "kforge/error.hpp"
#include "kforge/nufft.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace kforge;

namespace {

cplx dot(std::span<const cplx> a, std::span<const cplx> b) {
  cplx s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
  return s;
}

} // namespace

TEST(Nufft, ForwardMatchesDirectSum) {
  for (auto [h, w] : {std::pair{32, 32}, std::pair{17, 24}, std::pair{8, 31}}) {
    NufftPlan plan(h, w);
    const auto img = oracle::random_image(h, w, 11);
    const auto k = oracle::random_points(256, 12);
    EXPECT_LT(oracle::rel_l2(plan.forward(img, k), oracle::ndft_forward(img, k)), 1e-5) << h << "x" << w;
  }
}

TEST(Nufft, AdjointMatchesDirectSum) {
  NufftPlan plan(32, 32);
  const auto k = oracle::random_points(256, 13);
  const auto s = oracle::random_complex(256, 14);
  const auto got = plan.adjoint(s, k);
  const auto ref = oracle::ndft_adjoint(s, k, 32, 32);
  EXPECT_LT(oracle::rel_l2(got.flat(), ref.flat()), 1e-5);
}

TEST(Nufft, WeightedAdjointScalesSamples) {
  NufftPlan plan(16, 16);
  const auto k = oracle::random_points(64, 15);
  auto s = oracle::random_complex(64, 16);
  std::vector<double> dcf(64);
  for (std::size_t i = 0; i < 64; ++i) dcf[i] = 0.1 + 0.01 * double(i);
  const auto weighted = plan.adjoint(s, k, dcf);
  for (std::size_t i = 0; i < 64; ++i) s[i] *= dcf[i];
  EXPECT_LT(oracle::rel_l2(weighted.flat(), plan.adjoint(s, k).flat()), 1e-14);
}

TEST(Nufft, AdjointIdentityOverSeeds) {
  NufftPlan plan(24, 20);
  double worst = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto k = oracle::random_points(150, 1000 + seed);
    const auto table = plan.prepare(k);
    const auto x = oracle::random_image(24, 20, 2000 + seed);
    const auto y = oracle::random_complex(150, 3000 + seed);
    const cplx lhs = dot(plan.forward(x, table), y);
    const cplx rhs = dot(x.flat(), plan.adjoint(y, table).flat());
    worst = std::max(worst, std::abs(lhs - rhs) / std::abs(lhs));
  }
  EXPECT_LT(worst, 1e-10);
}

TEST(Nufft, KernelAndApodizationArePositive) {
  NufftPlan plan(32, 48);
  EXPECT_EQ(plan.grid_height(), 64u);
  EXPECT_EQ(plan.grid_width(), 96u);
  for (double v : plan.apodization()) EXPECT_GT(v, 0);
  const double half = 0.5 * double(plan.options().kernel_width);
  EXPECT_GT(plan.kernel(0), 0);
  for (double u = 0.25; u < half; u += 0.25) {
    EXPECT_GT(plan.kernel(u), 0) << u;
    EXPECT_DOUBLE_EQ(plan.kernel(u), plan.kernel(-u));
    EXPECT_LT(plan.kernel(u), plan.kernel(u - 0.25));
  }
  EXPECT_EQ(plan.kernel(half + 0.01), 0.0);
}

TEST(Nufft, GridPointsReproduceCenteredDft) {
  const std::size_t H = 12, W = 10;
  std::vector<KPoint> k;
  for (std::size_t u = 0; u < H; ++u)
    for (std::size_t v = 0; v < W; ++v)
      k.push_back({(double(u) - double(H / 2)) / double(H), (double(v) - double(W / 2)) / double(W)});
  const auto img = oracle::random_image(H, W, 17);
  auto s = NufftPlan(H, W).forward(img, k);
  for (auto &v : s) v /= std::sqrt(double(H * W));
  EXPECT_LT(oracle::rel_l2(s, oracle::centered_dft2(img.flat(), H, W, false)), 1e-5);
}

TEST(Nufft, SampleDensityOfUniformWeights) {
  NufftPlan plan(16, 16);
  const auto k = oracle::random_points(40, 18);
  const auto table = plan.prepare(k);
  const auto d = plan.sample_density(std::vector<double>(40, 1.0), table);
  for (double v : d) EXPECT_GT(v, 0);
}

TEST(Nufft, RejectsBadInput) {
  NufftPlan plan(8, 8);
  std::vector<KPoint> bad{{0.6, 0.0}};
  EXPECT_THROW(plan.prepare(bad), ValidationError);
  bad = {{std::nan(""), 0.0}};
  EXPECT_THROW(plan.prepare(bad), ValidationError);
  EXPECT_THROW(NufftPlan(0, 8), ValidationError);
  const auto k = oracle::random_points(4, 1);
  EXPECT_THROW(plan.forward(ComplexImage(4, 4), k), ValidationError);
}
