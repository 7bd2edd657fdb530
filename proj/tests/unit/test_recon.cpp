#include "kforge/coils.hpp"
#include "kforge/error.hpp"
#include "kforge/metrics.hpp"
#include "kforge/pipeline.hpp"
#include "kforge/recon.hpp"
#include "kforge/toy_video.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace kforge;

namespace {

constexpr std::size_t T = 8, H = 32, W = 32, P = H * W;

struct Setup {
  VideoKSpace video;
  CoilMapSet maps;
};

const Setup &setup() {
  static const Setup s = [] {
    PipelineConfig cfg;
    cfg.frames = T;
    cfg.sim.n_coils = 8;
    cfg.virtual_coils = 4;
    Rng rng(3);
    const auto sim = simulate(toy_video(T, H, W, 5), cfg.sim, rng);
    Setup out{compress_video("v", 1, sim.kspace, {}, cfg), {}};
    out.maps = estimate_sensitivities(out.video.kspace).maps;
    return out;
  }();
  return s;
}

CartesianMask small_mask(std::uint64_t seed = 11) {
  Rng rng(seed);
  return cartesian_mask(T, H, CartesianConfig{4, 5, 0.6, 1}, rng);
}

ComplexImageSeries random_series(std::uint64_t seed) {
  ComplexImageSeries x(T, H, W);
  const auto v = oracle::random_complex(x.size(), seed);
  std::copy(v.begin(), v.end(), x.begin());
  return x;
}

Measurements random_measurements(const EncodingOperator &op, std::uint64_t seed) {
  Measurements y(op.frames(), op.coils(), op.samples());
  const auto v = oracle::random_complex(y.size(), seed);
  std::copy(v.begin(), v.end(), y.begin());
  return y;
}

cplx dot(std::span<const cplx> a, std::span<const cplx> b) {
  cplx s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
  return s;
}

double rel(const ComplexImageSeries &a, const ComplexImageSeries &b) { return oracle::rel_l2(a.flat(), b.flat()); }

std::vector<EncodingOperator> operators() {
  SpiralConfig sc;
  sc.matrix = H;
  sc.samples_per_arm = 64;
  return {EncodingOperator::cartesian(small_mask(), W, setup().maps),
          EncodingOperator::noncartesian(radial_trajectory(T, 13, W), H, W, setup().maps),
          EncodingOperator::noncartesian(spiral_trajectory(T, sc), H, W, setup().maps)};
}

} // namespace

TEST(Encoding, AdjointIdentity) {
  for (const auto &op : operators()) {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      const auto x = random_series(100 + seed);
      const auto y = random_measurements(op, 200 + seed);
      const cplx lhs = dot(op.forward(x).flat(), y.flat());
      const cplx rhs = dot(x.flat(), op.adjoint(y).flat());
      EXPECT_LT(std::abs(lhs - rhs) / std::abs(lhs), 1e-10) << int(op.modality());
    }
  }
}

TEST(Encoding, ToeplitzNormalMatchesForwardThenAdjoint) {
  for (const auto &op : operators()) {
    const auto x = random_series(7);
    const auto ref = op.adjoint(op.forward(x));
    EXPECT_LT(rel(op.normal(x), ref), 1e-5) << int(op.modality());
  }
}

TEST(Encoding, NormalEnergyIsSquaredNorm) {
  for (const auto &op0 : operators()) {
    const auto op = op0.with_maps(std::nullopt);
    const auto x = random_series(8);
    const auto y = op.forward(x);
    for (std::size_t t = 0; t < T; ++t) {
      double ref = 0;
      for (auto v : y.slab(t)) ref += std::norm(v);
      EXPECT_NEAR(op.normal_energy(t, x.slab(t)), ref, 1e-5 * ref) << int(op.modality());
    }
  }
}

TEST(Encoding, SinglePrecisionNormalCloseToDouble) {
  for (const auto &op : operators()) {
    const auto x = random_series(9);
    std::vector<cplx> outd(P);
    std::vector<cplxf> inf(P), outf(P);
    for (std::size_t p = 0; p < P; ++p) inf[p] = cplxf(x[p]);
    op.normal_coil(2, x.slab(0), outd);
    op.normal_coil(2, inf, outf);
    std::vector<cplx> back(outf.begin(), outf.end());
    EXPECT_LT(oracle::rel_l2(back, outd), 1e-5) << int(op.modality());
  }
}

TEST(Encoding, PreconditionerIsExactInverseForCartesian) {
  const auto op = operators()[0];
  const auto x = random_series(10);
  std::vector<cplx> ax(P), back(P);
  op.normal_coil(1, x.slab(1), ax);
  for (std::size_t p = 0; p < P; ++p) ax[p] += 0.3 * x[P + p];
  op.precondition_coil(1, 0.3, ax, back);
  EXPECT_LT(oracle::rel_l2(back, x.slab(1)), 1e-12);
  EXPECT_THROW(op.precondition_coil(1, 0.0, ax, back), ValidationError);
}

TEST(Encoding, GridTrajectoryReproducesCartesianOperator) {
  const auto mask = small_mask();
  const auto opc = EncodingOperator::cartesian(mask, W, setup().maps);
  const auto opn = EncodingOperator::noncartesian(trajectory_from_mask(mask, W), H, W, setup().maps);
  const auto &k = setup().video.kspace;
  EXPECT_LT(rel(zero_filled(opn.sample(k), opn), zero_filled(opc.sample(k), opc)), 1e-5);
  const auto x = random_series(12);
  EXPECT_LT(rel(opn.normal(x), opc.normal(x)), 1e-5);
}

TEST(Encoding, RejectsMismatchedShapes) {
  const auto op = operators()[0];
  EXPECT_THROW(op.forward(ComplexImageSeries(T, H, W + 1)), ValidationError);
  EXPECT_THROW(op.adjoint(Measurements(T, 3, op.samples())), ValidationError);
  EXPECT_THROW(op.with_maps(std::nullopt).maps(), ValidationError);
}

TEST(ZeroFilled, FullSamplingRecoversTruth) {
  const auto &k = setup().video.kspace;
  const auto op = EncodingOperator::cartesian(full_cartesian_mask(T, H), W, setup().maps);
  const auto zf = zero_filled(op.sample(k), op);
  const auto truth = coil_combine(ifft2_inverse(k), setup().maps);
  EXPECT_LT(rel(zf, truth), 1e-12);
  MagnitudeImageSeries a(T, H, W), b(T, H, W);
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i] = std::abs(zf[i]);
    b[i] = std::abs(truth[i]);
  }
  EXPECT_GE(ssim(a, b), 0.999);
}

TEST(ZeroFilled, GridTrajectoryDensityCompensatedMatchesCartesian) {
  const auto tr = cartesian_grid_trajectory(T, H, W);
  const auto op = EncodingOperator::noncartesian(tr, H, W, setup().maps);
  const auto &k = setup().video.kspace;
  const auto truth = coil_combine(ifft2_inverse(k), setup().maps);
  EXPECT_LT(rel(zero_filled(op.sample(k), op), truth), 1e-5);
}

class Cs : public ::testing::Test {
protected:
  static Measurements data(const EncodingOperator &op) { return op.sample(setup().video.kspace); }
};

TEST_F(Cs, ObjectiveMonotone) {
  for (const auto &op : operators()) {
    CsConfig c;
    c.iterations = 15;
    const auto r = cs_temporal_tv(data(op), op, c);
    ASSERT_EQ(r.objective.size(), 16u);
    for (std::size_t k = 1; k < r.objective.size(); ++k)
      EXPECT_LE(r.objective[k], r.objective[k - 1] * (1 + 1e-6)) << int(op.modality()) << " it " << k;
  }
}

TEST_F(Cs, ObjectiveMatchesDefinition) {
  const auto op = operators()[1];
  const auto y = data(op);
  CsConfig c;
  c.iterations = 3;
  const auto r = cs_temporal_tv(y, op, c);
  const auto ex = op.forward(r.solution);
  double fid = 0, tv = 0;
  for (std::size_t i = 0; i < y.size(); ++i) fid += std::norm(ex[i] - y[i]);
  for (std::size_t t = 0; t + 1 < T; ++t)
    for (std::size_t p = 0; p < P; ++p) tv += std::abs(r.solution[(t + 1) * P + p] - r.solution[t * P + p]);
  double yy = 0;
  for (auto v : y) yy += std::norm(v);
  const double s = r.scale, ref = 0.5 * fid + c.lambda * s * tv;
  // the operator evaluates the data term through its normal operator; gridding error enters at ~1e-6
  EXPECT_NEAR(cs_objective(r.solution, y, op, c.lambda * s), ref, 1e-5 * yy);
  EXPECT_NEAR(r.objective.back(), ref / (s * s), 1e-5 * yy / (s * s));
}

TEST_F(Cs, ZeroLambdaFullSamplingGivesZeroFilled) {
  const auto op = EncodingOperator::cartesian(full_cartesian_mask(T, H), W, setup().maps);
  const auto y = data(op);
  CsConfig c;
  c.lambda = 0;
  EXPECT_LT(rel(cs_temporal_tv(y, op, c).solution, zero_filled(y, op)), 1e-4);
}

TEST_F(Cs, LargeLambdaFlattensTime) {
  for (const auto &op : {operators()[0], operators()[1]}) {
    CsConfig c;
    c.lambda = 1e3;
    const auto r = cs_temporal_tv(data(op), op, c);
    ComplexImageSeries mean(std::size_t{1}, H, W);
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t p = 0; p < P; ++p) mean[p] += r.solution[t * P + p] / double(T);
    double nm = 0;
    for (auto v : mean) nm += std::norm(v);
    for (std::size_t t = 0; t < T; ++t) {
      double d = 0;
      for (std::size_t p = 0; p < P; ++p) d += std::norm(r.solution[t * P + p] - mean[p]);
      EXPECT_LT(std::sqrt(d / nm), 1e-3) << int(op.modality()) << " frame " << t;
    }
  }
}

TEST_F(Cs, ScaleEquivariant) {
  for (const auto &op : {operators()[0], operators()[1]}) {
    const auto y = data(op);
    Measurements y2 = y;
    for (auto &v : y2) v *= 37.0;
    CsConfig c;
    c.iterations = 10;
    auto a = cs_temporal_tv(y, op, c).solution;
    const auto b = cs_temporal_tv(y2, op, c).solution;
    for (auto &v : a) v *= 37.0;
    EXPECT_LT(rel(b, a), 1e-6) << int(op.modality());
  }
}

TEST_F(Cs, GridTrajectoryAgreesWithCartesian) {
  const auto mask = small_mask();
  const auto opc = EncodingOperator::cartesian(mask, W, setup().maps);
  const auto opn = EncodingOperator::noncartesian(trajectory_from_mask(mask, W), H, W, setup().maps);
  const auto rc = cs_temporal_tv(data(opc), opc), rn = cs_temporal_tv(data(opn), opn);
  EXPECT_LT(rel(rn.solution, rc.solution), 1e-3);
}

TEST_F(Cs, RejectsSingleFrameAndBadConfig) {
  CartesianMask one = full_cartesian_mask(1, H);
  const auto op = EncodingOperator::cartesian(one, W, setup().maps);
  EXPECT_THROW(cs_temporal_tv(Measurements(1, 4, P), op), ValidationError);
  const auto op8 = operators()[0];
  CsConfig c;
  c.lambda = -1;
  EXPECT_THROW(cs_temporal_tv(data(op8), op8, c), ValidationError);
  EXPECT_THROW(cs_temporal_tv(data(op8), op8.with_maps(std::nullopt)), ValidationError);
}
