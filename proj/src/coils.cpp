#include "kforge/coils.hpp"

#include "kforge/error.hpp"
#include "kforge/fft.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace kforge {

CompressedKSpace svd_coil_compress(const MultiCoilKSpace &ksp, std::size_t n_virtual, std::size_t max_points,
                                   std::uint64_t seed) {
  const std::size_t T = ksp.frames(), C = ksp.coils(), P = ksp.height() * ksp.width();
  require(n_virtual >= 1, "svd_coil_compress: need at least one virtual coil");
  require(n_virtual <= C, "svd_coil_compress: " + std::to_string(n_virtual) + " virtual coils requested from " +
                              std::to_string(C) + " physical coils");
  require(max_points >= C, "svd_coil_compress: max_points must be >= number of coils");

  const std::size_t total = T * P;
  std::vector<std::size_t> rows(total);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  if (total > max_points) {
    std::vector<std::size_t> picked;
    picked.reserve(max_points);
    Rng rng(seed);
    std::sample(rows.begin(), rows.end(), std::back_inserter(picked), max_points, rng);
    rows = std::move(picked);
  }

  Eigen::MatrixXcd A(Eigen::Index(rows.size()), Eigen::Index(C));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const std::size_t t = rows[r] / P, p = rows[r] % P;
    for (std::size_t c = 0; c < C; ++c) A(Eigen::Index(r), Eigen::Index(c)) = ksp.data[(t * C + c) * P + p];
  }
  // Right singular vectors of A from the C x C Gram matrix; C is small, so this is cheap and accurate.
  const Eigen::MatrixXcd G = A.adjoint() * A;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(G);
  if (eig.info() != Eigen::Success) throw NumericalError("svd_coil_compress: eigendecomposition failed");
  const auto &ev = eig.eigenvalues(); // ascending
  const auto &V = eig.eigenvectors();

  CompressionMatrix cm;
  cm.matrix = Tensor<cplx, 2>(C, n_virtual);
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t v = 0; v < n_virtual; ++v)
      cm.matrix(c, v) = V(Eigen::Index(c), Eigen::Index(C - 1 - v));
  double kept = 0, all = 0;
  for (std::size_t i = 0; i < C; ++i) {
    const double e = std::max(0.0, ev(Eigen::Index(C - 1 - i)));
    cm.singular_values.push_back(std::sqrt(e));
    all += e;
    if (i < n_virtual) kept += e;
  }
  cm.retained_energy = all > 0 ? kept / all : 1.0;

  return {MultiCoilKSpace{apply_compression(ksp.data, cm)}, std::move(cm)};
}

Tensor<cplx, 4> apply_compression(const Tensor<cplx, 4> &data, const CompressionMatrix &cm) {
  const std::size_t T = data.dim(0), C = data.dim(1), P = data.dim(2) * data.dim(3), V = cm.coils_out();
  require(C == cm.coils_in(), "apply_compression: coil count does not match compression matrix");
  Tensor<cplx, 4> out(T, V, data.dim(2), data.dim(3));
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t c = 0; c < C; ++c) {
      const cplx *src = data.data() + (t * C + c) * P;
      for (std::size_t v = 0; v < V; ++v) {
        const cplx m = cm.matrix(c, v);
        cplx *dst = out.data() + (t * V + v) * P;
        for (std::size_t p = 0; p < P; ++p) dst[p] += src[p] * m;
      }
    }
  return out;
}

CoilMapSet apply_compression(const CoilMapSet &maps, const CompressionMatrix &cm) {
  Tensor<cplx, 4> wrapped(std::size_t{1}, maps.n_coils(), maps.height(), maps.width());
  std::copy(maps.maps.begin(), maps.maps.end(), wrapped.begin());
  const auto out = apply_compression(wrapped, cm);
  CoilMapSet res{Tensor<cplx, 3>(cm.coils_out(), maps.height(), maps.width())};
  std::copy(out.begin(), out.end(), res.maps.begin());
  return res;
}

MagnitudeImageSeries rss_combine(const MultiCoilImageSeries &mc) {
  const std::size_t T = mc.dim(0), C = mc.dim(1), H = mc.dim(2), W = mc.dim(3), P = H * W;
  MagnitudeImageSeries out(T, H, W);
  for (std::size_t t = 0; t < T; ++t) {
    double *dst = out.data() + t * P;
    for (std::size_t c = 0; c < C; ++c) {
      const cplx *src = mc.data() + (t * C + c) * P;
      for (std::size_t p = 0; p < P; ++p) dst[p] += std::norm(src[p]);
    }
    for (std::size_t p = 0; p < P; ++p) dst[p] = std::sqrt(dst[p]);
  }
  return out;
}

ComplexImageSeries coil_combine(const MultiCoilImageSeries &mc, const CoilMapSet &maps) {
  const std::size_t T = mc.dim(0), C = mc.dim(1), H = mc.dim(2), W = mc.dim(3), P = H * W;
  require(maps.n_coils() == C && maps.height() == H && maps.width() == W,
          "coil_combine: maps " + shape_string(maps.maps) + " do not match coil images " + shape_string(mc));
  ComplexImageSeries out(T, H, W);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t c = 0; c < C; ++c) {
      const cplx *src = mc.data() + (t * C + c) * P;
      const cplx *s = maps.maps.data() + c * P;
      cplx *dst = out.data() + t * P;
      for (std::size_t p = 0; p < P; ++p) dst[p] += std::conj(s[p]) * src[p];
    }
  return out;
}

SensitivityEstimate estimate_sensitivities(const MultiCoilImageSeries &images, double floor) {
  const std::size_t T = images.dim(0), C = images.dim(1), H = images.dim(2), W = images.dim(3), P = H * W;
  require(T >= 1 && C >= 1, "estimate_sensitivities: empty input");
  SensitivityEstimate est;
  est.maps.maps = Tensor<cplx, 3>(C, H, W);
  auto &m = est.maps.maps;
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t i = 0; i < C * P; ++i) m[i] += images[t * C * P + i];
  for (auto &v : m) v /= double(T);
  for (std::size_t p = 0; p < P; ++p) {
    double ss = 0;
    for (std::size_t c = 0; c < C; ++c) ss += std::norm(m[c * P + p]);
    const double rss = std::sqrt(ss);
    for (std::size_t c = 0; c < C; ++c) {
      if (rss > floor)
        m[c * P + p] /= rss;
      else
        m[c * P + p] = 0;
    }
    if (!(rss > floor)) ++est.empty_pixels;
  }
  est.degenerate = est.empty_pixels == P;
  return est;
}

SensitivityEstimate estimate_sensitivities(const MultiCoilKSpace &ksp, double floor) {
  const std::size_t T = ksp.frames(), C = ksp.coils(), H = ksp.height(), W = ksp.width(), P = H * W;
  MultiCoilImageSeries avg(std::size_t{1}, C, H, W);
  std::vector<cplx> mean(C * P);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t i = 0; i < C * P; ++i) mean[i] += ksp.data[t * C * P + i];
  for (auto &v : mean) v /= double(T);
  for (std::size_t c = 0; c < C; ++c)
    centered_ifft2(std::span<const cplx>(mean).subspan(c * P, P), avg.flat().subspan(c * P, P), H, W);
  return estimate_sensitivities(avg, floor);
}

} // namespace kforge
