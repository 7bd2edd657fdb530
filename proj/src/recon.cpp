#include "kforge/recon.hpp"

#include "kforge/coils.hpp"
#include "kforge/error.hpp"
#include "kforge/fft.hpp"

#include <algorithm>
#include <cmath>

namespace kforge {

namespace {

// T. Chan's optimal circulant approximation of the H x W block-Toeplitz matrix with kernel K, returned as
// its eigenvalues. `k` is the 2H x 2W adjoint of ones, pixel (y, x) holding HW * K[y - H, x - W].
std::vector<double> chan_spectrum(const ComplexImage &k, std::size_t H, std::size_t W) {
  const double inv = 1.0 / double(H * W);
  auto K = [&](long dy, long dx) { return k(std::size_t(dy + long(H)), std::size_t(dx + long(W))) * inv; };
  std::vector<cplx> c(H * W);
  for (std::size_t j1 = 0; j1 < H; ++j1)
    for (std::size_t j2 = 0; j2 < W; ++j2) {
      const double a1 = double(H - j1), b1 = double(j1), a2 = double(W - j2), b2 = double(j2);
      const long y = long(j1), x = long(j2), yh = y - long(H), xw = x - long(W);
      c[j1 * W + j2] = (a1 * a2 * K(y, x) + b1 * a2 * K(yh, x) + a1 * b2 * K(y, xw) + b1 * b2 * K(yh, xw)) * inv;
    }
  fft2_plan(H, W)->forward(c);
  std::vector<double> eig(H * W);
  for (std::size_t i = 0; i < eig.size(); ++i) eig[i] = std::max(0.0, c[i].real());
  return eig;
}

// Toeplitz apply on the 2H x 2W padded grid: zero-pad, transform, multiply by the kernel spectrum, crop.
template <class Real>
void toeplitz_apply(const BasicFftPlan<Real> &rows, const BasicFftPlan<Real> &cols, const std::vector<Real> &k,
                    std::size_t H, std::size_t W, std::span<const std::complex<Real>> in,
                    std::span<std::complex<Real>> out) {
  const std::size_t W2 = 2 * W;
  thread_local AlignedVector<std::complex<Real>> pad;
  pad.assign(4 * H * W, {});
  for (std::size_t y = 0; y < H; ++y) std::copy_n(in.data() + y * W, W, pad.data() + y * W2);
  rows.forward(pad);
  cols.forward(pad);
  for (std::size_t i = 0; i < pad.size(); ++i) pad[i] *= k[i];
  cols.backward(pad);
  rows.backward(pad);
  for (std::size_t y = 0; y < H; ++y) std::copy_n(pad.data() + y * W2, W, out.data() + y * W);
}

// in^H T in for the same padded Toeplitz operator: only the forward half is needed.
double toeplitz_energy(const FftPlan &rows, const FftPlan &cols, const std::vector<double> &k, std::size_t H,
                       std::size_t W, std::span<const cplx> in) {
  const std::size_t W2 = 2 * W;
  thread_local AlignedBuffer pad;
  pad.assign(4 * H * W, {});
  for (std::size_t y = 0; y < H; ++y) std::copy_n(in.data() + y * W, W, pad.data() + y * W2);
  rows.forward(pad);
  cols.forward(pad);
  double e = 0;
  for (std::size_t i = 0; i < pad.size(); ++i) e += k[i] * std::norm(pad[i]);
  return e;
}

template <class Real>
void circulant_solve(const BasicFftPlan<Real> &plan, const std::vector<Real> &eig, Real shift,
                     std::span<const std::complex<Real>> in, std::span<std::complex<Real>> out) {
  thread_local AlignedVector<std::complex<Real>> buf;
  buf.assign(in.begin(), in.end());
  plan.forward(buf);
  const Real inv = Real(1) / Real(buf.size());
  for (std::size_t i = 0; i < buf.size(); ++i) buf[i] *= inv / (eig[i] + shift);
  plan.backward(buf);
  std::copy(buf.begin(), buf.end(), out.begin());
}

template <class To, class From> std::vector<To> narrow(const std::vector<From> &v) {
  return std::vector<To>(v.begin(), v.end());
}

} // namespace

struct EncodingOperator::Shared {
  // cartesian
  std::vector<std::uint8_t> rows; // T x H
  // non-Cartesian
  std::unique_ptr<NufftPlan> plan;
  std::vector<GriddingTable> tables;
  std::vector<double> dcf;                // T x M
  // Toeplitz normal operator on the 2H x 2W zero-padded grid; the row passes skip the all-zero
  // (forward) and discarded (backward) lower half.
  std::shared_ptr<const FftPlan> pad_rows; // first H rows of 2H x 2W
  std::shared_ptr<const FftPlan> pad_cols; // all 2W columns
  std::vector<std::vector<double>> psf_hat; // per frame, 2H x 2W, already divided by 4HW
  std::vector<std::vector<double>> circ_eig; // per frame, H x W spectrum of T. Chan's circulant fit to K
  // single-precision copies for the inner solver
  std::shared_ptr<const FftPlanF> pad_rows_f, pad_cols_f, circ_f;
  std::vector<std::vector<float>> psf_hat_f, circ_eig_f;
};

EncodingOperator EncodingOperator::cartesian(const CartesianMask &mask, std::size_t width,
                                             std::optional<CoilMapSet> maps) {
  require(mask.frames >= 1 && mask.lines >= 1 && width >= 1, "encoding operator: empty Cartesian mask");
  require(mask.mask.size() == mask.frames * mask.lines, "encoding operator: malformed mask");
  EncodingOperator op;
  op.modality_ = Modality::cartesian_masked;
  op.frames_ = mask.frames;
  op.h_ = mask.lines;
  op.w_ = width;
  op.m_ = op.h_ * op.w_;
  auto sh = std::make_shared<Shared>();
  sh->rows = mask.mask;
  op.shared_ = std::move(sh);
  return op.with_maps(std::move(maps));
}

EncodingOperator EncodingOperator::noncartesian(const Trajectory &traj, std::size_t height, std::size_t width,
                                                std::optional<CoilMapSet> maps, NufftOptions opts) {
  traj.validate();
  require(height >= 1 && width >= 1, "encoding operator: empty image size");
  EncodingOperator op;
  op.modality_ = Modality::noncartesian;
  op.frames_ = traj.frames;
  op.h_ = height;
  op.w_ = width;
  op.m_ = traj.samples;
  auto sh = std::make_shared<Shared>();
  sh->plan = std::make_unique<NufftPlan>(height, width, opts);
  sh->dcf = traj.dcf;
  if (sh->dcf.size() != traj.coords.size()) sh->dcf.assign(traj.coords.size(), 1.0 / double(traj.samples));

  // Toeplitz embedding of E^H E: kernel K[d] = (1/HW) sum_i exp(2 pi i k_i . d), d in [-H, H) x [-W, W).
  const std::size_t H2 = 2 * height, W2 = 2 * width;
  NufftPlan big(H2, W2, opts);
  const auto pad_fft = fft2_plan(H2, W2);
  sh->pad_rows = fft_plan(H2, W2, FftAxis::rows, height);
  sh->pad_cols = fft_plan(H2, W2, FftAxis::cols, 0);
  sh->pad_rows_f = fft_plan<float>(H2, W2, FftAxis::rows, height);
  sh->pad_cols_f = fft_plan<float>(H2, W2, FftAxis::cols, 0);
  sh->circ_f = fft_plan<float>(height, width);
  const std::vector<cplx> ones(traj.samples, cplx(1.0, 0.0));
  const double inv = 1.0 / (double(height * width) * double(H2 * W2));
  for (std::size_t t = 0; t < traj.frames; ++t) {
    const auto coords = traj.frame_coords(t);
    sh->tables.push_back(sh->plan->prepare(coords));
    const ComplexImage k = big.adjoint(ones, coords);
    std::vector<cplx> c(H2 * W2);
    for (std::size_t y = 0; y < H2; ++y)
      for (std::size_t x = 0; x < W2; ++x) {
        // pixel y of the 2H plan sits at offset d = y - H; store at d mod 2H
        const std::size_t cy = (y + height) % H2, cx = (x + width) % W2;
        c[cy * W2 + cx] = k(y, x) * inv;
      }
    sh->circ_eig.push_back(chan_spectrum(k, height, width));
    pad_fft->forward(c);
    // K is Hermitian except on the d = -H / -W edge, which never reaches the cropped output,
    // so the real part of its spectrum gives the same operator.
    std::vector<double> ct(H2 * W2);
    for (std::size_t i = 0; i < ct.size(); ++i) ct[i] = c[i].real();
    sh->psf_hat.push_back(std::move(ct));
    sh->psf_hat_f.push_back(narrow<float>(sh->psf_hat.back()));
    sh->circ_eig_f.push_back(narrow<float>(sh->circ_eig.back()));
  }
  op.shared_ = std::move(sh);
  return op.with_maps(std::move(maps));
}

const CoilMapSet &EncodingOperator::maps() const {
  if (!maps_) throw ValidationError("encoding operator: no coil maps attached");
  return *maps_;
}

EncodingOperator EncodingOperator::with_maps(std::optional<CoilMapSet> maps) const {
  if (maps)
    require(maps->height() == h_ && maps->width() == w_ && maps->n_coils() >= 1,
            "encoding operator: coil maps " + shape_string(maps->maps) + " do not match image size " +
                std::to_string(h_) + "x" + std::to_string(w_));
  EncodingOperator op = *this;
  op.maps_ = std::move(maps);
  return op;
}

void EncodingOperator::check(const Measurements &y) const {
  require(y.dim(0) == frames_ && y.dim(2) == m_,
          "encoding operator: measurements " + shape_string(y) + " do not match " + std::to_string(frames_) +
              " frames x " + std::to_string(m_) + " samples");
  if (maps_)
    require(y.dim(1) == maps_->n_coils(), "encoding operator: measurements have " + std::to_string(y.dim(1)) +
                                              " coils, maps have " + std::to_string(maps_->n_coils()));
}

Measurements EncodingOperator::sample(const MultiCoilKSpace &full) const {
  require(full.frames() == frames_ && full.height() == h_ && full.width() == w_,
          "encoding operator: k-space " + shape_string(full.data) + " does not match operator");
  const std::size_t C = full.coils();
  Measurements y(frames_, C, m_);
  if (modality_ == Modality::cartesian_masked) {
    for (std::size_t t = 0; t < frames_; ++t)
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t r = 0; r < h_; ++r) {
          if (!shared_->rows[t * h_ + r]) continue;
          const cplx *src = full.data.data() + ((t * C + c) * h_ + r) * w_;
          std::copy(src, src + w_, y.data() + (t * C + c) * m_ + r * w_);
        }
    return y;
  }
  return forward_coils(ifft2_inverse(full));
}

Measurements EncodingOperator::forward_coils(const MultiCoilImageSeries &imgs) const {
  require(imgs.dim(0) == frames_ && imgs.dim(2) == h_ && imgs.dim(3) == w_,
          "encoding operator: coil images " + shape_string(imgs) + " do not match operator");
  const std::size_t C = imgs.dim(1), P = h_ * w_;
  Measurements y(frames_, C, m_);
  const double s = 1.0 / std::sqrt(double(P));
  ComplexImage img(h_, w_);
  for (std::size_t t = 0; t < frames_; ++t)
    for (std::size_t c = 0; c < C; ++c) {
      const auto in = std::span<const cplx>(imgs.data() + (t * C + c) * P, P);
      auto out = std::span<cplx>(y.data() + (t * C + c) * m_, m_);
      if (modality_ == Modality::cartesian_masked) {
        centered_fft2(in, out, h_, w_);
        for (std::size_t r = 0; r < h_; ++r)
          if (!shared_->rows[t * h_ + r]) std::fill_n(out.begin() + std::ptrdiff_t(r * w_), w_, cplx{});
      } else {
        std::copy(in.begin(), in.end(), img.begin());
        const auto k = shared_->plan->forward(img, shared_->tables[t]);
        for (std::size_t i = 0; i < m_; ++i) out[i] = k[i] * s;
      }
    }
  return y;
}

MultiCoilImageSeries EncodingOperator::adjoint_coils(const Measurements &y, bool density_compensated) const {
  require(y.dim(0) == frames_ && y.dim(2) == m_, "encoding operator: measurements " + shape_string(y) +
                                                      " do not match operator");
  const std::size_t C = y.dim(1), P = h_ * w_;
  MultiCoilImageSeries out(frames_, C, h_, w_);
  std::vector<cplx> buf(m_);
  for (std::size_t t = 0; t < frames_; ++t)
    for (std::size_t c = 0; c < C; ++c) {
      const auto in = std::span<const cplx>(y.data() + (t * C + c) * m_, m_);
      auto dst = std::span<cplx>(out.data() + (t * C + c) * P, P);
      if (modality_ == Modality::cartesian_masked) {
        std::copy(in.begin(), in.end(), buf.begin());
        for (std::size_t r = 0; r < h_; ++r)
          if (!shared_->rows[t * h_ + r]) std::fill_n(buf.begin() + std::ptrdiff_t(r * w_), w_, cplx{});
        centered_ifft2(buf, dst, h_, w_);
      } else {
        const auto dcf = std::span<const double>(shared_->dcf.data() + t * m_, m_);
        const double s = density_compensated ? std::sqrt(double(P)) : 1.0 / std::sqrt(double(P));
        const ComplexImage img =
            shared_->plan->adjoint(in, shared_->tables[t], density_compensated ? dcf : std::span<const double>{});
        for (std::size_t p = 0; p < P; ++p) dst[p] = img[p] * s;
      }
    }
  return out;
}

Measurements EncodingOperator::forward(const ComplexImageSeries &x) const {
  require(x.dim(0) == frames_ && x.dim(1) == h_ && x.dim(2) == w_,
          "encoding operator: image " + shape_string(x) + " does not match operator");
  if (!maps_) {
    MultiCoilImageSeries one(frames_, std::size_t{1}, h_, w_);
    std::copy(x.begin(), x.end(), one.begin());
    return forward_coils(one);
  }
  return forward_coils(apply_coil_maps(x, *maps_));
}

ComplexImageSeries EncodingOperator::adjoint(const Measurements &y, bool density_compensated) const {
  check(y);
  const auto imgs = adjoint_coils(y, density_compensated);
  if (!maps_) {
    require(y.dim(1) == 1, "encoding operator: multi-coil data need coil maps to combine");
    ComplexImageSeries x(frames_, h_, w_);
    std::copy(imgs.begin(), imgs.end(), x.begin());
    return x;
  }
  return coil_combine(imgs, *maps_);
}

bool EncodingOperator::row_sampled(std::size_t t, std::size_t row) const {
  return modality_ == Modality::cartesian_masked && shared_->rows[t * h_ + row] != 0;
}

void EncodingOperator::normal_coil(std::size_t t, std::span<const cplx> in, std::span<cplx> out) const {
  const std::size_t P = h_ * w_;
  if (modality_ == Modality::cartesian_masked) {
    std::vector<cplx> k(P);
    centered_fft2(in, k, h_, w_);
    for (std::size_t r = 0; r < h_; ++r)
      if (!shared_->rows[t * h_ + r]) std::fill_n(k.begin() + std::ptrdiff_t(r * w_), w_, cplx{});
    centered_ifft2(k, out, h_, w_);
    return;
  }
  toeplitz_apply(*shared_->pad_rows, *shared_->pad_cols, shared_->psf_hat[t], h_, w_, in, out);
}

void EncodingOperator::normal_coil(std::size_t t, std::span<const cplxf> in, std::span<cplxf> out) const {
  if (modality_ == Modality::cartesian_masked) {
    std::vector<cplx> a(in.begin(), in.end()), b(a.size());
    normal_coil(t, a, b);
    std::copy(b.begin(), b.end(), out.begin());
    return;
  }
  toeplitz_apply(*shared_->pad_rows_f, *shared_->pad_cols_f, shared_->psf_hat_f[t], h_, w_, in, out);
}

double EncodingOperator::normal_energy(std::size_t t, std::span<const cplx> in) const {
  if (modality_ == Modality::cartesian_masked) {
    std::vector<cplx> k(h_ * w_);
    centered_fft2(in, k, h_, w_);
    double e = 0;
    for (std::size_t r = 0; r < h_; ++r)
      if (shared_->rows[t * h_ + r])
        for (std::size_t i = r * w_; i < (r + 1) * w_; ++i) e += std::norm(k[i]);
    return e;
  }
  return toeplitz_energy(*shared_->pad_rows, *shared_->pad_cols, shared_->psf_hat[t], h_, w_, in);
}

void EncodingOperator::precondition_coil(std::size_t t, double shift, std::span<const cplx> in,
                                         std::span<cplx> out) const {
  const std::size_t P = h_ * w_;
  require(shift > 0, "encoding operator: preconditioner shift must be positive");
  if (modality_ == Modality::cartesian_masked) {
    // A^H A is already diagonal in k-space: this is the exact inverse.
    std::vector<cplx> k(P);
    centered_fft2(in, k, h_, w_);
    for (std::size_t r = 0; r < h_; ++r) {
      const double d = (shared_->rows[t * h_ + r] ? 1.0 : 0.0) + shift;
      for (std::size_t i = r * w_; i < (r + 1) * w_; ++i) k[i] /= d;
    }
    centered_ifft2(k, out, h_, w_);
    return;
  }
  circulant_solve(*fft2_plan(h_, w_), shared_->circ_eig[t], shift, in, out);
}

void EncodingOperator::precondition_coil(std::size_t t, double shift, std::span<const cplxf> in,
                                         std::span<cplxf> out) const {
  if (modality_ == Modality::cartesian_masked) {
    std::vector<cplx> a(in.begin(), in.end()), b(a.size());
    precondition_coil(t, shift, a, b);
    std::copy(b.begin(), b.end(), out.begin());
    return;
  }
  require(shift > 0, "encoding operator: preconditioner shift must be positive");
  circulant_solve(*shared_->circ_f, shared_->circ_eig_f[t], float(shift), in, out);
}

ComplexImageSeries EncodingOperator::normal(const ComplexImageSeries &x) const {
  require(x.dim(0) == frames_ && x.dim(1) == h_ && x.dim(2) == w_,
          "encoding operator: image " + shape_string(x) + " does not match operator");
  const std::size_t P = h_ * w_, C = coils();
  ComplexImageSeries out(frames_, h_, w_);
  std::vector<cplx> a(P), b(P);
  for (std::size_t t = 0; t < frames_; ++t) {
    const cplx *xt = x.data() + t * P;
    cplx *ot = out.data() + t * P;
    for (std::size_t c = 0; c < C; ++c) {
      const cplx *s = maps_ ? maps_->maps.data() + c * P : nullptr;
      for (std::size_t p = 0; p < P; ++p) a[p] = s ? s[p] * xt[p] : xt[p];
      normal_coil(t, a, b);
      for (std::size_t p = 0; p < P; ++p) ot[p] += s ? std::conj(s[p]) * b[p] : b[p];
    }
  }
  return out;
}

Trajectory trajectory_from_mask(const CartesianMask &mask, std::size_t width) {
  require(mask.frames >= 1 && width >= 1, "trajectory_from_mask: empty mask");
  const std::size_t per = mask.count(0);
  for (std::size_t t = 1; t < mask.frames; ++t)
    require(mask.count(t) == per, "trajectory_from_mask: frames sample different numbers of lines");
  Trajectory tr;
  tr.kind = TrajectoryKind::cartesian;
  tr.frames = mask.frames;
  tr.samples = per * width;
  tr.readouts = per;
  tr.readout_length = width;
  tr.matrix_h = mask.lines;
  tr.matrix_w = width;
  const double H = double(mask.lines), W = double(width);
  for (std::size_t t = 0; t < mask.frames; ++t) {
    for (std::size_t r = 0; r < mask.lines; ++r) {
      if (!mask.sampled(t, r)) continue;
      for (std::size_t x = 0; x < width; ++x)
        tr.coords.push_back({(double(r) - double(mask.lines / 2)) / H, (double(x) - double(width / 2)) / W});
      tr.readout_angle.push_back(0.0);
    }
  }
  tr.dcf.assign(tr.coords.size(), 1.0 / (H * W));
  return tr;
}

MultiCoilImageSeries zero_filled_coils(const Measurements &y, const EncodingOperator &op) {
  op.check(y);
  return op.adjoint_coils(y, true);
}

ComplexImageSeries zero_filled(const Measurements &y, const EncodingOperator &op) {
  require(op.has_maps(), "zero_filled: coil maps required for a coil-combined image");
  return op.adjoint(y, true);
}

MagnitudeImageSeries zero_filled_rss(const Measurements &y, const EncodingOperator &op) {
  return rss_combine(zero_filled_coils(y, op));
}

SensitivityEstimate estimate_sensitivities(const Measurements &y, const EncodingOperator &op) {
  op.check(y);
  const std::size_t T = op.frames(), C = y.dim(1), H = op.height(), W = op.width(), P = H * W;
  if (op.modality() == Modality::cartesian_masked) {
    // Average each row over the frames that acquired it.
    MultiCoilKSpace avg{Tensor<cplx, 4>(std::size_t{1}, C, H, W)};
    std::vector<std::size_t> hits(H, 0);
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t p = 0; p < P; ++p) avg.data[c * P + p] += y[(t * C + c) * P + p];
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t r = 0; r < H; ++r) hits[r] += op.row_sampled(t, r);
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t r = 0; r < H; ++r)
        for (std::size_t x = 0; x < W; ++x)
          if (hits[r]) avg.data[(c * H + r) * W + x] /= double(hits[r]);
    return estimate_sensitivities(avg);
  }
  const auto imgs = op.adjoint_coils(y, true);
  MultiCoilImageSeries mean(std::size_t{1}, C, H, W);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t i = 0; i < C * P; ++i) mean[i] += imgs[t * C * P + i];
  return estimate_sensitivities(mean);
}

void CsConfig::validate() const {
  if (!(lambda >= 0)) throw ValidationError("cs: lambda must be >= 0");
  if (iterations < 1) throw ValidationError("cs: iterations must be >= 1");
  if (!(rho_data > 0) || !(rho_tv > 0)) throw ValidationError("cs: ADMM penalties must be > 0");
  if (cg_iterations < 1) throw ValidationError("cs: cg_iterations must be >= 1");
}

namespace {

double tv_norm(const ComplexImageSeries &x) {
  const std::size_t T = x.dim(0), P = x.dim(1) * x.dim(2);
  double s = 0;
  for (std::size_t t = 0; t + 1 < T; ++t)
    for (std::size_t p = 0; p < P; ++p) s += std::abs(x[(t + 1) * P + p] - x[t * P + p]);
  return s;
}

double norm2(std::span<const cplx> a) {
  double s = 0;
  for (const auto &v : a) s += std::norm(v);
  return s;
}

// 0.5 ||E x - y||^2. Non-Cartesian uses the same Toeplitz normal operator as the solver:
// 0.5 <x, E^H E x> - Re <x, E^H y> + 0.5 ||y||^2.
double data_term(const ComplexImageSeries &x, const Measurements &y, const EncodingOperator &op,
                 const ComplexImageSeries *ehy) {
  if (op.modality() == Modality::cartesian_masked) {
    const Measurements r = op.forward(x);
    double s = 0;
    for (std::size_t i = 0; i < r.size(); ++i) s += std::norm(r[i] - y[i]);
    return 0.5 * s;
  }
  ComplexImageSeries local;
  if (!ehy) {
    local = op.adjoint(y, false);
    ehy = &local;
  }
  // x^H E^H E x = sum over frames and coils of ||A_t S_c x_t||^2
  const std::size_t P = op.height() * op.width();
  double quad = 0, lin = 0;
  std::vector<cplx> a(P);
  for (std::size_t t = 0; t < op.frames(); ++t) {
    const cplx *xt = x.data() + t * P;
    for (std::size_t c = 0; c < op.coils(); ++c) {
      const cplx *s = op.has_maps() ? op.maps().maps.data() + c * P : nullptr;
      for (std::size_t p = 0; p < P; ++p) a[p] = s ? s[p] * xt[p] : xt[p];
      quad += op.normal_energy(t, a);
    }
  }
  for (std::size_t i = 0; i < x.size(); ++i) lin += (std::conj(x[i]) * (*ehy)[i]).real();
  return std::max(0.0, 0.5 * quad - lin + 0.5 * norm2(y.flat()));
}

// Solves (rho * S^H S + rho_tv * D^H D) x = rhs for every pixel: a T x T tridiagonal system.
void solve_pixels(const std::vector<double> &sens, double rho, double rho_tv, std::size_t T, std::size_t P,
                  ComplexImageSeries &x) {
  std::vector<double> cp(T);
  std::vector<cplx> dp(T);
  for (std::size_t p = 0; p < P; ++p) {
    const double d0 = rho * sens[p];
    if (!(d0 > 0)) {
      for (std::size_t t = 0; t < T; ++t) x[t * P + p] = 0;
      continue;
    }
    // Thomas algorithm; off-diagonals are -rho_tv.
    const double off = -rho_tv;
    auto diag = [&](std::size_t t) { return d0 + rho_tv * ((t == 0 || t + 1 == T) ? 1.0 : 2.0); };
    double b = diag(0);
    cp[0] = off / b;
    dp[0] = x[p] / b;
    for (std::size_t t = 1; t < T; ++t) {
      b = diag(t) - off * cp[t - 1];
      cp[t] = off / b;
      dp[t] = (x[t * P + p] - off * dp[t - 1]) / b;
    }
    x[(T - 1) * P + p] = dp[T - 1];
    for (std::size_t t = T - 1; t-- > 0;) x[t * P + p] = dp[t] - cp[t] * x[(t + 1) * P + p];
  }
}

// Inner CG tolerance shrinks geometrically over outer iterations so the inexact v-updates stay summable.
constexpr double kCgTighten = 0.8;

cplx soft(cplx a, double tau) {
  const double m = std::abs(a);
  return m > tau ? a * ((m - tau) / m) : cplx{};
}

} // namespace

double cs_objective(const ComplexImageSeries &x, const Measurements &y, const EncodingOperator &op, double lambda) {
  op.check(y);
  return data_term(x, y, op, nullptr) + lambda * tv_norm(x);
}

CsResult cs_temporal_tv(const Measurements &y_in, const EncodingOperator &op, const CsConfig &cfg) {
  cfg.validate();
  op.check(y_in);
  require(op.has_maps(), "cs: coil maps required");
  const std::size_t T = op.frames(), C = op.coils(), H = op.height(), W = op.width(), P = H * W, M = op.samples();
  if (T < 2) throw ValidationError("cs: temporal TV needs at least 2 frames; use a static reconstruction for T=1");

  CsResult res;
  ComplexImageSeries x = zero_filled(y_in, op);
  double scale = 0;
  for (const auto &v : x) scale = std::max(scale, std::abs(v));
  if (!(scale > 0)) {
    res.solution = ComplexImageSeries(T, H, W);
    res.magnitude = MagnitudeImageSeries(T, H, W);
    res.objective.assign(1, 0.5 * norm2(y_in.flat()));
    return res;
  }
  res.scale = scale;
  Measurements y = y_in;
  for (auto &v : y) v /= scale;
  for (auto &v : x) v /= scale;

  const auto &S = op.maps().maps;
  std::vector<double> sens(P, 0.0);
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t p = 0; p < P; ++p) sens[p] += std::norm(S[c * P + p]);

  const bool cart = op.modality() == Modality::cartesian_masked;
  const ComplexImageSeries ehy = cart ? ComplexImageSeries{} : op.adjoint(y, false);
  const MultiCoilImageSeries ahy = cart ? MultiCoilImageSeries{} : op.adjoint_coils(y, false);

  // The TV penalty follows lambda once lambda exceeds it; a fixed small rho_tv crawls in the TV-dominated regime.
  const double r1 = cfg.rho_data, r2 = std::max(cfg.rho_tv, cfg.lambda), tau = cfg.lambda / r2;
  MultiCoilImageSeries v = apply_coil_maps(x, op.maps());
  // A^H A v per (frame, coil), carried through CG so a warm start needs no extra operator apply
  MultiCoilImageSeries nv;
  if (!cart) {
    nv = MultiCoilImageSeries(T, C, H, W);
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t c = 0; c < C; ++c) {
        const std::size_t off = (t * C + c) * P;
        op.normal_coil(t, std::span<const cplx>(v.data() + off, P), std::span<cplx>(nv.data() + off, P));
      }
  }
  MultiCoilImageSeries u1(T, C, H, W);
  ComplexImageSeries z(T - 1, H, W), u2(T - 1, H, W);
  for (std::size_t t = 0; t + 1 < T; ++t)
    for (std::size_t p = 0; p < P; ++p) z[t * P + p] = x[(t + 1) * P + p] - x[t * P + p];

  auto objective = [&](const ComplexImageSeries &xx) {
    return data_term(xx, y, op, cart ? nullptr : &ehy) + cfg.lambda * tv_norm(xx);
  };
  res.objective.push_back(objective(x));

  std::vector<cplx> kbuf(M), w(P);
  AlignedVector<cplxf> r(P), zr(P), pdir(P), ap(P);
  const float r1f = float(r1);
  double cg_tol = cfg.cg_tolerance;
  for (std::size_t it = 0; it < cfg.iterations; ++it, cg_tol *= kCgTighten) {
    // x-update: rhs = r1 S^H (v - u1) + r2 D^H (z - u2)
    std::fill(x.begin(), x.end(), cplx{});
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t c = 0; c < C; ++c) {
        const cplx *vv = v.data() + (t * C + c) * P, *uu = u1.data() + (t * C + c) * P, *s = S.data() + c * P;
        cplx *xt = x.data() + t * P;
        for (std::size_t p = 0; p < P; ++p) xt[p] += r1 * std::conj(s[p]) * (vv[p] - uu[p]);
      }
    for (std::size_t t = 0; t + 1 < T; ++t)
      for (std::size_t p = 0; p < P; ++p) {
        const cplx d = r2 * (z[t * P + p] - u2[t * P + p]);
        x[(t + 1) * P + p] += d;
        x[t * P + p] -= d;
      }
    solve_pixels(sens, r1, r2, T, P, x);

    // v-update: argmin 0.5 ||A v - y||^2 + r1/2 ||v - (S x + u1)||^2, per frame and coil
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t c = 0; c < C; ++c) {
        const std::size_t off = (t * C + c) * P;
        const cplx *s = S.data() + c * P, *xt = x.data() + t * P;
        for (std::size_t p = 0; p < P; ++p) w[p] = s[p] * xt[p] + u1[off + p];
        std::span<cplx> vv(v.data() + off, P);
        if (cart) {
          centered_fft2(w, kbuf, H, W);
          const cplx *yy = y.data() + (t * C + c) * M;
          for (std::size_t row = 0; row < H; ++row) {
            if (!op.row_sampled(t, row)) continue;
            for (std::size_t i = row * W; i < (row + 1) * W; ++i) kbuf[i] = (yy[i] + r1 * kbuf[i]) / (1.0 + r1);
          }
          centered_ifft2(kbuf, vv, H, W);
        } else {
          // Preconditioned CG on (A^H A + r1 I) v = A^H y + r1 w, warm-started from the previous v. The
          // search directions run in single precision; v and the carried A^H A v accumulate in double.
          const cplx *b0 = ahy.data() + off;
          cplx *nvv = nv.data() + off;
          double bb = 0, rr = 0, rz = 0;
          for (std::size_t p = 0; p < P; ++p) {
            const cplx bp = b0[p] + r1 * w[p];
            const cplx rp = bp - nvv[p] - r1 * vv[p];
            bb += std::norm(bp);
            rr += std::norm(rp);
            r[p] = cplxf(rp);
          }
          const double stop = cg_tol * cg_tol * bb;
          if (rr > stop) {
            op.precondition_coil(t, r1, r, zr);
            pdir.assign(zr.begin(), zr.end());
            for (std::size_t p = 0; p < P; ++p) rz += (std::conj(r[p]) * zr[p]).real();
          }
          for (std::size_t k = 0; k < cfg.cg_iterations && rr > stop; ++k) {
            op.normal_coil(t, pdir, ap);
            double pap = 0;
            for (std::size_t p = 0; p < P; ++p) {
              ap[p] += r1f * pdir[p];
              pap += (std::conj(pdir[p]) * ap[p]).real();
            }
            const double alpha = rz / pap;
            const float af = float(alpha);
            rr = 0;
            for (std::size_t p = 0; p < P; ++p) {
              const cplx d(pdir[p]), a(ap[p]);
              vv[p] += alpha * d;
              nvv[p] += alpha * (a - r1 * d);
              r[p] -= af * ap[p];
              rr += std::norm(r[p]);
            }
            if (rr <= stop) break;
            op.precondition_coil(t, r1, r, zr);
            double rz_new = 0;
            for (std::size_t p = 0; p < P; ++p) rz_new += (std::conj(r[p]) * zr[p]).real();
            const float beta = float(rz_new / rz);
            rz = rz_new;
            for (std::size_t p = 0; p < P; ++p) pdir[p] = zr[p] + beta * pdir[p];
          }
        }
      }
    // z-update and dual ascent
    for (std::size_t t = 0; t + 1 < T; ++t)
      for (std::size_t p = 0; p < P; ++p) {
        const std::size_t i = t * P + p;
        const cplx dx = x[(t + 1) * P + p] - x[t * P + p];
        z[i] = soft(dx + u2[i], tau);
        u2[i] += dx - z[i];
      }
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t c = 0; c < C; ++c) {
        const std::size_t off = (t * C + c) * P;
        const cplx *s = S.data() + c * P, *xt = x.data() + t * P;
        for (std::size_t p = 0; p < P; ++p) u1[off + p] += s[p] * xt[p] - v[off + p];
      }

    res.objective.push_back(objective(x));
    ++res.iterations;
    if (cfg.tolerance > 0) {
      const double a = res.objective[res.objective.size() - 2], b = res.objective.back();
      if (std::abs(a - b) <= cfg.tolerance * std::max(std::abs(a), 1e-300)) break;
    }
  }

  res.solution = x;
  for (auto &val : res.solution) val *= scale;
  res.magnitude = MagnitudeImageSeries(T, H, W);
  for (std::size_t i = 0; i < x.size(); ++i) res.magnitude[i] = std::abs(res.solution[i]);
  return res;
}

} // namespace kforge
