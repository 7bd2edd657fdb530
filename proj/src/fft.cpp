#include "kforge/fft.hpp"

#include "kforge/error.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <mutex>
#include <tuple>
#include <vector>

namespace kforge {

namespace {
// FFTW's planner is not thread-safe; execution with new-array API is.
std::mutex &planner_mutex() {
  static std::mutex m;
  return m;
}

template <class Real> struct Fftw;
template <> struct Fftw<double> {
  using complex = fftw_complex;
  using plan = fftw_plan;
  static constexpr auto plan_2d = fftw_plan_dft_2d;
  static constexpr auto plan_many = fftw_plan_many_dft;
  static constexpr auto execute = fftw_execute_dft;
  static constexpr auto destroy = fftw_destroy_plan;
};
template <> struct Fftw<float> {
  using complex = fftwf_complex;
  using plan = fftwf_plan;
  static constexpr auto plan_2d = fftwf_plan_dft_2d;
  static constexpr auto plan_many = fftwf_plan_many_dft;
  static constexpr auto execute = fftwf_execute_dft;
  static constexpr auto destroy = fftwf_destroy_plan;
};

template <class Real> auto *as_fftw(std::complex<Real> *p) {
  return reinterpret_cast<typename Fftw<Real>::complex *>(p);
}
} // namespace

template <class Real>
BasicFftPlan<Real>::BasicFftPlan(std::size_t rows, std::size_t cols, Axis axis, std::size_t lines)
    : rows_(rows), cols_(cols) {
  using F = Fftw<Real>;
  require(rows > 0 && cols > 0, "fft: empty transform size");
  AlignedVector<value_type> scratch(rows * cols);
  auto *d = as_fftw(scratch.data());
  std::lock_guard lock(planner_mutex());
  for (int sign : {FFTW_FORWARD, FFTW_BACKWARD}) {
    typename F::plan p = nullptr;
    if (axis == Axis::both) {
      p = F::plan_2d(int(rows), int(cols), d, d, sign, FFTW_ESTIMATE);
    } else {
      const bool along_rows = axis == Axis::rows;
      const int n = int(along_rows ? cols : rows);
      const std::size_t avail = along_rows ? rows : cols;
      require(lines <= avail, "fft: more lines than the buffer holds");
      const int count = int(lines ? lines : avail);
      const int stride = along_rows ? 1 : int(cols), dist = along_rows ? int(cols) : 1;
      p = F::plan_many(1, &n, count, d, nullptr, stride, dist, d, nullptr, stride, dist, sign, FFTW_ESTIMATE);
    }
    if (!p) throw NumericalError("fft: FFTW planning failed");
    (sign == FFTW_FORWARD ? fwd_ : bwd_) = p;
  }
}

template <class Real> BasicFftPlan<Real>::~BasicFftPlan() {
  std::lock_guard lock(planner_mutex());
  if (fwd_) Fftw<Real>::destroy(static_cast<typename Fftw<Real>::plan>(fwd_));
  if (bwd_) Fftw<Real>::destroy(static_cast<typename Fftw<Real>::plan>(bwd_));
}

template <class Real> void BasicFftPlan<Real>::execute(std::span<value_type> buf, void *plan) const {
  require(buf.size() == rows_ * cols_, "fft: buffer size mismatch");
  const auto p = static_cast<typename Fftw<Real>::plan>(plan);
  if (reinterpret_cast<std::uintptr_t>(buf.data()) % 64 == 0) {
    Fftw<Real>::execute(p, as_fftw(buf.data()), as_fftw(buf.data()));
    return;
  }
  thread_local AlignedVector<value_type> stage;
  stage.assign(buf.begin(), buf.end());
  Fftw<Real>::execute(p, as_fftw(stage.data()), as_fftw(stage.data()));
  std::copy(stage.begin(), stage.end(), buf.begin());
}

template <class Real> void BasicFftPlan<Real>::forward(std::span<value_type> buf) const { execute(buf, fwd_); }
template <class Real> void BasicFftPlan<Real>::backward(std::span<value_type> buf) const { execute(buf, bwd_); }

template <class Real>
std::shared_ptr<const BasicFftPlan<Real>> fft_plan(std::size_t rows, std::size_t cols, FftAxis axis, std::size_t lines) {
  static std::mutex m;
  static std::map<std::tuple<std::size_t, std::size_t, FftAxis, std::size_t>, std::shared_ptr<const BasicFftPlan<Real>>>
      cache;
  std::lock_guard lock(m);
  auto &slot = cache[{rows, cols, axis, lines}];
  if (!slot) slot = std::make_shared<const BasicFftPlan<Real>>(rows, cols, axis, lines);
  return slot;
}

template class BasicFftPlan<double>;
template class BasicFftPlan<float>;
template std::shared_ptr<const FftPlan> fft_plan<double>(std::size_t, std::size_t, FftAxis, std::size_t);
template std::shared_ptr<const FftPlanF> fft_plan<float>(std::size_t, std::size_t, FftAxis, std::size_t);

namespace {

void centered_transform(std::span<const cplx> in, std::span<cplx> out, std::size_t rows,
                        std::size_t cols, bool inverse) {
  require(in.size() == rows * cols && out.size() == rows * cols, "fft: size mismatch");
  const std::size_t hr = rows / 2, hc = cols / 2;
  std::vector<cplx> tmp(rows * cols);
  // ifftshift: centre index (rows/2, cols/2) moves to the origin.
  for (std::size_t y = 0; y < rows; ++y) {
    const std::size_t sy = (y + hr) % rows;
    for (std::size_t x = 0; x < cols; ++x) tmp[y * cols + x] = in[sy * cols + (x + hc) % cols];
  }
  const auto plan = fft2_plan(rows, cols);
  if (inverse)
    plan->backward(tmp);
  else
    plan->forward(tmp);
  const double scale = 1.0 / std::sqrt(double(rows * cols));
  // fftshift: origin moves back to the centre index.
  for (std::size_t y = 0; y < rows; ++y) {
    const std::size_t dy = (y + hr) % rows;
    for (std::size_t x = 0; x < cols; ++x) out[dy * cols + (x + hc) % cols] = tmp[y * cols + x] * scale;
  }
}

} // namespace

void centered_fft2(std::span<const cplx> in, std::span<cplx> out, std::size_t rows, std::size_t cols) {
  centered_transform(in, out, rows, cols, false);
}

void centered_ifft2(std::span<const cplx> in, std::span<cplx> out, std::size_t rows, std::size_t cols) {
  centered_transform(in, out, rows, cols, true);
}

ComplexImage centered_fft2(const ComplexImage &img) {
  ComplexImage out(img.shape());
  centered_fft2(img.flat(), out.flat(), img.dim(0), img.dim(1));
  return out;
}

ComplexImage centered_ifft2(const ComplexImage &ksp) {
  ComplexImage out(ksp.shape());
  centered_ifft2(ksp.flat(), out.flat(), ksp.dim(0), ksp.dim(1));
  return out;
}

} // namespace kforge
