#pragma once

#include "kforge/array.hpp"

#include <memory>
#include <new>
#include <span>
#include <vector>

namespace kforge {

/// 64-byte aligned storage so FFTW can use its SIMD codelets.
template <class T> struct SimdAllocator {
  using value_type = T;
  static constexpr std::align_val_t align{64};
  SimdAllocator() = default;
  template <class U> SimdAllocator(const SimdAllocator<U> &) {}
  T *allocate(std::size_t n) { return static_cast<T *>(::operator new(n * sizeof(T), align)); }
  void deallocate(T *p, std::size_t) { ::operator delete(p, align); }
  template <class U> bool operator==(const SimdAllocator<U> &) const { return true; }
};
template <class T> using AlignedVector = std::vector<T, SimdAllocator<T>>;
using AlignedBuffer = AlignedVector<cplx>;

enum class FftAxis { both, rows, cols };

/// In-place unnormalized DFTs over a rows x cols buffer: the full 2D transform, or a batch of 1D
/// transforms along one axis restricted to the first `lines` rows/columns.
///
///   forward:  X[m] = sum_q x[q] exp(-2 pi i m.q / N)
///   backward: x[q] = sum_m X[m] exp(+2 pi i m.q / N)  (no 1/N)
///
/// Plans are created with FFTW_ESTIMATE, so the chosen algorithm and its rounding are identical
/// across runs. Buffers that are not 64-byte aligned are staged through aligned scratch, so the
/// SIMD codelets (and results) never depend on where the caller's memory lives.
/// Instances are immutable and safe to share between threads. Real is double or float.
template <class Real> class BasicFftPlan {
public:
  using value_type = std::complex<Real>;
  using Axis = FftAxis;
  BasicFftPlan(std::size_t rows, std::size_t cols, Axis axis = Axis::both, std::size_t lines = 0);
  ~BasicFftPlan();
  BasicFftPlan(const BasicFftPlan &) = delete;
  BasicFftPlan &operator=(const BasicFftPlan &) = delete;

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  void forward(std::span<value_type> buf) const;
  void backward(std::span<value_type> buf) const;

private:
  void execute(std::span<value_type> buf, void *plan) const;
  std::size_t rows_, cols_;
  void *fwd_ = nullptr;
  void *bwd_ = nullptr;
};

using FftPlan = BasicFftPlan<double>;
using FftPlanF = BasicFftPlan<float>;

/// Shared plan for a given shape; plans are cached process-wide.
template <class Real = double>
std::shared_ptr<const BasicFftPlan<Real>> fft_plan(std::size_t rows, std::size_t cols, FftAxis axis = FftAxis::both,
                                                   std::size_t lines = 0);
/// Shared 2D plan for a given size.
inline std::shared_ptr<const FftPlan> fft2_plan(std::size_t rows, std::size_t cols) {
  return fft_plan<double>(rows, cols);
}

/// Centered orthonormal transforms: DC lives at (rows/2, cols/2) in both domains.
void centered_fft2(std::span<const cplx> in, std::span<cplx> out, std::size_t rows, std::size_t cols);
void centered_ifft2(std::span<const cplx> in, std::span<cplx> out, std::size_t rows, std::size_t cols);

ComplexImage centered_fft2(const ComplexImage &img);
ComplexImage centered_ifft2(const ComplexImage &ksp);

} // namespace kforge
