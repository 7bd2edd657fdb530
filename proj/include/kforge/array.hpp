#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace kforge {

using cplx = std::complex<double>;
using cplxf = std::complex<float>;

/// Dense row-major N-d array. The last index varies fastest.
template <typename T, std::size_t Rank>
class Tensor {
public:
  using value_type = T;
  using Shape = std::array<std::size_t, Rank>;

  Tensor() { shape_.fill(0); }

  explicit Tensor(Shape shape, T fill = T{}) : shape_(shape), data_(count(shape), fill) {}

  template <typename... Dims>
    requires(sizeof...(Dims) == Rank && (std::is_integral_v<Dims> && ...))
  explicit Tensor(Dims... dims) : Tensor(Shape{static_cast<std::size_t>(dims)...}) {}

  const Shape &shape() const { return shape_; }
  std::size_t dim(std::size_t axis) const { return shape_[axis]; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T *data() { return data_.data(); }
  const T *data() const { return data_.data(); }
  std::span<T> flat() { return data_; }
  std::span<const T> flat() const { return data_; }
  std::vector<T> &vec() { return data_; }
  const std::vector<T> &vec() const { return data_; }

  auto begin() { return data_.begin(); }
  auto end() { return data_.end(); }
  auto begin() const { return data_.begin(); }
  auto end() const { return data_.end(); }

  T &operator[](std::size_t i) { return data_[i]; }
  const T &operator[](std::size_t i) const { return data_[i]; }

  template <typename... Idx>
    requires(sizeof...(Idx) == Rank)
  T &operator()(Idx... idx) {
    return data_[offset(idx...)];
  }
  template <typename... Idx>
    requires(sizeof...(Idx) == Rank)
  const T &operator()(Idx... idx) const {
    return data_[offset(idx...)];
  }

  /// Number of elements in one slab along the leading axis.
  std::size_t stride0() const { return Rank == 0 || shape_[0] == 0 ? 0 : data_.size() / shape_[0]; }

  /// Contiguous view of the i-th slab along the leading axis.
  std::span<T> slab(std::size_t i) { return {data_.data() + i * stride0(), stride0()}; }
  std::span<const T> slab(std::size_t i) const { return {data_.data() + i * stride0(), stride0()}; }

  friend bool operator==(const Tensor &a, const Tensor &b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

  static std::size_t count(const Shape &s) {
    return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
  }

private:
  template <typename... Idx>
  std::size_t offset(Idx... idx) const {
    const std::array<std::size_t, Rank> ix{static_cast<std::size_t>(idx)...};
    std::size_t off = 0;
    for (std::size_t a = 0; a < Rank; ++a) off = off * shape_[a] + ix[a];
    return off;
  }

  Shape shape_;
  std::vector<T> data_;
};

using ComplexImage = Tensor<cplx, 2>;
using RealImage = Tensor<double, 2>;
/// T x H x W complex dynamic image.
using ComplexImageSeries = Tensor<cplx, 3>;
/// T x C x H x W complex coil images.
using MultiCoilImageSeries = Tensor<cplx, 4>;
/// T x H x W real magnitude images.
using MagnitudeImageSeries = Tensor<double, 3>;

template <typename T, std::size_t R>
std::string shape_string(const Tensor<T, R> &t) {
  std::string s = "[";
  for (std::size_t a = 0; a < R; ++a) {
    if (a) s += "x";
    s += std::to_string(t.dim(a));
  }
  return s + "]";
}

} // namespace kforge
