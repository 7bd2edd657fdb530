#pragma once

#include "kforge/array.hpp"

#include <json.hpp>

#include <array>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace kforge {

// .kfrg layout (little-endian):
//   "KFRG" | u32 version | u8 kind | 3 zero bytes | u32 array count
//   count x (u32 dims[4])                  lower-rank arrays are padded with leading 1s
//   u32 crc32 of everything above
//   count x (complex64 payload, interleaved re/im | u32 crc32 of the payload)
//   u32 metadata length | UTF-8 JSON (sorted keys) | u32 crc32 of the JSON

inline constexpr std::uint32_t kKfrgVersion = 1;

enum class RecordKind : std::uint8_t {
  fully_sampled_kspace = 1, // simulate output: kspace T x C x H x W
  cartesian = 2,            // varnet: kspace, mask, sensitivities, zero-filled, target
  multicoil_gridded = 3,    // unet3d: gridded coil images, target
  magnitude_frames = 4,     // fastdvdnet: input frames, target frame
  image = 5,                // reconstruction output
};

const char *record_kind_name(RecordKind k);

struct KfrgArray {
  std::array<std::uint32_t, 4> dims{1, 1, 1, 1};
  std::vector<std::complex<float>> data;

  std::size_t count() const { return std::size_t(dims[0]) * dims[1] * dims[2] * dims[3]; }
};

struct KfrgFile {
  RecordKind kind = RecordKind::image;
  std::vector<KfrgArray> arrays;
  nlohmann::json metadata = nlohmann::json::object();
};

template <typename T, std::size_t R>
KfrgArray to_kfrg_array(const Tensor<T, R> &t) {
  static_assert(R >= 1 && R <= 4, "kfrg arrays have at most 4 dimensions");
  KfrgArray a;
  for (std::size_t i = 0; i < R; ++i) {
    if (t.dim(i) > 0xffffffffu) throw std::length_error("kfrg: dimension exceeds u32");
    a.dims[4 - R + i] = static_cast<std::uint32_t>(t.dim(i));
  }
  a.data.reserve(t.size());
  for (const auto &v : t) {
    if constexpr (std::is_same_v<T, cplx>)
      a.data.emplace_back(float(v.real()), float(v.imag()));
    else
      a.data.emplace_back(float(v), 0.0f);
  }
  return a;
}

/// Tensor view of an array; the leading 4 - R dims must be 1.
Tensor<cplx, 4> complex_tensor(const KfrgArray &a);
Tensor<cplx, 3> complex_tensor3(const KfrgArray &a);
Tensor<double, 3> real_tensor3(const KfrgArray &a); // real parts

std::vector<std::uint8_t> encode_kfrg(const KfrgFile &file);
/// Validates sizes against the buffer before allocating; checks every CRC.
KfrgFile decode_kfrg(std::span<const std::uint8_t> bytes);

void write_kfrg(const std::filesystem::path &path, const KfrgFile &file);
KfrgFile read_kfrg(const std::filesystem::path &path);

} // namespace kforge
