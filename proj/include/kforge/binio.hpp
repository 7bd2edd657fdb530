#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

namespace kforge::binio {

// Little-endian encoding independent of host byte order.

inline void put_u8(std::vector<std::uint8_t> &out, std::uint8_t v) { out.push_back(v); }

inline void put_u32(std::vector<std::uint8_t> &out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline void put_u64(std::vector<std::uint8_t> &out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline void put_f32(std::vector<std::uint8_t> &out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

inline void put_bytes(std::vector<std::uint8_t> &out, const std::string &s) { out.insert(out.end(), s.begin(), s.end()); }

/// Bounds-checked sequential reader; throws `Err` on overrun.
template <typename Err>
class Reader {
public:
  Reader(const std::uint8_t *data, std::size_t size, std::string what) : p_(data), end_(data + size), what_(std::move(what)) {}

  std::size_t remaining() const { return std::size_t(end_ - p_); }

  void need(std::size_t n) const {
    if (remaining() < n) throw Err(what_ + ": truncated file");
  }
  std::uint8_t u8() {
    need(1);
    return *p_++;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(p_[i]) << (8 * i);
    p_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(p_[i]) << (8 * i);
    p_ += 8;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  const std::uint8_t *take(std::size_t n) {
    need(n);
    const auto *q = p_;
    p_ += n;
    return q;
  }

private:
  const std::uint8_t *p_, *end_;
  std::string what_;
};

} // namespace kforge::binio
