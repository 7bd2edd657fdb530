#include "kforge/error.hpp"
#include "kforge/kfrg.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <zlib.h>

#include <cstring>
#include <fstream>

using namespace kforge;

namespace {

KfrgFile sample_file(std::size_t T = 3, std::size_t C = 2, std::size_t H = 5, std::size_t W = 4) {
  Tensor<cplx, 4> k(T, C, H, W);
  const auto v = oracle::random_complex(k.size(), 1);
  std::copy(v.begin(), v.end(), k.begin());
  RealImage m(RealImage::Shape{T, H}, 0.5);
  KfrgFile f;
  f.kind = RecordKind::cartesian;
  f.arrays = {to_kfrg_array(k), to_kfrg_array(m)};
  f.metadata = {{"video_id", "abc"}, {"window", 2}, {"seed", 17}};
  return f;
}

std::uint32_t u32_at(const std::vector<std::uint8_t> &b, std::size_t off) {
  std::uint32_t v;
  std::memcpy(&v, b.data() + off, 4);
  return v;
}

} // namespace

TEST(Kfrg, RoundTripIsByteIdentical) {
  const auto bytes = encode_kfrg(sample_file());
  const auto back = decode_kfrg(bytes);
  EXPECT_EQ(back.kind, RecordKind::cartesian);
  ASSERT_EQ(back.arrays.size(), 2u);
  EXPECT_EQ(back.arrays[0].dims, (std::array<std::uint32_t, 4>{3, 2, 5, 4}));
  EXPECT_EQ(back.arrays[1].dims, (std::array<std::uint32_t, 4>{1, 1, 3, 5}));
  EXPECT_EQ(back.arrays[0].data, sample_file().arrays[0].data);
  EXPECT_EQ(back.metadata, sample_file().metadata);
  EXPECT_EQ(encode_kfrg(back), bytes);
}

TEST(Kfrg, FileRoundTrip) {
  const auto dir = oracle::scratch_dir("kfrg");
  write_kfrg(dir / "a.kfrg", sample_file());
  const auto back = read_kfrg(dir / "a.kfrg");
  write_kfrg(dir / "b.kfrg", back);
  std::ifstream a(dir / "a.kfrg", std::ios::binary), b(dir / "b.kfrg", std::ios::binary);
  const std::string sa((std::istreambuf_iterator<char>(a)), {}), sb((std::istreambuf_iterator<char>(b)), {});
  EXPECT_EQ(sa, sb);
  EXPECT_THROW(read_kfrg(dir / "missing.kfrg"), MissingInputError);
}

TEST(Kfrg, HeaderLayout) {
  KfrgFile f;
  f.kind = RecordKind::cartesian;
  KfrgArray a;
  a.dims = {24, 10, 224, 224};
  a.data.resize(a.count());
  f.arrays.push_back(std::move(a));
  const auto b = encode_kfrg(f);
  EXPECT_EQ(std::string(b.begin(), b.begin() + 4), "KFRG");
  EXPECT_EQ(u32_at(b, 4), kKfrgVersion);
  EXPECT_EQ(b[8], 2);
  EXPECT_EQ(u32_at(b, 12), 1u);
  EXPECT_EQ(u32_at(b, 16), 24u);
  EXPECT_EQ(u32_at(b, 20), 10u);
  EXPECT_EQ(u32_at(b, 24), 224u);
  EXPECT_EQ(u32_at(b, 28), 224u);
  // header crc, payload, payload crc, metadata length, "{}", metadata crc
  EXPECT_EQ(b.size(), 36 + 24u * 10 * 224 * 224 * 8 + 4 + 4 + 2 + 4);
}

TEST(Kfrg, EveryCorruptedByteIsDetected) {
  const auto bytes = encode_kfrg(sample_file(1, 1, 2, 2));
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    auto bad = bytes;
    bad[i] ^= 0x20;
    EXPECT_THROW(decode_kfrg(bad), FormatError) << "byte " << i;
  }
}

TEST(Kfrg, TruncationAndTrailingBytes) {
  const auto bytes = encode_kfrg(sample_file());
  for (std::size_t n : {std::size_t{0}, std::size_t{3}, std::size_t{20}, bytes.size() / 2, bytes.size() - 1}) {
    const std::vector<std::uint8_t> cut(bytes.begin(), bytes.begin() + long(n));
    EXPECT_THROW(decode_kfrg(cut), FormatError) << n;
  }
  auto longer = bytes;
  longer.push_back(0);
  EXPECT_THROW(decode_kfrg(longer), FormatError);
}

TEST(Kfrg, VersionMismatchIsNamed) {
  auto bytes = encode_kfrg(sample_file());
  bytes[4] = 9;
  try {
    decode_kfrg(bytes);
    FAIL();
  } catch (const FormatError &e) {
    EXPECT_NE(std::string(e.what()).find("version"), std::string::npos) << e.what();
  }
}

TEST(Kfrg, HugeDimensionsRejectedBeforeAllocation) {
  auto bytes = encode_kfrg(sample_file(1, 1, 2, 2));
  // claim a 2^32-ish element array; the header crc is fixed up so only the size check can catch it
  const std::uint32_t big = 0xffffffffu;
  std::memcpy(bytes.data() + 16, &big, 4);
  std::memcpy(bytes.data() + 20, &big, 4);
  const auto c = std::uint32_t(crc32(0L, bytes.data(), 32));
  std::memcpy(bytes.data() + 32, &c, 4);
  EXPECT_THROW(decode_kfrg(bytes), FormatError);
}

TEST(Kfrg, TensorViews) {
  const auto f = sample_file();
  EXPECT_EQ(complex_tensor(f.arrays[0]).dim(3), 4u);
  EXPECT_EQ(real_tensor3(f.arrays[1]).dim(1), 3u);
  EXPECT_THROW(complex_tensor3(f.arrays[0]), ValidationError);
}
