#include "kforge/kfrg.hpp"

#include "kforge/binio.hpp"
#include "kforge/error.hpp"

#include <zlib.h>

#include <bit>
#include <fstream>

namespace kforge {

namespace {

std::uint32_t crc(const std::uint8_t *p, std::size_t n) {
  uLong c = crc32(0L, Z_NULL, 0);
  while (n > 0) {
    const uInt chunk = uInt(std::min<std::size_t>(n, 1u << 30));
    c = crc32(c, p, chunk);
    p += chunk;
    n -= chunk;
  }
  return std::uint32_t(c);
}

template <std::size_t R>
std::array<std::size_t, R> tail_dims(const KfrgArray &a) {
  for (std::size_t i = 0; i < 4 - R; ++i)
    if (a.dims[i] != 1) throw FormatError("kfrg: array has more than " + std::to_string(R) + " dimensions");
  std::array<std::size_t, R> d{};
  for (std::size_t i = 0; i < R; ++i) d[i] = a.dims[4 - R + i];
  return d;
}

} // namespace

const char *record_kind_name(RecordKind k) {
  switch (k) {
  case RecordKind::fully_sampled_kspace: return "fully_sampled_kspace";
  case RecordKind::cartesian: return "cartesian";
  case RecordKind::multicoil_gridded: return "multicoil_gridded";
  case RecordKind::magnitude_frames: return "magnitude_frames";
  case RecordKind::image: return "image";
  }
  return "unknown";
}

Tensor<cplx, 4> complex_tensor(const KfrgArray &a) {
  Tensor<cplx, 4> t(std::size_t(a.dims[0]), std::size_t(a.dims[1]), std::size_t(a.dims[2]), std::size_t(a.dims[3]));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = cplx(a.data[i].real(), a.data[i].imag());
  return t;
}

Tensor<cplx, 3> complex_tensor3(const KfrgArray &a) {
  const auto d = tail_dims<3>(a);
  Tensor<cplx, 3> t(d);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = cplx(a.data[i].real(), a.data[i].imag());
  return t;
}

Tensor<double, 3> real_tensor3(const KfrgArray &a) {
  const auto d = tail_dims<3>(a);
  Tensor<double, 3> t(d);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = a.data[i].real();
  return t;
}

std::vector<std::uint8_t> encode_kfrg(const KfrgFile &f) {
  using namespace binio;
  std::vector<std::uint8_t> out;
  std::size_t total = 0;
  for (const auto &a : f.arrays) {
    if (a.data.size() != a.count()) throw ValidationError("kfrg: array payload does not match its dims");
    total += a.count() * 8 + 4;
  }
  const std::string meta = f.metadata.dump();
  out.reserve(16 + 16 * f.arrays.size() + 4 + total + 8 + meta.size());
  put_bytes(out, "KFRG");
  put_u32(out, kKfrgVersion);
  put_u8(out, static_cast<std::uint8_t>(f.kind));
  for (int i = 0; i < 3; ++i) put_u8(out, 0);
  put_u32(out, static_cast<std::uint32_t>(f.arrays.size()));
  for (const auto &a : f.arrays)
    for (auto d : a.dims) put_u32(out, d);
  put_u32(out, crc(out.data(), out.size()));
  for (const auto &a : f.arrays) {
    const std::size_t start = out.size();
    for (const auto &v : a.data) {
      put_f32(out, v.real());
      put_f32(out, v.imag());
    }
    put_u32(out, crc(out.data() + start, out.size() - start));
  }
  put_u32(out, static_cast<std::uint32_t>(meta.size()));
  const std::size_t ms = out.size();
  put_bytes(out, meta);
  put_u32(out, crc(out.data() + ms, meta.size()));
  return out;
}

KfrgFile decode_kfrg(std::span<const std::uint8_t> bytes) {
  binio::Reader<FormatError> rd(bytes.data(), bytes.size(), "kfrg");
  const auto *magic = rd.take(4);
  if (std::string(reinterpret_cast<const char *>(magic), 4) != "KFRG") throw FormatError("kfrg: bad magic");
  const std::uint32_t version = rd.u32();
  if (version != kKfrgVersion)
    throw FormatError("kfrg: unsupported version " + std::to_string(version) + " (expected " +
                      std::to_string(kKfrgVersion) + ")");
  KfrgFile f;
  const std::uint8_t kind = rd.u8();
  rd.take(3);
  const std::uint32_t count = rd.u32();
  if (std::size_t(count) * 16 > rd.remaining()) throw FormatError("kfrg: truncated file");
  std::vector<std::array<std::uint32_t, 4>> dims(count);
  for (auto &d : dims)
    for (auto &v : d) v = rd.u32();
  const std::size_t header_len = 16 + std::size_t(count) * 16;
  if (rd.u32() != crc(bytes.data(), header_len)) throw FormatError("kfrg: header checksum mismatch");
  if (kind < 1 || kind > 5) throw FormatError("kfrg: unknown record kind " + std::to_string(kind));
  f.kind = static_cast<RecordKind>(kind);

  // Check the declared payload sizes against what is actually there before allocating.
  unsigned __int128 declared = 0;
  for (const auto &d : dims) declared += (unsigned __int128)d[0] * d[1] * d[2] * d[3] * 8 + 4;
  if (declared + 8 > rd.remaining()) throw FormatError("kfrg: truncated file (declared arrays exceed file size)");

  for (const auto &d : dims) {
    KfrgArray a;
    a.dims = d;
    const std::size_t n = a.count();
    const auto *p = rd.take(n * 8);
    if (rd.u32() != crc(p, n * 8)) throw FormatError("kfrg: payload checksum mismatch");
    a.data.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::uint32_t re = 0, im = 0;
      for (int b = 0; b < 4; ++b) {
        re |= std::uint32_t(p[8 * i + b]) << (8 * b);
        im |= std::uint32_t(p[8 * i + 4 + b]) << (8 * b);
      }
      a.data[i] = {std::bit_cast<float>(re), std::bit_cast<float>(im)};
    }
    f.arrays.push_back(std::move(a));
  }
  const std::uint32_t mlen = rd.u32();
  const auto *mp = rd.take(mlen);
  if (rd.u32() != crc(mp, mlen)) throw FormatError("kfrg: metadata checksum mismatch");
  if (rd.remaining() != 0) throw FormatError("kfrg: trailing bytes after metadata");
  try {
    f.metadata = nlohmann::json::parse(reinterpret_cast<const char *>(mp), reinterpret_cast<const char *>(mp) + mlen);
  } catch (const nlohmann::json::exception &e) {
    throw FormatError(std::string("kfrg: metadata is not valid JSON: ") + e.what());
  }
  return f;
}

void write_kfrg(const std::filesystem::path &path, const KfrgFile &file) {
  const auto bytes = encode_kfrg(file);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw MissingInputError("kfrg: cannot open " + path.string() + " for writing");
  os.write(reinterpret_cast<const char *>(bytes.data()), std::streamsize(bytes.size()));
  if (!os) throw NumericalError("kfrg: write failed for " + path.string());
}

KfrgFile read_kfrg(const std::filesystem::path &path) {
  std::error_code ec;
  const auto size = std::filesystem::file_size(path, ec);
  if (ec) throw MissingInputError("kfrg: cannot read " + path.string());
  std::ifstream is(path, std::ios::binary);
  if (!is) throw MissingInputError("kfrg: cannot open " + path.string());
  std::vector<std::uint8_t> bytes(size);
  is.read(reinterpret_cast<char *>(bytes.data()), std::streamsize(size));
  if (std::size_t(is.gcount()) != size) throw FormatError("kfrg: short read on " + path.string());
  try {
    return decode_kfrg(bytes);
  } catch (const FormatError &e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

} // namespace kforge
