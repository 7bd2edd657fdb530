#include "kforge/image_io.hpp"

#include "kforge/error.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>

namespace kforge {

namespace {

struct FileCloser {
  void operator()(FILE *f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path &path, const char *mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw MissingInputError("cannot open " + path.string());
  return f;
}

bool has_png_signature(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  unsigned char sig[8] = {};
  in.read(reinterpret_cast<char *>(sig), 8);
  return in.gcount() == 8 && png_sig_cmp(sig, 0, 8) == 0;
}

RgbImage read_png(const std::filesystem::path &path) {
  auto file = open_file(path, "rb");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ValidationError("libpng initialisation failed for " + path.string());
  }
  std::vector<png_bytep> rows;
  std::vector<unsigned char> pixels;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ValidationError("unreadable PNG file " + path.string());
  }
  png_init_io(png, file.get());
  png_read_info(png, info);

  const auto color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_strip_alpha(png);
  if (depth == 16) png_set_swap(png); // host (little) endian samples
  png_read_update_info(png, info);

  const std::size_t w = png_get_image_width(png, info);
  const std::size_t h = png_get_image_height(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  const int out_depth = png_get_bit_depth(png, info);
  pixels.resize(rowbytes * h);
  rows.resize(h);
  for (std::size_t y = 0; y < h; ++y) rows[y] = pixels.data() + y * rowbytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  RgbImage img(h, w, 3);
  if (out_depth == 16) {
    for (std::size_t i = 0; i < h * w * 3; ++i) {
      std::uint16_t v;
      std::memcpy(&v, pixels.data() + 2 * i, 2);
      img[i] = v / 65535.0;
    }
  } else {
    for (std::size_t i = 0; i < h * w * 3; ++i) img[i] = pixels[i] / 255.0;
  }
  return img;
}

// Netpbm header token, skipping whitespace and comments.
std::string next_token(std::istream &in) {
  std::string tok;
  char c;
  while (in.get(c)) {
    if (c == '#') {
      std::string discard;
      std::getline(in, discard);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!tok.empty()) break;
      continue;
    }
    tok += c;
  }
  return tok;
}

RgbImage read_netpbm(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingInputError("cannot open " + path.string());
  const std::string magic = next_token(in);
  const bool ascii = magic == "P3" || magic == "P2";
  const bool color = magic == "P6" || magic == "P3";
  if (magic != "P6" && magic != "P5" && !ascii) throw ValidationError("unsupported image format in " + path.string());
  std::size_t w = 0, h = 0, maxval = 0;
  try {
    w = std::stoul(next_token(in));
    h = std::stoul(next_token(in));
    maxval = std::stoul(next_token(in));
  } catch (const std::exception &) {
    throw ValidationError("malformed PPM header in " + path.string());
  }
  if (w == 0 || h == 0 || maxval == 0 || maxval > 65535) throw ValidationError("malformed PPM header in " + path.string());
  const std::size_t channels = color ? 3 : 1;
  const std::size_t n = w * h * channels;
  std::vector<double> values(n);
  if (ascii) {
    for (auto &v : values) {
      const auto tok = next_token(in);
      if (tok.empty()) throw ValidationError("truncated PPM data in " + path.string());
      v = std::stod(tok);
    }
  } else {
    const std::size_t bps = maxval > 255 ? 2 : 1;
    std::vector<unsigned char> raw(n * bps);
    in.read(reinterpret_cast<char *>(raw.data()), std::streamsize(raw.size()));
    if (std::size_t(in.gcount()) != raw.size()) throw ValidationError("truncated PPM data in " + path.string());
    for (std::size_t i = 0; i < n; ++i)
      values[i] = bps == 2 ? double((raw[2 * i] << 8) | raw[2 * i + 1]) : double(raw[i]);
  }
  RgbImage img(h, w, 3);
  for (std::size_t p = 0; p < h * w; ++p)
    for (std::size_t c = 0; c < 3; ++c)
      img[p * 3 + c] = std::clamp(values[p * channels + (color ? c : 0)] / double(maxval), 0.0, 1.0);
  return img;
}

std::uint8_t to8(double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

void write_png(const std::filesystem::path &path, std::size_t h, std::size_t w, int color_type,
               const std::vector<std::uint8_t> &pixels) {
  auto file = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw ValidationError("libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw ValidationError("failed writing PNG " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, png_uint_32(w), png_uint_32(h), 8, color_type, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t stride = pixels.size() / h;
  for (std::size_t y = 0; y < h; ++y) png_write_row(png, const_cast<png_bytep>(pixels.data() + y * stride));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

} // namespace

RgbImage read_rgb_image(const std::filesystem::path &path) {
  if (!std::filesystem::exists(path)) throw MissingInputError("missing image file " + path.string());
  return has_png_signature(path) ? read_png(path) : read_netpbm(path);
}

void write_png_rgb(const std::filesystem::path &path, const RgbImage &img) {
  std::vector<std::uint8_t> px(img.size());
  std::transform(img.begin(), img.end(), px.begin(), to8);
  write_png(path, img.dim(0), img.dim(1), PNG_COLOR_TYPE_RGB, px);
}

void write_png_gray(const std::filesystem::path &path, const RealImage &img) {
  std::vector<std::uint8_t> px(img.size());
  std::transform(img.begin(), img.end(), px.begin(), to8);
  write_png(path, img.dim(0), img.dim(1), PNG_COLOR_TYPE_GRAY, px);
}

void write_ppm(const std::filesystem::path &path, const RgbImage &img, bool eight_bit) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  const unsigned maxval = eight_bit ? 255 : 65535;
  out << "P6\n" << img.dim(1) << " " << img.dim(0) << "\n" << maxval << "\n";
  for (double v : img) {
    const auto q = static_cast<unsigned>(std::lround(std::clamp(v, 0.0, 1.0) * maxval));
    if (eight_bit) {
      out.put(static_cast<char>(q));
    } else {
      out.put(static_cast<char>(q >> 8));
      out.put(static_cast<char>(q & 0xff));
    }
  }
}

} // namespace kforge
