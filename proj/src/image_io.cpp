#include "gpo/image.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>

namespace gpo {

namespace {

constexpr double kLumaR = 0.299;
constexpr double kLumaG = 0.587;
constexpr double kLumaB = 0.114;

struct FileCloser {
  void operator()(std::FILE *f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

double luma(double r, double g, double b) { return std::clamp(kLumaR * r + kLumaG * g + kLumaB * b, 0.0, 1.0); }

Image load_png(const std::filesystem::path &path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) fail(ErrorKind::Io, "cannot open " + path.string());

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(ErrorKind::Io, "libpng init failed for " + path.string());
  }
  std::vector<unsigned char> buffer;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(ErrorKind::Format, "corrupt PNG: " + path.string());
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);

  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);

  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  const int channels = png_get_channels(png, info);
  const int out_depth = png_get_bit_depth(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  buffer.resize(stride * h);
  rows.resize(h);
  for (png_uint_32 y = 0; y < h; ++y) rows[y] = buffer.data() + y * stride;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  if (channels != 1 && channels != 3) fail(ErrorKind::Format, "unsupported PNG channel layout: " + path.string());
  const double maxv = out_depth == 16 ? 65535.0 : 255.0;
  auto fetch = [&](std::size_t y, std::size_t idx) -> double {
    const unsigned char *row = buffer.data() + y * stride;
    if (out_depth == 16) return ((row[2 * idx] << 8) | row[2 * idx + 1]) / maxv;
    return row[idx] / maxv;
  };
  std::vector<double> data(static_cast<std::size_t>(w) * h);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      if (channels == 1) {
        data[y * w + x] = fetch(y, x);
      } else {
        data[y * w + x] = luma(fetch(y, 3 * x), fetch(y, 3 * x + 1), fetch(y, 3 * x + 2));
      }
    }
  }
  return Image(static_cast<int>(w), static_cast<int>(h), std::move(data));
}

// Binary PGM (P5) / PPM (P6).
Image load_pnm(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  std::string magic;
  in >> magic;
  if (magic != "P5" && magic != "P6") fail(ErrorKind::Format, "unsupported PNM variant in " + path.string());
  auto next_int = [&]() {
    long v = -1;
    while (in >> std::ws && in.peek() == '#') {
      std::string comment;
      std::getline(in, comment);
    }
    in >> v;
    if (!in || v < 0) fail(ErrorKind::Format, "malformed PNM header in " + path.string());
    return v;
  };
  const long w = next_int();
  const long h = next_int();
  const long maxval = next_int();
  if (w < 1 || h < 1 || maxval < 1 || maxval > 65535) fail(ErrorKind::Format, "bad PNM header in " + path.string());
  in.get();
  const int channels = magic == "P6" ? 3 : 1;
  const int bytes = maxval > 255 ? 2 : 1;
  std::vector<unsigned char> raw(static_cast<std::size_t>(w) * h * channels * bytes);
  in.read(reinterpret_cast<char *>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (in.gcount() != static_cast<std::streamsize>(raw.size())) fail(ErrorKind::Format, "truncated PNM " + path.string());
  auto fetch = [&](std::size_t idx) -> double {
    const double v = bytes == 2 ? ((raw[2 * idx] << 8) | raw[2 * idx + 1]) : raw[idx];
    return std::min(1.0, v / static_cast<double>(maxval));
  };
  std::vector<double> data(static_cast<std::size_t>(w) * h);
  for (std::size_t i = 0; i < data.size(); ++i)
    data[i] = channels == 1 ? fetch(i) : luma(fetch(3 * i), fetch(3 * i + 1), fetch(3 * i + 2));
  return Image(static_cast<int>(w), static_cast<int>(h), std::move(data));
}

void write_png(const std::filesystem::path &path, int w, int h, int channels, const std::vector<unsigned char> &px) {
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) fail(ErrorKind::Io, "cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    fail(ErrorKind::Io, "libpng init failed for " + path.string());
  }
  std::vector<png_const_bytep> rows(h);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail(ErrorKind::Io, "PNG encode failed for " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, w, h, 8, channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < h; ++y) rows[y] = px.data() + static_cast<std::size_t>(y) * w * channels;
  png_write_rows(png, const_cast<png_bytepp>(rows.data()), h);
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

unsigned char to_byte(double v) { return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

void put_u32(std::ostream &out, std::uint32_t v) {
  const std::array<unsigned char, 4> b{static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                       static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char *>(b.data()), 4);
}

std::uint32_t get_u32(std::istream &in) {
  std::array<unsigned char, 4> b{};
  in.read(reinterpret_cast<char *>(b.data()), 4);
  return b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

} // namespace

Image load_image(const std::filesystem::path &path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) fail(ErrorKind::Io, "cannot open " + path.string());
  std::array<unsigned char, 8> sig{};
  probe.read(reinterpret_cast<char *>(sig.data()), sig.size());
  const auto got = probe.gcount();
  probe.close();
  if (got >= 8 && png_sig_cmp(sig.data(), 0, 8) == 0) return load_png(path);
  if (got >= 4 && std::memcmp(sig.data(), "GPOI", 4) == 0) return load_image_dump(path);
  if (got >= 2 && sig[0] == 'P' && (sig[1] == '5' || sig[1] == '6')) return load_pnm(path);
  fail(ErrorKind::Format, "unrecognized raster format: " + path.string());
}

void save_png(const Image &img, const std::filesystem::path &path) {
  std::vector<unsigned char> px(img.size());
  const auto src = img.pixels();
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = to_byte(src[i]);
  write_png(path, img.width(), img.height(), 1, px);
}

void save_png_rgb(const Image &r, const Image &g, const Image &b, const std::filesystem::path &path) {
  if (r.width() != g.width() || r.width() != b.width() || r.height() != g.height() || r.height() != b.height())
    fail(ErrorKind::Argument, "RGB channels differ in size");
  std::vector<unsigned char> px(3 * r.size());
  for (std::size_t i = 0; i < r.size(); ++i) {
    px[3 * i] = to_byte(r.pixels()[i]);
    px[3 * i + 1] = to_byte(g.pixels()[i]);
    px[3 * i + 2] = to_byte(b.pixels()[i]);
  }
  write_png(path, r.width(), r.height(), 3, px);
}

void save_image_dump(const Image &img, const std::filesystem::path &path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  out.write("GPOI", 4);
  out.put(1);
  put_u32(out, static_cast<std::uint32_t>(img.width()));
  put_u32(out, static_cast<std::uint32_t>(img.height()));
  for (double v : img.pixels()) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    for (int i = 0; i < 8; ++i) out.put(static_cast<char>((bits >> (8 * i)) & 0xff));
  }
  if (!out) fail(ErrorKind::Io, "write failed for " + path.string());
}

Image load_image_dump(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "GPOI", 4) != 0) fail(ErrorKind::Format, "not a GPOI dump: " + path.string());
  if (in.get() != 1) fail(ErrorKind::Format, "unsupported GPOI version in " + path.string());
  const std::uint32_t w = get_u32(in);
  const std::uint32_t h = get_u32(in);
  if (!in || w == 0 || h == 0) fail(ErrorKind::Format, "bad GPOI header in " + path.string());
  std::vector<double> data(static_cast<std::size_t>(w) * h);
  std::vector<unsigned char> raw(data.size() * 8);
  in.read(reinterpret_cast<char *>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (in.gcount() != static_cast<std::streamsize>(raw.size())) fail(ErrorKind::Format, "truncated GPOI " + path.string());
  for (std::size_t i = 0; i < data.size(); ++i) {
    std::uint64_t bits = 0;
    for (int b = 7; b >= 0; --b) bits = (bits << 8) | raw[8 * i + b];
    std::memcpy(&data[i], &bits, 8);
  }
  return Image(static_cast<int>(w), static_cast<int>(h), std::move(data));
}

} // namespace gpo
