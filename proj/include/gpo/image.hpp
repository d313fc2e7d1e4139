#pragma once

#include "gpo/common.hpp"

#include <filesystem>
#include <span>
#include <vector>

namespace gpo {

// Single-channel raster with intensities in [0,1], row-major. Immutable once
// constructed; build the pixel vector first, then wrap it.
class Image {
public:
  Image() = default;
  Image(int width, int height, std::vector<double> data);

  static Image filled(int width, int height, double value);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double at(int x, int y) const { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  std::span<const double> pixels() const noexcept { return data_; }

  friend bool operator==(const Image &, const Image &) = default;

private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> data_;
};

struct Sample {
  double value = 0.0;
  double gx = 0.0; // d value / d x
  double gy = 0.0; // d value / d y
};

// Bilinear lookup with clamp-to-edge. Derivatives are the partials of the
// bilinear patch containing p (floor convention on lattice lines) and are 0
// along any axis on which p was clamped.
Sample sample_bilinear(const Image &img, Vec2 p);

// Value-only variant of sample_bilinear (same clamping, same arithmetic).
double sample_value(const Image &img, Vec2 p);

// Separable Gaussian, radius ceil(3 sigma), unit-sum kernel, edge replication.
Image gaussian_blur(const Image &img, double sigma);

// Discrete 1-D kernel used by gaussian_blur (length 2*ceil(3 sigma)+1).
std::vector<double> gaussian_kernel(double sigma);

// Half-pixel aligned bilinear resample: src = (dst + 0.5) * src/dst - 0.5.
Image resize_bilinear(const Image &img, int new_w, int new_h);

// --- I/O ---------------------------------------------------------------

// PNG (8/16-bit gray, gray+alpha, RGB, RGBA), binary PGM/PPM (P5/P6,
// maxval <= 65535) and the GPOI float dump. Colour is reduced to luma.
Image load_image(const std::filesystem::path &path);

// 8-bit grayscale PNG, values round(v * 255).
void save_png(const Image &img, const std::filesystem::path &path);

// 8-bit RGB PNG from three equally sized channels.
void save_png_rgb(const Image &r, const Image &g, const Image &b, const std::filesystem::path &path);

// Lossless dump: "GPOI", version byte 1, u32 width, u32 height (little
// endian), then width*height little-endian float64 values, row-major.
void save_image_dump(const Image &img, const std::filesystem::path &path);
Image load_image_dump(const std::filesystem::path &path);

} // namespace gpo
