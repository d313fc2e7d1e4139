#include "gpo/image.hpp"
#include "gpo/parallel.hpp"

#include "bilinear.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace gpo {

Image::Image(int width, int height, std::vector<double> data)
    : width_(width), height_(height), data_(std::move(data)) {
  if (width < 1 || height < 1)
    fail(ErrorKind::Argument, "image dimensions must be >= 1, got " + std::to_string(width) + "x" +
                                  std::to_string(height));
  if (data_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height))
    fail(ErrorKind::Argument, "image data length does not match dimensions");
  for (double v : data_) {
    if (!(v >= 0.0 && v <= 1.0)) fail(ErrorKind::Argument, "image value outside [0,1]: " + std::to_string(v));
  }
}

Image Image::filled(int width, int height, double value) {
  const auto n = static_cast<std::size_t>(std::max(width, 0)) * static_cast<std::size_t>(std::max(height, 0));
  return Image(width, height, std::vector<double>(n, value));
}

using detail::axis_cell;
using detail::AxisCell;

Sample sample_bilinear(const Image &img, Vec2 p) {
  if (std::isnan(p.x) || std::isnan(p.y)) fail(ErrorKind::Argument, "NaN sample coordinate");
  const AxisCell cx = axis_cell(p.x, img.width());
  const AxisCell cy = axis_cell(p.y, img.height());
  const double v00 = img.at(cx.i0, cy.i0);
  const double v10 = img.at(cx.i1, cy.i0);
  const double v01 = img.at(cx.i0, cy.i1);
  const double v11 = img.at(cx.i1, cy.i1);
  const double top = v00 * (1.0 - cx.f) + v10 * cx.f;
  const double bot = v01 * (1.0 - cx.f) + v11 * cx.f;
  Sample s;
  s.value = top * (1.0 - cy.f) + bot * cy.f;
  if (!cx.clamped) s.gx = (v10 - v00) * (1.0 - cy.f) + (v11 - v01) * cy.f;
  if (!cy.clamped) s.gy = bot - top;
  return s;
}

double sample_value(const Image &img, Vec2 p) {
  if (std::isnan(p.x) || std::isnan(p.y)) fail(ErrorKind::Argument, "NaN sample coordinate");
  const AxisCell cx = axis_cell(p.x, img.width());
  const AxisCell cy = axis_cell(p.y, img.height());
  const double top = img.at(cx.i0, cy.i0) * (1.0 - cx.f) + img.at(cx.i1, cy.i0) * cx.f;
  const double bot = img.at(cx.i0, cy.i1) * (1.0 - cx.f) + img.at(cx.i1, cy.i1) * cx.f;
  return top * (1.0 - cy.f) + bot * cy.f;
}

std::vector<double> gaussian_kernel(double sigma) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) fail(ErrorKind::Argument, "blur sigma must be >= 0");
  if (sigma == 0.0) return {1.0};
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * (i * i) / (sigma * sigma));
    k[i + radius] = v;
    sum += v;
  }
  for (double &v : k) v /= sum;
  return k;
}

Image gaussian_blur(const Image &img, double sigma) {
  const std::vector<double> k = gaussian_kernel(sigma);
  if (sigma == 0.0) return img;
  const int radius = static_cast<int>(k.size() / 2);
  const int w = img.width();
  const int h = img.height();
  const auto px = img.pixels();

  std::vector<double> tmp(px.size());
  parallel_rows(h, [&](std::size_t, std::size_t y0, std::size_t y1) {
    for (std::size_t y = y0; y < y1; ++y) {
      const double *row = px.data() + y * w;
      for (int x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i) acc += k[i + radius] * row[std::clamp(x + i, 0, w - 1)];
        tmp[y * w + x] = acc;
      }
    }
  });
  std::vector<double> out(px.size());
  parallel_rows(h, [&](std::size_t, std::size_t y0, std::size_t y1) {
    for (std::size_t y = y0; y < y1; ++y) {
      for (int x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i)
          acc += k[i + radius] * tmp[static_cast<std::size_t>(std::clamp(static_cast<int>(y) + i, 0, h - 1)) * w + x];
        out[y * w + x] = std::clamp(acc, 0.0, 1.0);
      }
    }
  });
  return Image(w, h, std::move(out));
}

Image resize_bilinear(const Image &img, int new_w, int new_h) {
  if (new_w < 1 || new_h < 1) fail(ErrorKind::Argument, "resize target must be >= 1x1");
  if (new_w == img.width() && new_h == img.height()) return img;
  const double sx = static_cast<double>(img.width()) / new_w;
  const double sy = static_cast<double>(img.height()) / new_h;
  std::vector<double> out(static_cast<std::size_t>(new_w) * new_h);
  parallel_rows(new_h, [&](std::size_t, std::size_t y0, std::size_t y1) {
    for (std::size_t y = y0; y < y1; ++y) {
      const double src_y = (static_cast<double>(y) + 0.5) * sy - 0.5;
      for (int x = 0; x < new_w; ++x) {
        const double src_x = (x + 0.5) * sx - 0.5;
        out[y * new_w + x] = std::clamp(sample_value(img, {src_x, src_y}), 0.0, 1.0);
      }
    }
  });
  return Image(new_w, new_h, std::move(out));
}

} // namespace gpo
