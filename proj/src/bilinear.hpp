#pragma once

#include <array>
#include <cmath>
#include <cstddef>

namespace gpo::detail {

// One axis of a clamped bilinear lookup.
struct AxisCell {
  int i0 = 0;
  int i1 = 0;
  double f = 0.0;
  bool clamped = false;
};

inline AxisCell axis_cell(double p, int n) {
  AxisCell c;
  if (n == 1) {
    c.clamped = true;
    return c;
  }
  if (p < 0.0) {
    c.clamped = true;
    c.i1 = 1;
    return c;
  }
  if (p > static_cast<double>(n - 1)) {
    c.clamped = true;
    c.i0 = n - 2;
    c.i1 = n - 1;
    c.f = 1.0;
    return c;
  }
  int i0 = static_cast<int>(std::floor(p));
  if (i0 >= n - 1) i0 = n - 2;
  c.i0 = i0;
  c.i1 = i0 + 1;
  c.f = p - static_cast<double>(i0);
  return c;
}

// Four lattice taps (row-major indices) and their weights.
struct Stencil {
  std::array<std::size_t, 4> index{};
  std::array<double, 4> weight{};
};

inline Stencil bilinear_stencil(int width, int height, double x, double y) {
  const AxisCell cx = axis_cell(x, width);
  const AxisCell cy = axis_cell(y, height);
  Stencil s;
  const auto at = [width](int ix, int iy) { return static_cast<std::size_t>(iy) * width + ix; };
  s.index = {at(cx.i0, cy.i0), at(cx.i1, cy.i0), at(cx.i0, cy.i1), at(cx.i1, cy.i1)};
  s.weight = {(1.0 - cx.f) * (1.0 - cy.f), cx.f * (1.0 - cy.f), (1.0 - cx.f) * cy.f, cx.f * cy.f};
  return s;
}

} // namespace gpo::detail
