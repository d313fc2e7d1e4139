#pragma once

#include "gpo/primitives.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

namespace gpo::detail {

// Per-node quantities the blending inner loops need, laid out contiguously.
struct NodeCache {
  std::vector<double> gx, gy, tx, ty, inv_two_r2, r;

  explicit NodeCache(const NodeSet &nodes) {
    const std::size_t n = nodes.size();
    gx.resize(n);
    gy.resize(n);
    tx.resize(n);
    ty.resize(n);
    inv_two_r2.resize(n);
    r.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      gx[i] = nodes[i].g.x;
      gy[i] = nodes[i].g.y;
      tx[i] = nodes[i].t.x;
      ty[i] = nodes[i].t.y;
      r[i] = nodes.radius(i);
      inv_two_r2[i] = 1.0 / (2.0 * r[i] * r[i]);
    }
  }
};

// Max-shifted softmax of s_i = -|x - g_i|^2 / (2 r_i^2) over `ids`.
inline void softmax_weights(const NodeCache &c, std::span<const std::int32_t> ids, double x, double y, double *w) {
  const std::size_t k = ids.size();
  double smax = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < k; ++j) {
    const auto id = ids[j];
    const double dx = x - c.gx[id];
    const double dy = y - c.gy[id];
    w[j] = -(dx * dx + dy * dy) * c.inv_two_r2[id];
    smax = std::max(smax, w[j]);
  }
  double sum = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    w[j] = std::exp(w[j] - smax);
    sum += w[j];
  }
  const double inv = 1.0 / sum;
  for (std::size_t j = 0; j < k; ++j) w[j] *= inv;
}

} // namespace gpo::detail
