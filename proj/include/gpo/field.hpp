#pragma once

#include "gpo/common.hpp"
#include "gpo/image.hpp"
#include "gpo/primitives.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace gpo {

// Dense per-pixel displacement u(x), row-major, in pixels.
struct DisplacementField {
  int width = 0;
  int height = 0;
  std::vector<Vec2> u;
  std::uint64_t source_revision = 0; // NodeSet revision it was blended from

  DisplacementField() = default;
  DisplacementField(int w, int h) : width(w), height(h), u(static_cast<std::size_t>(w) * h) {}

  Vec2 &at(int x, int y) { return u[static_cast<std::size_t>(y) * width + x]; }
  const Vec2 &at(int x, int y) const { return u[static_cast<std::size_t>(y) * width + x]; }

  // Bilinear interpolation with clamp-to-edge (same convention as images).
  Vec2 interpolate(Vec2 p) const;
};

// Per-pixel K nearest node ids, ascending by (squared distance, id).
struct NeighborIndex {
  int width = 0;
  int height = 0;
  int k = 0;
  std::size_t node_count = 0;
  std::uint64_t node_revision = 0;
  std::vector<std::int32_t> ids; // width*height*k
  std::vector<double> d2;        // squared distances at build time

  std::span<const std::int32_t> ids_at(std::size_t pixel) const {
    return {ids.data() + pixel * static_cast<std::size_t>(k), static_cast<std::size_t>(k)};
  }
  std::span<const double> d2_at(std::size_t pixel) const {
    return {d2.data() + pixel * static_cast<std::size_t>(k), static_cast<std::size_t>(k)};
  }
};

// Exact KNN for every pixel center, k = min(K, N). A uniform hash over node
// centers bounds the candidate set per 8x8 pixel tile; ordering and ties
// match an exhaustive scan.
NeighborIndex build_knn(const NodeSet &nodes, int width, int height, int K);

// Softmax-Gaussian weights of the K neighbours of pixel (x, y), written to
// `out` (size >= index.k). Uses the current node parameters.
void blend_weights(const NodeSet &nodes, const NeighborIndex &index, int x, int y, std::span<double> out);

// u(x) = sum_i w_i(x) t_i over the pixel's neighbour set.
DisplacementField blend(const NodeSet &nodes, const NeighborIndex &index);

// out(x) = img(x + u(x)), bilinear with clamp-to-edge.
Image warp(const Image &img, const DisplacementField &field);

struct FieldStats {
  double max_mag = 0.0;
  double mean_mag = 0.0;
  double jacobian_min_det = 1.0; // forward differences of x + u(x)
};

FieldStats field_stats(const DisplacementField &field);

// "GPOF", version byte 1, u32 width, u32 height, then (dx, dy) float32
// pairs, all little endian, row-major.
void write_field(const DisplacementField &field, const std::filesystem::path &path);
DisplacementField read_field(const std::filesystem::path &path);

} // namespace gpo
