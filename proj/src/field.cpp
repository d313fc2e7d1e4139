#include "gpo/field.hpp"
#include "gpo/parallel.hpp"

#include "bilinear.hpp"
#include "blend_kernel.hpp"

#include <algorithm>
#include <array>
#include <cstring>
#include <fstream>
#include <limits>

namespace gpo {

using detail::NodeCache;
using detail::softmax_weights;

Vec2 DisplacementField::interpolate(Vec2 p) const {
  if (std::isnan(p.x) || std::isnan(p.y)) fail(ErrorKind::Argument, "NaN field query");
  const auto s = detail::bilinear_stencil(width, height, p.x, p.y);
  Vec2 out;
  for (int i = 0; i < 4; ++i) out += u[s.index[i]] * s.weight[i];
  return out;
}

namespace {

constexpr int kTile = 8;

// Uniform bucket grid over node centers (CSR layout).
class NodeGrid {
public:
  NodeGrid(const std::vector<ControlNode> &nodes, int width, int height) : nodes_(nodes) {
    x0_ = 0.0;
    y0_ = 0.0;
    double x1 = width - 1.0, y1 = height - 1.0;
    for (const auto &n : nodes) {
      x0_ = std::min(x0_, n.g.x);
      y0_ = std::min(y0_, n.g.y);
      x1 = std::max(x1, n.g.x);
      y1 = std::max(y1, n.g.y);
    }
    const double area = std::max(1.0, (x1 - x0_ + 1.0) * (y1 - y0_ + 1.0));
    cell_ = std::max(1.0, std::sqrt(2.0 * area / static_cast<double>(nodes.size())));
    nx_ = static_cast<int>((x1 - x0_) / cell_) + 1;
    ny_ = static_cast<int>((y1 - y0_) / cell_) + 1;
    start_.assign(static_cast<std::size_t>(nx_) * ny_ + 1, 0);
    std::vector<int> cell_of(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      cell_of[i] = cell_index(nodes[i].g);
      ++start_[cell_of[i] + 1];
    }
    for (std::size_t c = 1; c < start_.size(); ++c) start_[c] += start_[c - 1];
    items_.resize(nodes.size());
    std::vector<int> fill(start_.begin(), start_.end() - 1);
    for (std::size_t i = 0; i < nodes.size(); ++i) items_[fill[cell_of[i]]++] = static_cast<std::int32_t>(i);
    extent_ = std::hypot(x1 - x0_, y1 - y0_) + cell_;
  }

  // Appends every node whose cell overlaps the square [c - r, c + r].
  void gather(Vec2 c, double r, std::vector<std::int32_t> &out) const {
    const int cx0 = std::clamp(static_cast<int>(std::floor((c.x - r - x0_) / cell_)), 0, nx_ - 1);
    const int cx1 = std::clamp(static_cast<int>(std::floor((c.x + r - x0_) / cell_)), 0, nx_ - 1);
    const int cy0 = std::clamp(static_cast<int>(std::floor((c.y - r - y0_) / cell_)), 0, ny_ - 1);
    const int cy1 = std::clamp(static_cast<int>(std::floor((c.y + r - y0_) / cell_)), 0, ny_ - 1);
    for (int cy = cy0; cy <= cy1; ++cy)
      for (int cx = cx0; cx <= cx1; ++cx) {
        const int c_idx = cy * nx_ + cx;
        out.insert(out.end(), items_.begin() + start_[c_idx], items_.begin() + start_[c_idx + 1]);
      }
  }

  // Distance from c to its k-th nearest node.
  double kth_distance(Vec2 c, int k, std::vector<std::int32_t> &scratch, std::vector<double> &dist) const {
    double r = cell_;
    for (;;) {
      scratch.clear();
      gather(c, r, scratch);
      dist.clear();
      for (auto id : scratch) {
        const double d = norm(nodes_[id].g - c);
        if (d <= r) dist.push_back(d);
      }
      if (static_cast<int>(dist.size()) >= k) {
        std::nth_element(dist.begin(), dist.begin() + (k - 1), dist.end());
        return dist[k - 1];
      }
      if (r > 2.0 * extent_ + norm(c - Vec2{x0_, y0_})) {
        // Every node has been seen; fall back to the exhaustive answer.
        dist.clear();
        for (const auto &n : nodes_) dist.push_back(norm(n.g - c));
        std::nth_element(dist.begin(), dist.begin() + (k - 1), dist.end());
        return dist[k - 1];
      }
      r *= 2.0;
    }
  }

private:
  int cell_index(const Vec2 &p) const {
    const int cx = std::clamp(static_cast<int>((p.x - x0_) / cell_), 0, nx_ - 1);
    const int cy = std::clamp(static_cast<int>((p.y - y0_) / cell_), 0, ny_ - 1);
    return cy * nx_ + cx;
  }

  const std::vector<ControlNode> &nodes_;
  double x0_ = 0.0, y0_ = 0.0, cell_ = 1.0, extent_ = 0.0;
  int nx_ = 1, ny_ = 1;
  std::vector<int> start_;
  std::vector<std::int32_t> items_;
};

} // namespace

NeighborIndex build_knn(const NodeSet &nodes, int width, int height, int K) {
  if (K < 1) fail(ErrorKind::Argument, "K must be >= 1");
  if (nodes.size() < 1) fail(ErrorKind::Argument, "KNN needs at least one node");
  if (width < 1 || height < 1) fail(ErrorKind::Argument, "KNN grid must be >= 1x1");

  NeighborIndex index;
  index.width = width;
  index.height = height;
  index.k = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(K), nodes.size()));
  index.node_count = nodes.size();
  index.node_revision = nodes.revision();
  const std::size_t k = static_cast<std::size_t>(index.k);
  index.ids.resize(static_cast<std::size_t>(width) * height * k);
  index.d2.resize(index.ids.size());

  const auto &ns = nodes.nodes();
  const NodeGrid grid(ns, width, height);
  const int tiles_x = (width + kTile - 1) / kTile;
  const int tiles_y = (height + kTile - 1) / kTile;

  parallel_rows(static_cast<std::size_t>(tiles_y), [&](std::size_t, std::size_t ty0, std::size_t ty1) {
    std::vector<std::int32_t> scratch, cand;
    std::vector<double> dist;
    std::vector<double> top_d(k);
    std::vector<std::int32_t> top_id(k);
    for (std::size_t ty = ty0; ty < ty1; ++ty) {
      for (int tx = 0; tx < tiles_x; ++tx) {
        const int x0 = tx * kTile, x1 = std::min(width, x0 + kTile) - 1;
        const int y0 = static_cast<int>(ty) * kTile, y1 = std::min(height, y0 + kTile) - 1;
        const Vec2 c{0.5 * (x0 + x1), 0.5 * (y0 + y1)};
        const double half_diag = 0.5 * std::hypot(x1 - x0, y1 - y0);
        const double dk = grid.kth_distance(c, index.k, scratch, dist);
        // Any pixel's k-th neighbour lies within dk + 2 * half_diag of c.
        const double reach = (dk + 2.0 * half_diag) * (1.0 + 1e-12) + 1e-9;
        scratch.clear();
        grid.gather(c, reach, scratch);
        cand.clear();
        for (auto id : scratch)
          if (norm(ns[id].g - c) <= reach) cand.push_back(id);

        for (int y = y0; y <= y1; ++y) {
          for (int x = x0; x <= x1; ++x) {
            std::size_t filled = 0;
            for (auto id : cand) {
              const double dx = x - ns[id].g.x;
              const double dy = y - ns[id].g.y;
              const double d2 = dx * dx + dy * dy;
              if (filled == k) {
                const double worst = top_d[k - 1];
                if (d2 > worst || (d2 == worst && id > top_id[k - 1])) continue;
              } else {
                ++filled;
              }
              std::size_t pos = filled - 1;
              while (pos > 0 && (top_d[pos - 1] > d2 || (top_d[pos - 1] == d2 && top_id[pos - 1] > id))) {
                top_d[pos] = top_d[pos - 1];
                top_id[pos] = top_id[pos - 1];
                --pos;
              }
              top_d[pos] = d2;
              top_id[pos] = id;
            }
            const std::size_t base = (static_cast<std::size_t>(y) * width + x) * k;
            std::copy(top_id.begin(), top_id.end(), index.ids.begin() + base);
            std::copy(top_d.begin(), top_d.end(), index.d2.begin() + base);
          }
        }
      }
    }
  });
  return index;
}

void blend_weights(const NodeSet &nodes, const NeighborIndex &index, int x, int y, std::span<double> out) {
  if (index.node_count != nodes.size()) fail(ErrorKind::Consistency, "neighbour index built for another node set");
  if (out.size() < static_cast<std::size_t>(index.k)) fail(ErrorKind::Argument, "weight buffer too small");
  const NodeCache cache(nodes);
  softmax_weights(cache, index.ids_at(static_cast<std::size_t>(y) * index.width + x), x, y, out.data());
}

DisplacementField blend(const NodeSet &nodes, const NeighborIndex &index) {
  if (index.node_count != nodes.size()) fail(ErrorKind::Consistency, "neighbour index built for another node set");
  const NodeCache cache(nodes);
  DisplacementField field(index.width, index.height);
  field.source_revision = nodes.revision();
  const std::size_t k = static_cast<std::size_t>(index.k);
  parallel_rows(static_cast<std::size_t>(index.height), [&](std::size_t, std::size_t y0, std::size_t y1) {
    std::vector<double> w(k);
    for (std::size_t y = y0; y < y1; ++y) {
      for (int x = 0; x < index.width; ++x) {
        const std::size_t p = y * index.width + x;
        const auto ids = index.ids_at(p);
        softmax_weights(cache, ids, x, static_cast<double>(y), w.data());
        Vec2 u;
        for (std::size_t j = 0; j < k; ++j) {
          u.x += w[j] * cache.tx[ids[j]];
          u.y += w[j] * cache.ty[ids[j]];
        }
        field.u[p] = u;
      }
    }
  });
  return field;
}

Image warp(const Image &img, const DisplacementField &field) {
  if (img.width() != field.width || img.height() != field.height)
    fail(ErrorKind::Argument, "warp: image and field dimensions differ");
  std::vector<double> out(img.size());
  parallel_rows(static_cast<std::size_t>(img.height()), [&](std::size_t, std::size_t y0, std::size_t y1) {
    for (std::size_t y = y0; y < y1; ++y)
      for (int x = 0; x < img.width(); ++x) {
        const std::size_t p = y * img.width() + x;
        out[p] = sample_value(img, {x + field.u[p].x, static_cast<double>(y) + field.u[p].y});
      }
  });
  return Image(img.width(), img.height(), std::move(out));
}

FieldStats field_stats(const DisplacementField &field) {
  if (field.width < 2 || field.height < 2) fail(ErrorKind::Argument, "field_stats needs a field of at least 2x2");
  FieldStats s;
  double sum = 0.0;
  for (const auto &u : field.u) {
    const double m = norm(u);
    s.max_mag = std::max(s.max_mag, m);
    sum += m;
  }
  s.mean_mag = sum / static_cast<double>(field.u.size());
  double min_det = std::numeric_limits<double>::infinity();
  for (int y = 0; y + 1 < field.height; ++y)
    for (int x = 0; x + 1 < field.width; ++x) {
      const Vec2 &c = field.at(x, y);
      const Vec2 dx = field.at(x + 1, y) - c;
      const Vec2 dy = field.at(x, y + 1) - c;
      const double det = (1.0 + dx.x) * (1.0 + dy.y) - dy.x * dx.y;
      min_det = std::min(min_det, det);
    }
  s.jacobian_min_det = min_det;
  return s;
}

namespace {

void put_u32(std::ostream &out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f32(std::ostream &out, float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, 4);
  put_u32(out, bits);
}

std::uint32_t get_u32(const unsigned char *p) {
  return p[0] | (p[1] << 8) | (p[2] << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

} // namespace

void write_field(const DisplacementField &field, const std::filesystem::path &path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  out.write("GPOF", 4);
  out.put(1);
  put_u32(out, static_cast<std::uint32_t>(field.width));
  put_u32(out, static_cast<std::uint32_t>(field.height));
  for (const auto &u : field.u) {
    put_f32(out, static_cast<float>(u.x));
    put_f32(out, static_cast<float>(u.y));
  }
  if (!out) fail(ErrorKind::Io, "write failed for " + path.string());
}

DisplacementField read_field(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  unsigned char head[13];
  in.read(reinterpret_cast<char *>(head), sizeof(head));
  if (in.gcount() != sizeof(head) || std::memcmp(head, "GPOF", 4) != 0)
    fail(ErrorKind::Format, "not a GPOF field dump: " + path.string());
  if (head[4] != 1) fail(ErrorKind::Format, "unsupported GPOF version in " + path.string());
  const std::uint32_t w = get_u32(head + 5);
  const std::uint32_t h = get_u32(head + 9);
  if (w == 0 || h == 0) fail(ErrorKind::Format, "empty GPOF field in " + path.string());
  DisplacementField field(static_cast<int>(w), static_cast<int>(h));
  std::vector<unsigned char> raw(field.u.size() * 8);
  in.read(reinterpret_cast<char *>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (in.gcount() != static_cast<std::streamsize>(raw.size())) fail(ErrorKind::Format, "truncated GPOF " + path.string());
  for (std::size_t i = 0; i < field.u.size(); ++i) {
    float fx, fy;
    const std::uint32_t bx = get_u32(raw.data() + 8 * i), by = get_u32(raw.data() + 8 * i + 4);
    std::memcpy(&fx, &bx, 4);
    std::memcpy(&fy, &by, 4);
    if (!std::isfinite(fx) || !std::isfinite(fy)) fail(ErrorKind::Format, "non-finite displacement in " + path.string());
    field.u[i] = {fx, fy};
  }
  return field;
}

} // namespace gpo
