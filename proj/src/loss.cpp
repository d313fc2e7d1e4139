#include "gpo/loss.hpp"
#include "gpo/parallel.hpp"

#include "bilinear.hpp"
#include "blend_kernel.hpp"

#include <algorithm>
#include <random>
#include <sstream>

namespace gpo {

void LossWeights::validate() const {
  if (!(alpha_gcc >= 0.0) || !(alpha_ncc >= 0.0)) fail(ErrorKind::Argument, "loss weights must be >= 0");
  if (alpha_gcc == 0.0 && alpha_ncc == 0.0) fail(ErrorKind::Argument, "loss weights cannot both be 0");
  if (!std::isfinite(norm_len)) fail(ErrorKind::Argument, "norm_len must be finite");
}

double NodeGrads::max_abs() const {
  double m = 0.0;
  for (std::size_t i = 0; i < size(); ++i) {
    m = std::max({m, std::abs(dg[i].x), std::abs(dg[i].y), std::abs(dt[i].x), std::abs(dt[i].y), std::abs(dbeta[i])});
  }
  return m;
}

NccResult ncc_loss(const Image &fixed, const Image &warped) {
  if (fixed.width() != warped.width() || fixed.height() != warped.height())
    fail(ErrorKind::Argument, "ncc_loss: image dimensions differ");
  const auto a = fixed.pixels();
  const auto b = warped.pixels();
  const std::size_t n = a.size();
  const double inv_n = 1.0 / static_cast<double>(n);

  double mean_a = 0.0, mean_b = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mean_a += a[i];
    mean_b += b[i];
  }
  mean_a *= inv_n;
  mean_b *= inv_n;
  double saa = 0.0, sbb = 0.0, sab = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = a[i] - mean_a;
    const double db = b[i] - mean_b;
    saa += da * da;
    sbb += db * db;
    sab += da * db;
  }

  NccResult r;
  r.grad.assign(n, 0.0);
  if (saa * inv_n < kNccVarianceFloor || sbb * inv_n < kNccVarianceFloor) return r;

  const double d = std::sqrt(saa * sbb + kNccEpsilon);
  r.rho = sab / d;
  r.loss = 1.0 - r.rho;
  // d rho / d b_k = A_k / D - Sab * Saa * B_k / D^3   (sum_k A_k = sum_k B_k = 0)
  const double c1 = 1.0 / d;
  const double c2 = sab * saa / (d * d * d);
  for (std::size_t i = 0; i < n; ++i) r.grad[i] = -((a[i] - mean_a) * c1 - (b[i] - mean_b) * c2);
  return r;
}

GccResult gcc_loss(const NodeSet &nodes, const DisplacementField &field, double norm_len) {
  if (!(norm_len > 0.0)) fail(ErrorKind::Argument, "norm_len must be > 0");
  GccResult r;
  const auto &anchors = nodes.anchors();
  const auto &targets = nodes.targets();
  if (anchors.empty()) return r;
  const double scale = 1.0 / (static_cast<double>(anchors.size()) * norm_len * norm_len);
  r.grad.resize(anchors.size());
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    const Vec2 res = field.interpolate(anchors[i]) - targets[i];
    r.loss += norm2(res);
    r.grad[i] = res * (2.0 * scale);
  }
  r.loss *= scale;
  return r;
}

LossReport total_loss(const Image &fixed, const Image &warped, const NodeSet &nodes, const DisplacementField &field,
                      const LossWeights &w) {
  w.validate();
  const NccResult ncc = ncc_loss(fixed, warped);
  const GccResult gcc = gcc_loss(nodes, field, w.resolved_norm_len(fixed.width()));
  LossReport rep;
  rep.l_ncc = ncc.loss;
  rep.l_gcc = gcc.loss;
  rep.ncc_value = ncc.rho;
  rep.total = w.alpha_gcc * rep.l_gcc + w.alpha_ncc * rep.l_ncc;
  return rep;
}

ForwardPass forward(const Image &fixed, const Image &moving_coarse, const NodeSet &nodes, const NeighborIndex &index,
                    const LossWeights &w) {
  w.validate();
  if (fixed.width() != moving_coarse.width() || fixed.height() != moving_coarse.height())
    fail(ErrorKind::Argument, "fixed and moving images differ in size");
  if (index.width != fixed.width() || index.height != fixed.height())
    fail(ErrorKind::Consistency, "neighbour index does not cover the fixed image");
  ForwardPass f;
  f.field = blend(nodes, index);
  for (const Vec2 &u : f.field.u)
    if (!is_finite(u)) fail(ErrorKind::Numerical, "non-finite displacement in the blended field");
  f.warped = warp(moving_coarse, f.field);
  f.ncc = ncc_loss(fixed, f.warped);
  f.gcc = gcc_loss(nodes, f.field, w.resolved_norm_len(fixed.width()));
  f.report.l_ncc = f.ncc.loss;
  f.report.l_gcc = f.gcc.loss;
  f.report.ncc_value = f.ncc.rho;
  f.report.total = w.alpha_gcc * f.report.l_gcc + w.alpha_ncc * f.report.l_ncc;
  return f;
}

std::vector<Vec2> displacement_adjoint(const Image &moving_coarse, const NodeSet &nodes, const ForwardPass &fwd,
                                       const LossWeights &w) {
  const int width = fwd.field.width;
  const int height = fwd.field.height;
  std::vector<Vec2> adj(fwd.field.u.size());
  if (w.alpha_ncc != 0.0) {
    parallel_rows(static_cast<std::size_t>(height), [&](std::size_t, std::size_t y0, std::size_t y1) {
      for (std::size_t y = y0; y < y1; ++y)
        for (int x = 0; x < width; ++x) {
          const std::size_t p = y * width + x;
          const double gl = fwd.ncc.grad[p];
          if (gl == 0.0) continue;
          const Vec2 &u = fwd.field.u[p];
          const Sample s = sample_bilinear(moving_coarse, {x + u.x, static_cast<double>(y) + u.y});
          adj[p] = Vec2{s.gx, s.gy} * (w.alpha_ncc * gl);
        }
    });
  }
  if (w.alpha_gcc != 0.0) {
    const auto &anchors = nodes.anchors();
    for (std::size_t i = 0; i < fwd.gcc.grad.size(); ++i) {
      const auto st = detail::bilinear_stencil(width, height, anchors[i].x, anchors[i].y);
      for (int j = 0; j < 4; ++j) adj[st.index[j]] += fwd.gcc.grad[i] * (w.alpha_gcc * st.weight[j]);
    }
  }
  return adj;
}

NodeGrads accumulate_node_grads(const NodeSet &nodes, const NeighborIndex &index, const DisplacementField &field,
                                std::span<const Vec2> adjoint) {
  if (index.node_count != nodes.size()) fail(ErrorKind::Consistency, "neighbour index built for another node set");
  if (adjoint.size() != field.u.size() || field.width != index.width || field.height != index.height)
    fail(ErrorKind::Consistency, "adjoint, field and index sizes disagree");
  const std::size_t n = nodes.size();
  const std::size_t k = static_cast<std::size_t>(index.k);
  const detail::NodeCache cache(nodes);
  const std::size_t workers = worker_count();

  // Five accumulators per node: dg.x, dg.y, dt.x, dt.y, d radius.
  std::vector<std::vector<double>> partial(workers, std::vector<double>(5 * n, 0.0));
  parallel_rows(static_cast<std::size_t>(index.height), workers, [&](std::size_t wi, std::size_t y0, std::size_t y1) {
    auto &acc = partial[wi];
    std::vector<double> wts(k);
    for (std::size_t y = y0; y < y1; ++y) {
      for (int x = 0; x < index.width; ++x) {
        const std::size_t p = y * index.width + x;
        const Vec2 &gad = adjoint[p];
        if (gad.x == 0.0 && gad.y == 0.0) continue;
        const auto ids = index.ids_at(p);
        detail::softmax_weights(cache, ids, x, static_cast<double>(y), wts.data());
        const Vec2 &u = field.u[p];
        for (std::size_t j = 0; j < k; ++j) {
          const auto id = static_cast<std::size_t>(ids[j]);
          const double wj = wts[j];
          double *a = acc.data() + 5 * id;
          a[2] += wj * gad.x;
          a[3] += wj * gad.y;
          // d L / d s_j for the softmax score s_j
          const double ds = wj * (gad.x * (cache.tx[id] - u.x) + gad.y * (cache.ty[id] - u.y));
          if (ds == 0.0) continue;
          const double dx = x - cache.gx[id];
          const double dy = static_cast<double>(y) - cache.gy[id];
          const double inv_r2 = 2.0 * cache.inv_two_r2[id];
          a[0] += ds * dx * inv_r2;
          a[1] += ds * dy * inv_r2;
          a[4] += ds * (dx * dx + dy * dy) * inv_r2 / cache.r[id];
        }
      }
    }
  });

  NodeGrads g(n);
  for (std::size_t wi = 0; wi < workers; ++wi) {
    const auto &acc = partial[wi];
    for (std::size_t i = 0; i < n; ++i) {
      g.dg[i].x += acc[5 * i];
      g.dg[i].y += acc[5 * i + 1];
      g.dt[i].x += acc[5 * i + 2];
      g.dt[i].y += acc[5 * i + 3];
      g.dbeta[i] += acc[5 * i + 4];
    }
  }
  for (std::size_t i = 0; i < n; ++i) g.dbeta[i] *= radius_slope(nodes[i].beta, nodes.radius_config());
  return g;
}

NodeGrads backward(const Image &fixed, const Image &moving_coarse, const NodeSet &nodes, const NeighborIndex &index,
                   const ForwardPass &fwd, const LossWeights &w) {
  if (fwd.field.source_revision != nodes.revision() || index.node_revision != nodes.revision() ||
      index.node_count != nodes.size())
    fail(ErrorKind::Consistency, "stale field or neighbour index: node set has changed since they were built");
  if (fixed.width() != fwd.field.width || fixed.height() != fwd.field.height)
    fail(ErrorKind::Consistency, "field does not match the fixed image");
  const std::vector<Vec2> adj = displacement_adjoint(moving_coarse, nodes, fwd, w);
  return accumulate_node_grads(nodes, index, fwd.field, adj);
}

NodeGrads backward(const Image &fixed, const Image &moving_coarse, const NodeSet &nodes, const NeighborIndex &index,
                   const DisplacementField &field, const LossWeights &w) {
  if (field.source_revision != nodes.revision())
    fail(ErrorKind::Consistency, "stale field: node set has changed since it was blended");
  ForwardPass f;
  f.field = field;
  f.warped = warp(moving_coarse, field);
  f.ncc = ncc_loss(fixed, f.warped);
  f.gcc = gcc_loss(nodes, field, w.resolved_norm_len(fixed.width()));
  return backward(fixed, moving_coarse, nodes, index, f, w);
}

// --- gradcheck -------------------------------------------------------------

namespace {

// Smooth instances are a random sum of broad Gaussian bumps, then blurred.
// Non-smooth instances are raw white noise.
Image random_image(int size, double sigma, bool smooth, std::mt19937_64 &rng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::vector<double> raw(static_cast<std::size_t>(size) * size, 0.0);
  if (smooth) {
    for (int b = 0; b < 16; ++b) {
      const double cx = u01(rng) * size, cy = u01(rng) * size;
      const double s = size * (1.0 / 16.0 + u01(rng) * (1.0 / 6.0 - 1.0 / 16.0));
      const double a = 2.0 * u01(rng) - 1.0;
      for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x)
          raw[static_cast<std::size_t>(y) * size + x] +=
              a * std::exp(-((x - cx) * (x - cx) + (y - cy) * (y - cy)) / (2.0 * s * s));
    }
  } else {
    for (auto &v : raw) v = u01(rng);
  }
  const auto [lo0, hi0] = std::minmax_element(raw.begin(), raw.end());
  const double lo = *lo0, span0 = std::max(*hi0 - lo, 1e-12);
  for (auto &v : raw) v = (v - lo) / span0;
  Image img(size, size, std::move(raw));
  if (smooth && sigma > 0.0) img = gaussian_blur(img, sigma);
  const auto px = img.pixels();
  const auto [mn, mx] = std::minmax_element(px.begin(), px.end());
  std::vector<double> out(px.size());
  const double span = std::max(*mx - *mn, 1e-12);
  for (std::size_t i = 0; i < px.size(); ++i) out[i] = 0.05 + 0.9 * (px[i] - *mn) / span;
  return Image(size, size, std::move(out));
}

} // namespace

std::string GradcheckReport::to_line() const {
  std::ostringstream out;
  out << "seed=" << seed << " max_rel_err_t=" << max_rel_err_t << " max_rel_err_g=" << max_rel_err_g
      << " max_rel_err_beta=" << max_rel_err_beta << " params=" << params_checked << " worst_node=" << worst_node
      << " worst_param=" << (worst_param.empty() ? "none" : worst_param)
      << " expected_fail=" << (expected_fail ? "true" : "false") << " pass=" << (pass ? "true" : "false");
  return out.str();
}

GradcheckReport gradcheck(std::uint64_t seed, const GradcheckConfig &cfg) {
  if (cfg.size < 8 || cfg.n_nodes < 1 || cfg.K < 1) fail(ErrorKind::Argument, "invalid gradcheck configuration");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const Image fixed = random_image(cfg.size, cfg.blur_sigma, cfg.smooth, rng);
  const Image moving = random_image(cfg.size, cfg.blur_sigma, cfg.smooth, rng);

  const RadiusConfig rc{2.0, 0.375 * cfg.size};
  const double margin = 0.125 * cfg.size;
  std::vector<ControlNode> nodes;
  std::vector<Vec2> anchors, targets;
  for (int i = 0; i < cfg.n_nodes; ++i) {
    ControlNode n;
    n.g = {margin + u01(rng) * (cfg.size - 2 * margin), margin + u01(rng) * (cfg.size - 2 * margin)};
    n.t = {6.0 * u01(rng) - 3.0, 6.0 * u01(rng) - 3.0};
    n.beta = 2.0 * u01(rng) - 1.0;
    if (!cfg.smooth) {
      n.g = {std::round(n.g.x), std::round(n.g.y)};
      n.t = {std::round(n.t.x), std::round(n.t.y)};
    }
    nodes.push_back(n);
    if (cfg.with_anchors) {
      anchors.push_back(n.g);
      targets.push_back(n.t + Vec2{u01(rng) - 0.5, u01(rng) - 0.5});
    }
  }
  NodeSet ns(std::move(nodes), rc, std::move(anchors), std::move(targets));
  const LossWeights lw{0.4, 1.0, static_cast<double>(cfg.size)};
  const NeighborIndex index = build_knn(ns, cfg.size, cfg.size, cfg.K);
  const ForwardPass fwd = forward(fixed, moving, ns, index, lw);
  const NodeGrads g = backward(fixed, moving, ns, index, fwd, lw);

  GradcheckReport rep;
  rep.seed = seed;
  rep.expected_fail = !cfg.smooth;
  bool ok = true;
  double worst = -1.0;

  auto loss_at = [&](const NodeSet &perturbed) { return forward(fixed, moving, perturbed, index, lw).report.total; };
  auto check = [&](std::size_t node, const char *name, double analytic, double h, auto &&setter, double &slot) {
    NodeSet plus = ns, minus = ns;
    setter(plus.mutable_nodes()[node], h);
    setter(minus.mutable_nodes()[node], -h);
    const double fd = (loss_at(plus) - loss_at(minus)) / (2.0 * h);
    const double diff = std::abs(analytic - fd);
    const double mag = std::max(std::abs(analytic), std::abs(fd));
    double err;
    if (mag < cfg.small_magnitude) {
      err = diff <= cfg.abs_tol ? 0.0 : diff / std::max(mag, 1e-300);
      if (diff > cfg.abs_tol) ok = false;
    } else {
      err = diff / mag;
      if (err >= cfg.rel_tol) ok = false;
    }
    slot = std::max(slot, err);
    if (err > worst) {
      worst = err;
      rep.worst_node = node;
      rep.worst_param = name;
    }
    ++rep.params_checked;
  };

  for (std::size_t i = 0; i < ns.size(); ++i) {
    check(i, "t.x", g.dt[i].x, cfg.h_pos, [](ControlNode &n, double h) { n.t.x += h; }, rep.max_rel_err_t);
    check(i, "t.y", g.dt[i].y, cfg.h_pos, [](ControlNode &n, double h) { n.t.y += h; }, rep.max_rel_err_t);
    check(i, "g.x", g.dg[i].x, cfg.h_pos, [](ControlNode &n, double h) { n.g.x += h; }, rep.max_rel_err_g);
    check(i, "g.y", g.dg[i].y, cfg.h_pos, [](ControlNode &n, double h) { n.g.y += h; }, rep.max_rel_err_g);
    check(i, "beta", g.dbeta[i], cfg.h_beta, [](ControlNode &n, double h) { n.beta += h; }, rep.max_rel_err_beta);
  }
  rep.pass = ok;
  return rep;
}

} // namespace gpo
