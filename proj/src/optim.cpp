#include "gpo/optim.hpp"
#include "gpo/text_table.hpp"

#include <chrono>
#include <sstream>

namespace gpo {

void OptimConfig::validate() const {
  if (!(eta_g > 0.0) || !(eta_t > 0.0) || !(eta_r > 0.0)) fail(ErrorKind::Argument, "learning rates must be > 0");
  if (tau_max < 1) fail(ErrorKind::Argument, "tau_max must be >= 1");
  if (K < 1) fail(ErrorKind::Argument, "K must be >= 1");
  if (!(adam_beta1 > 0.0 && adam_beta1 < 1.0) || !(adam_beta2 > 0.0 && adam_beta2 < 1.0))
    fail(ErrorKind::Argument, "Adam betas must lie in (0, 1)");
  if (!(adam_eps > 0.0)) fail(ErrorKind::Argument, "Adam epsilon must be > 0");
  if (snapshot_every < 0) fail(ErrorKind::Argument, "snapshot_every must be >= 0");
  loss_weights.validate();
}

AdamRates effective_rates(const OptimConfig &cfg, int width, int height) {
  AdamRates r{cfg.eta_g, cfg.eta_t, cfg.eta_r};
  if (cfg.t_units == DisplacementRateUnits::Normalized) r.t *= 0.5 * std::max(width, height);
  return r;
}

void adam_step(NodeSet &nodes, const NodeGrads &grads, AdamState &state, const AdamRates &rates,
               const OptimConfig &cfg) {
  const std::size_t n = nodes.size();
  if (grads.size() != n || state.m.size() != 5 * n || state.v.size() != 5 * n)
    fail(ErrorKind::Consistency, "Adam state or gradients do not match the node count");
  ++state.step;
  const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  auto update = [&](std::size_t slot, double grad, double lr, double &param) {
    double &m = state.m[slot];
    double &v = state.v[slot];
    m = b1 * m + (1.0 - b1) * grad;
    v = b2 * v + (1.0 - b2) * grad * grad;
    if (m == 0.0) return;
    const double mhat = m / c1;
    const double vhat = v / c2;
    param -= lr * mhat / (std::sqrt(vhat) + cfg.adam_eps);
  };
  auto &ns = nodes.mutable_nodes();
  for (std::size_t i = 0; i < n; ++i) {
    update(5 * i, grads.dg[i].x, rates.g, ns[i].g.x);
    update(5 * i + 1, grads.dg[i].y, rates.g, ns[i].g.y);
    update(5 * i + 2, grads.dt[i].x, rates.t, ns[i].t.x);
    update(5 * i + 3, grads.dt[i].y, rates.t, ns[i].t.y);
    update(5 * i + 4, grads.dbeta[i], rates.beta, ns[i].beta);
  }
}

NumericalFailure::NumericalFailure(int iteration, std::vector<std::size_t> nodes, const std::string &what)
    : Error(ErrorKind::Numerical, what), iteration_(iteration), nodes_(std::move(nodes)) {}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

[[noreturn]] void numerical_failure(int iteration, std::vector<std::size_t> ids, const std::string &what) {
  std::ostringstream msg;
  msg << what << " at iteration " << iteration;
  if (!ids.empty()) {
    msg << " (nodes";
    for (std::size_t i = 0; i < std::min<std::size_t>(ids.size(), 16); ++i) msg << ' ' << ids[i];
    if (ids.size() > 16) msg << " ...";
    msg << ')';
  }
  throw NumericalFailure(iteration, std::move(ids), msg.str());
}

// Ids of the nodes blended into any pixel whose displacement is not finite.
std::vector<std::size_t> nodes_at_bad_pixels(const NodeSet &nodes, const NeighborIndex &index) {
  const DisplacementField f = blend(nodes, index);
  std::vector<char> hit(nodes.size(), 0);
  for (std::size_t p = 0; p < f.u.size(); ++p)
    if (!is_finite(f.u[p]))
      for (auto id : index.ids_at(p)) hit[static_cast<std::size_t>(id)] = 1;
  std::vector<std::size_t> ids;
  for (std::size_t i = 0; i < hit.size(); ++i)
    if (hit[i]) ids.push_back(i);
  return ids;
}

} // namespace

RegistrationResult register_images(const Image &fixed, const Image &moving_coarse, NodeSet nodes,
                                   const OptimConfig &cfg, const IterationObserver &observer) {
  cfg.validate();
  if (fixed.width() != moving_coarse.width() || fixed.height() != moving_coarse.height())
    fail(ErrorKind::Argument, "fixed and moving images differ in size");
  nodes.validate();

  const int w = fixed.width(), h = fixed.height();
  const AdamRates rates = effective_rates(cfg, w, h);
  AdamState state(nodes.size());
  RegistrationResult res;
  res.loss_trace.reserve(static_cast<std::size_t>(cfg.tau_max));
  double t_knn = 0.0, t_fwd = 0.0, t_bwd = 0.0, t_step = 0.0;

  for (int it = 1; it <= cfg.tau_max; ++it) {
    auto t0 = Clock::now();
    const NeighborIndex index = build_knn(nodes, w, h, cfg.K);
    t_knn += seconds_since(t0);

    t0 = Clock::now();
    ForwardPass fwd;
    try {
      fwd = forward(fixed, moving_coarse, nodes, index, cfg.loss_weights);
    } catch (const Error &e) {
      if (e.kind() != ErrorKind::Numerical) throw;
      numerical_failure(it, nodes_at_bad_pixels(nodes, index), "non-finite displacement field");
    }
    t_fwd += seconds_since(t0);
    if (!std::isfinite(fwd.report.total)) numerical_failure(it, {}, "non-finite loss");

    t0 = Clock::now();
    const NodeGrads grads = backward(fixed, moving_coarse, nodes, index, fwd, cfg.loss_weights);
    t_bwd += seconds_since(t0);
    std::vector<std::size_t> bad;
    for (std::size_t i = 0; i < grads.size(); ++i)
      if (!is_finite(grads.dg[i]) || !is_finite(grads.dt[i]) || !std::isfinite(grads.dbeta[i])) bad.push_back(i);
    if (!bad.empty()) numerical_failure(it, std::move(bad), "non-finite gradient");

    t0 = Clock::now();
    adam_step(nodes, grads, state, rates, cfg);
    t_step += seconds_since(t0);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const auto &n = nodes[i];
      if (!is_finite(n.g) || !is_finite(n.t) || !std::isfinite(n.beta)) bad.push_back(i);
    }
    if (!bad.empty()) numerical_failure(it, std::move(bad), "non-finite node parameter");

    res.loss_trace.push_back(fwd.report);
    if (cfg.snapshot_every > 0 && it % cfg.snapshot_every == 0) res.node_snapshots.push_back({it, nodes});
    if (observer) observer(it, nodes, fwd.report);
  }

  auto t0 = Clock::now();
  const NeighborIndex index = build_knn(nodes, w, h, cfg.K);
  res.final_field = blend(nodes, index);
  res.warped = warp(moving_coarse, res.final_field);
  const double t_final = seconds_since(t0);

  res.final_nodes = std::move(nodes);
  res.timing = {{"knn", t_knn}, {"forward", t_fwd}, {"backward", t_bwd}, {"adam", t_step}, {"final_warp", t_final}};
  return res;
}

void write_loss_trace(const std::vector<LossReport> &trace, const std::filesystem::path &path) {
  std::ostringstream out;
  out << "iter,total,l_gcc,l_ncc,ncc\n";
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const auto &r = trace[i];
    out << (i + 1) << ',' << format_double(r.total) << ',' << format_double(r.l_gcc) << ','
        << format_double(r.l_ncc) << ',' << format_double(r.ncc_value) << '\n';
  }
  write_text_file(path, out.str());
}

} // namespace gpo
