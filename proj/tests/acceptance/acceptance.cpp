// Acceptance suite. One line per criterion: PASS, FAIL or SKIP plus the
// measured numbers. Exit status is nonzero when any criterion fails.

#include "gpo/eval.hpp"
#include "gpo/field.hpp"
#include "gpo/loss.hpp"
#include "gpo/optim.hpp"
#include "gpo/pipeline.hpp"
#include "gpo/sweep.hpp"
#include "gpo/synth.hpp"
#include "gpo/text_table.hpp"
#include "oracles.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>

using namespace gpo;

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void report(int id, const char *name, const char *status, const std::string &detail) {
  std::printf("[%s] %2d %s: %s\n", status, id, name, detail.c_str());
  std::fflush(stdout);
}

void verdict(int id, const char *name, bool ok, const std::string &detail) {
  if (!ok) ++failures;
  report(id, name, ok ? "PASS" : "FAIL", detail);
}

template <class F> void guarded(int id, const char *name, F &&body) {
  try {
    body();
  } catch (const std::exception &e) {
    verdict(id, name, false, std::string("exception: ") + e.what());
  }
}

std::string fmt(const char *f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// --- shared synthetic suite ---------------------------------------------------

constexpr int kSuitePairs = 20;

std::filesystem::path suite_dir() {
  static const std::filesystem::path dir = [] {
    const auto d = oracle::temp_dir("acceptance_suite");
    for (int i = 0; i < kSuitePairs; ++i) {
      SynthConfig c;
      c.seed = static_cast<std::uint64_t>(i);
      char name[16];
      std::snprintf(name, sizeof name, "pair_%03d", i);
      write_synth_bundle(make_pair(c), c, d / name);
    }
    return d;
  }();
  return dir;
}

// ---------------------------------------------------------------------------

void gradients() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  int passed = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto r = gradcheck(seed);
    worst = std::max({worst, r.max_rel_err_t, r.max_rel_err_g, r.max_rel_err_beta});
    passed += r.pass;
  }
  const double secs = since(t0);
  std::ostringstream d;
  d << passed << "/10 seeds pass, worst rel err " << worst << ", " << fmt("%.1f s", secs);
  verdict(1, "gradient correctness", passed == 10 && secs < 120.0, d.str());
}

void partition_of_unity() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> n_of(1, 150), k_of(1, 16);
  std::uniform_real_distribution<double> beta_of(-8.0, 8.0);
  double worst = 0.0;
  for (int cfg = 0; cfg < 100; ++cfg) {
    auto nodes = oracle::random_nodes(static_cast<std::size_t>(n_of(rng)), 128, 128, rng(), 5.0);
    for (auto &n : nodes) n.beta = beta_of(rng);
    const NodeSet s(nodes, {0.5, 128.0});
    const int K = k_of(rng);
    const auto idx = build_knn(s, 128, 128, K);
    std::vector<double> w(static_cast<std::size_t>(idx.k));
    for (int y = 0; y < 128; ++y)
      for (int x = 0; x < 128; ++x) {
        blend_weights(s, idx, x, y, w);
        double sum = 0.0;
        for (double v : w) sum += v;
        worst = std::max(worst, std::abs(sum - 1.0));
      }
  }
  const double secs = since(t0);
  std::ostringstream d;
  d << "100 configurations, max |sum w - 1| = " << worst << ", " << fmt("%.1f s", secs);
  verdict(2, "partition of unity", worst <= 1e-6 && secs < 30.0, d.str());
}

void knn_exactness() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> n_of(1, 120), k_of(1, 12);
  int mismatches = 0;
  for (int cfg = 0; cfg < 50; ++cfg) {
    std::vector<ControlNode> nodes;
    if (cfg % 2 == 0) {
      nodes = oracle::random_nodes(static_cast<std::size_t>(n_of(rng)), 96, 96, rng());
    } else {
      // Integer lattice plus duplicated centres: many equidistant ties.
      const int step = 4 + cfg % 9;
      for (int y = step / 2; y < 96; y += step)
        for (int x = step / 2; x < 96; x += step) nodes.push_back({{double(x), double(y)}, {0, 0}, 0.0});
      for (int d = 0; d < 5; ++d) nodes.push_back(nodes[static_cast<std::size_t>(d * 3) % nodes.size()]);
    }
    const NodeSet s(nodes, {1.0, 50.0});
    const int K = k_of(rng);
    const auto idx = build_knn(s, 96, 96, K);
    for (int y = 0; y < 96; ++y)
      for (int x = 0; x < 96; ++x) {
        const auto want = oracle::brute_knn(s, x, y, K);
        const auto got = idx.ids_at(static_cast<std::size_t>(y) * 96 + x);
        bool same = got.size() == want.size();
        for (std::size_t j = 0; same && j < want.size(); ++j) same = got[j] == want[j].second;
        mismatches += !same;
      }
  }
  const double secs = since(t0);
  std::ostringstream d;
  d << "50 configurations (25 with constructed ties), " << mismatches << " mismatching pixels, "
    << fmt("%.1f s", secs);
  verdict(3, "KNN exactness", mismatches == 0 && secs < 30.0, d.str());
}

void radius_bounds() {
  SynthConfig sc;
  sc.seed = 100;
  const auto pair = make_pair(sc);
  const RadiusConfig rc{8.0, 256.0};
  OptimConfig cfg;
  cfg.tau_max = 200;
  cfg.loss_weights.alpha_gcc = 0.0;
  double lo = 1e300, hi = -1e300;
  int steps = 0;
  bool inside = true;
  register_images(gaussian_blur(pair.fixed, 1.0), gaussian_blur(apply_global(pair.moving, pair.gt_transform, 256, 256), 1.0),
                  init_gcn(256, 256, 20, rc), cfg, [&](int, const NodeSet &n, const LossReport &) {
                    ++steps;
                    for (std::size_t i = 0; i < n.size(); ++i) {
                      const double r = n.radius(i);
                      lo = std::min(lo, r);
                      hi = std::max(hi, r);
                      inside = inside && r > rc.r_min + kRadiusOffset && r < rc.r_max + kRadiusOffset;
                    }
                  });
  std::ostringstream d;
  d << steps << " steps checked, radius range [" << lo << ", " << hi << "] inside (8.1, 256.1)";
  verdict(4, "radius bounds", inside && steps == 200, d.str());
}

struct SuiteSweep {
  std::vector<SweepRow> rows; // K=5,10 x tau=50,200, first axis slowest
  const SweepRow &at(int K, int tau) const {
    const std::size_t i = (K == 5 ? 0 : 2) + (tau == 50 ? 0 : 1);
    return rows[i];
  }
};

SuiteSweep gcn_sweep() {
  RunConfig base;
  base.set("mode", "gcn");
  const std::vector<GridAxis> axes{parse_grid_axis("K=5,10"), parse_grid_axis("tau=50,200")};
  SuiteSweep s;
  s.rows = run_sweep(base, axes, suite_dir(), oracle::temp_dir("acceptance_gcn_sweep"));
  return s;
}

void synthetic_recovery(const SuiteSweep &sw) {
  const SweepRow &row = sw.at(10, 200);
  int reduced = 0, under = 0;
  double worst_reduction = 1.0;
  for (std::size_t i = 0; i < row.pair_median_tre.size(); ++i) {
    const double red = 1.0 - row.pair_median_tre[i] / row.pair_coarse_median_tre[i];
    worst_reduction = std::min(worst_reduction, red);
    reduced += red >= 0.70;
    under += row.pair_median_tre[i] < 1.5;
  }
  const double before = median_of(row.pair_coarse_median_tre);
  const double suite_red = 1.0 - row.median_tre / before;
  const double per_pair_s = row.wall_seconds / kSuitePairs;
  const int n = static_cast<int>(row.pair_median_tre.size());
  std::ostringstream d;
  d << "median TRE " << before << " -> " << row.median_tre << " px (" << fmt("%.1f%%", 100 * suite_red)
    << " reduction), " << reduced << "/" << n << " pairs reduced >= 70% (worst " << fmt("%.1f%%", 100 * worst_reduction)
    << "), " << under << "/" << n << " pairs < 1.5 px, " << fmt("%.1f s/pair", per_pair_s);
  verdict(5, "synthetic recovery", n == kSuitePairs && reduced == n && under >= 0.8 * n && per_pair_s < 120.0,
          d.str());
}

void dcn_beats_coarse() {
  RunConfig base;
  base.set("mode", "dcn");
  const auto rows =
      run_sweep(base, {parse_grid_axis("tau=100")}, suite_dir(), oracle::temp_dir("acceptance_dcn_sweep"));
  const SweepRow &row = rows.front();
  int wins = 0;
  std::ostringstream losers;
  for (std::size_t i = 0; i < row.pair_median_tre.size(); ++i) {
    if (row.pair_median_tre[i] < row.pair_coarse_median_tre[i])
      ++wins;
    else
      losers << " pair_" << i << "(" << row.pair_coarse_median_tre[i] << "->" << row.pair_median_tre[i] << ")";
  }
  const int n = static_cast<int>(row.pair_median_tre.size());
  std::ostringstream d;
  d << wins << "/" << n << " pairs improve on homography-only (median " << median_of(row.pair_coarse_median_tre)
    << " -> " << row.median_tre << " px)";
  if (wins < n) d << "; not improved:" << losers.str();
  verdict(6, "DCN beats coarse-only", n == kSuitePairs && wins >= 0.95 * n, d.str());
}

void identity_stability() {
  SynthConfig sc;
  sc.seed = 200;
  const Image img = gaussian_blur(gen_vessel_image(sc), 1.0);
  OptimConfig cfg;
  cfg.tau_max = 50;
  cfg.loss_weights.alpha_gcc = 0.0;
  const auto r = register_images(img, img, init_gcn(img.width(), img.height(), 20, {8.0, 256.0}), cfg);
  const double m = field_stats(r.final_field).max_mag;
  verdict(7, "identity stability", m < 0.5, "max |u| = " + std::to_string(m) + " px after 50 iterations");
}

void metric_oracles() {
  LandmarkPairs lm;
  lm.pairs = {{{10, 10}, {13, 14}}};
  const double d345 = tre(lm, GlobalTransform::identity(), DisplacementField(32, 32)).distances.front();
  const double a25 = auc({TREStats::from_distances({10.0})}, {25}).auc_at.at(25);
  std::vector<int> ts;
  for (int t = 1; t <= 60; ++t) ts.push_back(t);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 70.0);
  std::vector<TREStats> pairs;
  for (int i = 0; i < 25; ++i) pairs.push_back(TREStats::from_distances({u(rng), u(rng)}));
  const auto curve = auc(pairs, ts);
  bool monotone = true;
  for (int t = 2; t <= 60; ++t) monotone = monotone && curve.auc_at.at(t) >= curve.auc_at.at(t - 1);
  std::ostringstream d;
  d << "3-4-5 TRE = " << d345 << ", AUC@25(mean 10) = " << a25 << ", monotone = " << (monotone ? "yes" : "no");
  verdict(8, "metric oracles", d345 == 5.0 && std::abs(a25 - 0.64) < 1e-12 && monotone, d.str());
}

void ablation_direction(const SuiteSweep &sw) {
  const double k5 = sw.at(5, 200).median_tre, k10 = sw.at(10, 200).median_tre;
  const double t50 = sw.at(10, 50).median_tre, t200 = sw.at(10, 200).median_tre;
  const double k5_50 = sw.at(5, 50).median_tre, k10_50 = sw.at(10, 50).median_tre;
  const double k5_t200 = sw.at(5, 200).median_tre;
  std::ostringstream d;
  d << "median TRE K=5/K=10 at tau=200: " << k5 << "/" << k10 << ", at tau=50: " << k5_50 << "/" << k10_50
    << "; tau=50/tau=200 at K=10: " << t50 << "/" << t200 << ", at K=5: " << k5_50 << "/" << k5_t200 << " ("
    << kSuitePairs << " pairs)";
  verdict(9, "ablation direction", k10 <= k5 && t200 <= t50, d.str());
}

// Optional paper-scale run. GPO_FIRE_DIR holds one sub-directory per image
// pair (name starting with its category letter, e.g. S01, P07) containing
// fixed/moving images, landmarks.csv and matches.csv.
void paper_scale() {
  const char *root = std::getenv("GPO_FIRE_DIR");
  if (!root || !*root) {
    report(10, "paper-scale pathway", "SKIP", "GPO_FIRE_DIR not set");
    return;
  }
  std::vector<std::filesystem::path> pairs;
  for (const auto &e : std::filesystem::directory_iterator(root)) {
    const char c = e.path().filename().string().front();
    if (e.is_directory() && (c == 'S' || c == 'P')) pairs.push_back(e.path());
  }
  std::sort(pairs.begin(), pairs.end());
  if (pairs.empty()) {
    verdict(10, "paper-scale pathway", false, std::string("no S/P pair directories under ") + root);
    return;
  }
  auto image = [](const std::filesystem::path &dir, const std::string &stem) {
    for (const char *ext : {".png", ".jpg", ".pgm", ".ppm", ".gpoi"})
      if (std::filesystem::exists(dir / (stem + ext))) return dir / (stem + ext);
    return dir / (stem + ".png");
  };
  RunConfig cfg;
  double coarse_sum = 0.0, final_sum = 0.0, slowest = 0.0;
  for (const auto &dir : pairs) {
    const auto t0 = Clock::now();
    const auto r = run_pipeline({image(dir, "fixed"), image(dir, "moving"), dir / "matches.csv", dir / "landmarks.csv"}, cfg);
    slowest = std::max(slowest, since(t0));
    coarse_sum += r.tre_coarse->mean;
    final_sum += r.tre_final->mean;
  }
  const double n = static_cast<double>(pairs.size());
  const double improvement = 1.0 - final_sum / coarse_sum;
  std::ostringstream d;
  d << pairs.size() << " S+P pairs, mean TRE " << coarse_sum / n << " -> " << final_sum / n << " px ("
    << fmt("%.1f%%", 100 * improvement) << "), slowest " << fmt("%.1f s", slowest)
    << "; reference target 2.352 px";
  verdict(10, "paper-scale pathway", improvement >= 0.5 && slowest <= 60.0, d.str());
}

} // namespace

int main() {
  const auto t0 = Clock::now();
  guarded(1, "gradient correctness", gradients);
  guarded(2, "partition of unity", partition_of_unity);
  guarded(3, "KNN exactness", knn_exactness);
  guarded(4, "radius bounds", radius_bounds);

  SuiteSweep sw;
  bool have_sweep = false;
  guarded(5, "synthetic recovery", [&] {
    sw = gcn_sweep();
    have_sweep = true;
    synthetic_recovery(sw);
  });
  guarded(6, "DCN beats coarse-only", dcn_beats_coarse);
  guarded(7, "identity stability", identity_stability);
  guarded(8, "metric oracles", metric_oracles);
  if (have_sweep)
    guarded(9, "ablation direction", [&] { ablation_direction(sw); });
  else
    verdict(9, "ablation direction", false, "sweep did not complete");
  guarded(10, "paper-scale pathway", paper_scale);

  std::printf("acceptance: %d failing criteria, %.1f s total\n", failures, since(t0));
  return failures == 0 ? 0 : 1;
}
