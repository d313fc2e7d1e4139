#include "gpo/synth.hpp"
#include "gpo/parallel.hpp"
#include "gpo/primitives.hpp"
#include "gpo/text_table.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

namespace gpo {

void SynthConfig::validate() const {
  if (size < 64) fail(ErrorKind::Argument, "synth size must be >= 64");
  if (n_vessels < 0) fail(ErrorKind::Argument, "n_vessels must be >= 0");
  if (!(vessel_width_min > 0.0) || vessel_width_max < vessel_width_min)
    fail(ErrorKind::Argument, "vessel width range must satisfy 0 < min <= max");
  if (!(vessel_contrast >= 0.0 && vessel_contrast <= 0.3)) fail(ErrorKind::Argument, "vessel_contrast must lie in [0, 0.3]");
  if (deform_nodes < 1) fail(ErrorKind::Argument, "deform_nodes must be >= 1");
  if (!(deform_max_px >= 0.0)) fail(ErrorKind::Argument, "deform_max_px must be >= 0");
  if (!(homography_jitter >= 0.0 && homography_jitter <= 0.03))
    fail(ErrorKind::Argument, "homography_jitter must lie in [0, 0.03]");
  if (!(intensity_jitter >= 0.0 && intensity_jitter <= 0.2))
    fail(ErrorKind::Argument, "intensity_jitter must lie in [0, 0.2]");
  if (landmark_count < 1) fail(ErrorKind::Argument, "landmark_count must be >= 1");
  if (match_count < 4) fail(ErrorKind::Argument, "match_count must be >= 4");
  if (!(match_noise_px >= 0.0)) fail(ErrorKind::Argument, "match_noise_px must be >= 0");
  if (!(noise_amplitude >= 0.0 && noise_amplitude <= 0.1)) fail(ErrorKind::Argument, "noise_amplitude must lie in [0, 0.1]");
}

namespace {

// Independent streams per generation stage so that changing one knob does
// not reshuffle the others.
enum Stream : std::uint64_t { kBackground = 1, kVessels, kNoise, kDeform, kHomography, kLandmarks, kMatches, kJitter };

class Rng {
public:
  Rng(std::uint64_t seed, Stream stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream)};
    gen_.seed(seq);
  }
  // Bit-exact across standard libraries, unlike <random> distributions.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::size_t index(std::size_t n) { return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n; }
  Vec2 in_disk(double radius) {
    for (;;) {
      const Vec2 p{uniform(-1.0, 1.0), uniform(-1.0, 1.0)};
      if (norm2(p) <= 1.0) return p * radius;
    }
  }

private:
  std::mt19937_64 gen_;
};

std::vector<Vec2> random_walk(Rng &rng, Vec2 start, double heading, double length, int size) {
  std::vector<Vec2> pts{start};
  double omega = 0.0;
  Vec2 p = start;
  for (int s = 1; s < static_cast<int>(length); ++s) {
    omega = std::clamp(omega + rng.uniform(-0.01, 0.01), -0.03, 0.03);
    heading += omega;
    p = p + Vec2{std::cos(heading), std::sin(heading)};
    if (p.x < -2.0 || p.y < -2.0 || p.x > size + 1.0 || p.y > size + 1.0) break;
    pts.push_back(p);
  }
  return pts;
}

// Max-composited Gaussian cross-section around every centerline sample.
void stamp(std::vector<double> &depth, int size, const std::vector<Vec2> &line, double width) {
  const double sigma = width / (2.0 * std::sqrt(2.0 * std::numbers::ln2));
  const double inv = 1.0 / (2.0 * sigma * sigma);
  const int reach = static_cast<int>(std::ceil(3.0 * sigma));
  for (const Vec2 &c : line) {
    const int cx = static_cast<int>(std::lround(c.x)), cy = static_cast<int>(std::lround(c.y));
    for (int y = std::max(0, cy - reach); y <= std::min(size - 1, cy + reach); ++y)
      for (int x = std::max(0, cx - reach); x <= std::min(size - 1, cx + reach); ++x) {
        const double d2 = norm2(Vec2{x - c.x, y - c.y});
        double &v = depth[static_cast<std::size_t>(y) * size + x];
        v = std::max(v, std::exp(-d2 * inv));
      }
  }
}

} // namespace

VesselRender render_vessels(const SynthConfig &cfg) {
  cfg.validate();
  const int n = cfg.size;
  const std::size_t npx = static_cast<std::size_t>(n) * n;

  Rng bg_rng(cfg.seed, kBackground);
  struct Blob {
    Vec2 c;
    double s, a;
  };
  std::vector<Blob> blobs;
  for (int k = 0; k < 3; ++k)
    blobs.push_back({{bg_rng.uniform(0.0, n), bg_rng.uniform(0.0, n)}, bg_rng.uniform(0.25, 0.5) * n,
                     bg_rng.uniform(-0.12, 0.12)});
  std::vector<double> bg(npx);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      double v = 0.5;
      for (const auto &b : blobs) v += b.a * std::exp(-norm2(Vec2{x - b.c.x, y - b.c.y}) / (2.0 * b.s * b.s));
      bg[static_cast<std::size_t>(y) * n + x] = std::clamp(v, 0.3, 0.7);
    }

  VesselRender out;
  Rng vr(cfg.seed, kVessels);
  for (int v = 0; v < cfg.n_vessels; ++v) {
    const Vec2 start{vr.uniform(0.1, 0.9) * n, vr.uniform(0.1, 0.9) * n};
    const double heading = vr.uniform(0.0, 2.0 * std::numbers::pi);
    const double length = vr.uniform(0.5, 1.0) * n;
    const double width = vr.uniform(cfg.vessel_width_min, cfg.vessel_width_max);
    auto trunk = random_walk(vr, start, heading, length, n);
    const int branches = static_cast<int>(vr.index(3));
    std::vector<std::vector<Vec2>> kids;
    std::vector<double> kid_widths;
    for (int b = 0; b < branches && trunk.size() > 8; ++b) {
      const std::size_t at = trunk.size() / 4 + vr.index(trunk.size() / 2);
      const Vec2 dir = trunk[std::min(at + 1, trunk.size() - 1)] - trunk[at - 1];
      const double side = vr.uniform() < 0.5 ? -1.0 : 1.0;
      const double h = std::atan2(dir.y, dir.x) + side * vr.uniform(0.5, 1.0);
      kids.push_back(random_walk(vr, trunk[at], h, static_cast<double>(trunk.size()) * vr.uniform(0.3, 0.6), n));
      kid_widths.push_back(std::max(cfg.vessel_width_min, 0.7 * width));
    }
    out.centerlines.push_back(std::move(trunk));
    out.widths.push_back(width);
    for (std::size_t k = 0; k < kids.size(); ++k) {
      out.centerlines.push_back(std::move(kids[k]));
      out.widths.push_back(kid_widths[k]);
    }
  }

  std::vector<double> depth(npx, 0.0);
  for (std::size_t i = 0; i < out.centerlines.size(); ++i) stamp(depth, n, out.centerlines[i], out.widths[i]);

  Rng nr(cfg.seed, kNoise);
  std::vector<double> px(npx);
  for (std::size_t i = 0; i < npx; ++i) {
    const double noise = cfg.noise_amplitude * nr.uniform(-1.0, 1.0);
    px[i] = std::clamp(bg[i] - cfg.vessel_contrast * depth[i] + noise, 0.0, 1.0);
  }
  out.image = Image(n, n, std::move(px));
  out.background = Image(n, n, std::move(bg));
  return out;
}

Image gen_vessel_image(const SynthConfig &cfg) { return render_vessels(cfg).image; }

DisplacementField gen_deformation(const SynthConfig &cfg, int size) {
  cfg.validate();
  if (size < 1) fail(ErrorKind::Argument, "deformation size must be >= 1");
  if (cfg.deform_max_px == 0.0) return DisplacementField(size, size);
  Rng rng(cfg.seed, kDeform);
  const RadiusConfig rc{1.0, static_cast<double>(size)};
  std::vector<ControlNode> nodes;
  for (int i = 0; i < cfg.deform_nodes; ++i) {
    ControlNode c;
    c.g = {rng.uniform(0.0, size), rng.uniform(0.0, size)};
    c.t = rng.in_disk(cfg.deform_max_px);
    c.beta = beta_for_radius(rng.uniform(size / 8.0, size / 3.0), rc);
    nodes.push_back(c);
  }
  const NodeSet set(std::move(nodes), rc);
  return blend(set, build_knn(set, size, size, cfg.deform_nodes));
}

namespace {

GlobalTransform random_homography(const SynthConfig &cfg) {
  if (cfg.homography_jitter == 0.0) return GlobalTransform::identity();
  Rng rng(cfg.seed, kHomography);
  const double s = cfg.size - 1.0;
  const double amp = cfg.homography_jitter * cfg.size;
  std::vector<Match> corners;
  for (Vec2 c : {Vec2{0, 0}, Vec2{s, 0}, Vec2{s, s}, Vec2{0, s}})
    corners.push_back({c, c + Vec2{rng.uniform(-amp, amp), rng.uniform(-amp, amp)}});
  return GlobalTransform(homography_dlt(corners), TransformKind::Homography);
}

// Points along the centerlines, away from the border, in random order.
std::vector<Vec2> centerline_candidates(const VesselRender &r, int size, double margin) {
  std::vector<Vec2> out;
  for (const auto &line : r.centerlines)
    for (const Vec2 &p : line)
      if (p.x >= margin && p.y >= margin && p.x <= size - 1 - margin && p.y <= size - 1 - margin) out.push_back(p);
  return out;
}

std::vector<Vec2> pick(std::vector<Vec2> pool, std::size_t count, Rng &rng) {
  if (pool.empty()) fail(ErrorKind::Generation, "no vessel centerline inside the image; increase n_vessels");
  std::vector<Vec2> out;
  for (std::size_t i = 0; i < count; ++i) {
    if (pool.empty()) break;
    const std::size_t j = rng.index(pool.size());
    out.push_back(pool[j]);
    pool[j] = pool.back();
    pool.pop_back();
  }
  return out;
}

} // namespace

SynthPair make_pair(const SynthConfig &cfg) {
  cfg.validate();
  const int n = cfg.size;
  const VesselRender render = render_vessels(cfg);
  SynthPair pair;
  pair.fixed = render.image;
  pair.gt_field = gen_deformation(cfg, n);
  pair.gt_transform = random_homography(cfg);
  const GlobalTransform inv = pair.gt_transform.inverse();
  const DisplacementField &u = pair.gt_field;

  // moving(y) = fixed(x) where T(x + u(x)) = y.
  std::vector<double> mv(static_cast<std::size_t>(n) * n);
  std::vector<double> worst(worker_count(), 0.0);
  parallel_rows(static_cast<std::size_t>(n), [&](std::size_t w, std::size_t y0, std::size_t y1) {
    for (std::size_t y = y0; y < y1; ++y)
      for (int x = 0; x < n; ++x) {
        const Vec2 z = inv.apply({static_cast<double>(x), static_cast<double>(y)});
        Vec2 p = z;
        double res = 0.0;
        for (int it = 0; it < kInversionIterations; ++it) {
          p = z - u.interpolate(p);
          res = norm(p + u.interpolate(p) - z);
          if (res < 1e-3 * kInversionTolerance) break;
        }
        worst[w] = std::max(worst[w], res);
        mv[y * n + x] = sample_value(pair.fixed, p);
      }
  });
  const double residual = *std::max_element(worst.begin(), worst.end());
  if (!(residual < kInversionTolerance)) {
    std::ostringstream msg;
    msg << "deformation inversion did not converge (residual " << residual << " px); use a smaller deform_max_px";
    fail(ErrorKind::Generation, msg.str());
  }

  Rng jr(cfg.seed, kJitter);
  const double gain = 1.0 + jr.uniform(-cfg.intensity_jitter, cfg.intensity_jitter);
  const double bias = jr.uniform(-cfg.intensity_jitter, cfg.intensity_jitter) * 0.5;
  for (double &v : mv) v = std::clamp(gain * v + bias, 0.0, 1.0);
  pair.moving = Image(n, n, std::move(mv));

  auto forward = [&](Vec2 p) { return pair.gt_transform.apply(p + u.interpolate(p)); };
  const double margin = std::max(8.0, n / 16.0);
  const auto pool = centerline_candidates(render, n, margin);

  Rng lr(cfg.seed, kLandmarks);
  for (const Vec2 &p : pick(pool, static_cast<std::size_t>(cfg.landmark_count), lr))
    pair.landmarks.pairs.push_back({p, forward(p)});

  Rng mr(cfg.seed, kMatches);
  for (const Vec2 &p : pick(pool, static_cast<std::size_t>(cfg.match_count), mr)) {
    pair.matches.pairs.push_back({p, forward(p) + mr.in_disk(cfg.match_noise_px)});
    pair.matches.confidence.push_back(mr.uniform(0.5, 1.0));
  }
  return pair;
}

std::string format_synth_config(const SynthConfig &cfg) {
  std::ostringstream o;
  o << "seed=" << cfg.seed << '\n'
    << "size=" << cfg.size << '\n'
    << "n_vessels=" << cfg.n_vessels << '\n'
    << "vessel_width_min=" << format_double(cfg.vessel_width_min) << '\n'
    << "vessel_width_max=" << format_double(cfg.vessel_width_max) << '\n'
    << "vessel_contrast=" << format_double(cfg.vessel_contrast) << '\n'
    << "deform_nodes=" << cfg.deform_nodes << '\n'
    << "deform_max_px=" << format_double(cfg.deform_max_px) << '\n'
    << "homography_jitter=" << format_double(cfg.homography_jitter) << '\n'
    << "intensity_jitter=" << format_double(cfg.intensity_jitter) << '\n'
    << "landmark_count=" << cfg.landmark_count << '\n'
    << "match_noise_px=" << format_double(cfg.match_noise_px) << '\n'
    << "match_count=" << cfg.match_count << '\n'
    << "noise_amplitude=" << format_double(cfg.noise_amplitude) << '\n';
  return o.str();
}

void write_synth_bundle(const SynthPair &pair, const SynthConfig &cfg, const std::filesystem::path &dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorKind::Io, "cannot create " + dir.string() + ": " + ec.message());
  save_png(pair.fixed, dir / "fixed.png");
  save_png(pair.moving, dir / "moving.png");
  save_image_dump(pair.fixed, dir / "fixed.gpoi");
  save_image_dump(pair.moving, dir / "moving.gpoi");
  write_landmarks(pair.landmarks, dir / "landmarks.csv");
  write_matches(pair.matches, dir / "matches.csv");
  write_field(pair.gt_field, dir / "gt_field.gpof");
  write_transform(pair.gt_transform, dir / "gt_transform.txt");
  write_text_file(dir / "manifest.txt", format_synth_config(cfg));
}

} // namespace gpo
