#include "gpo/coarse.hpp"
#include "gpo/parallel.hpp"
#include "gpo/text_table.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <random>
#include <sstream>

namespace gpo {

void MatchSet::validate() const {
  if (!confidence.empty() && confidence.size() != pairs.size())
    fail(ErrorKind::Argument, "confidence count does not match pair count");
  for (const auto &m : pairs)
    if (!is_finite(m.fixed) || !is_finite(m.moving)) fail(ErrorKind::Argument, "non-finite match coordinate");
  for (double c : confidence)
    if (!(c >= 0.0 && c <= 1.0)) fail(ErrorKind::Argument, "match confidence outside [0,1]");
}

MatchSet read_matches(const std::filesystem::path &path) {
  const TextTable t = read_table(path);
  MatchSet m;
  bool with_conf = false;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto &row = t.rows[r];
    if (row.size() != 4 && row.size() != 5)
      fail(ErrorKind::Format, path.string() + ": row " + std::to_string(r + 1) + " needs 4 or 5 columns");
    if (r == 0) with_conf = row.size() == 5;
    if ((row.size() == 5) != with_conf) fail(ErrorKind::Format, path.string() + ": inconsistent column count");
    m.pairs.push_back({{row[0], row[1]}, {row[2], row[3]}});
    if (with_conf) m.confidence.push_back(row[4]);
  }
  try {
    m.validate();
  } catch (const Error &e) {
    fail(ErrorKind::Format, path.string() + ": " + e.what());
  }
  return m;
}

void write_matches(const MatchSet &m, const std::filesystem::path &path) {
  std::ostringstream out;
  out << (m.has_confidence() ? "x_f,y_f,x_m,y_m,confidence\n" : "x_f,y_f,x_m,y_m\n");
  for (std::size_t i = 0; i < m.size(); ++i) {
    const auto &p = m.pairs[i];
    out << format_double(p.fixed.x) << ',' << format_double(p.fixed.y) << ',' << format_double(p.moving.x) << ','
        << format_double(p.moving.y);
    if (m.has_confidence()) out << ',' << format_double(m.confidence[i]);
    out << '\n';
  }
  write_text_file(path, out.str());
}

const char *to_string(TransformKind kind) {
  switch (kind) {
  case TransformKind::Identity: return "identity";
  case TransformKind::Affine: return "affine";
  case TransformKind::Homography: return "homography";
  }
  return "homography";
}

GlobalTransform::GlobalTransform(const Eigen::Matrix3d &m, TransformKind kind) : m_(m), kind_(kind) {
  if (!m_.allFinite()) fail(ErrorKind::Argument, "non-finite transform matrix");
  if (kind_ == TransformKind::Homography) {
    if (std::abs(m_(2, 2)) < 1e-15) fail(ErrorKind::Argument, "homography with H[2][2] == 0 cannot be normalized");
    m_ /= m_(2, 2);
  } else {
    m_.row(2) << 0.0, 0.0, 1.0;
  }
}

GlobalTransform GlobalTransform::translation(double tx, double ty) {
  Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
  m(0, 2) = tx;
  m(1, 2) = ty;
  return {m, TransformKind::Affine};
}

bool GlobalTransform::invertible() const {
  const double det2 = m_(0, 0) * m_(1, 1) - m_(0, 1) * m_(1, 0);
  return std::abs(det2) > 1e-12 && std::abs(m_.determinant()) > 1e-12;
}

GlobalTransform GlobalTransform::inverse() const {
  if (!invertible()) fail(ErrorKind::Argument, "singular global transform");
  return {m_.inverse(), kind_};
}

Vec2 GlobalTransform::apply(Vec2 p) const {
  const double x = m_(0, 0) * p.x + m_(0, 1) * p.y + m_(0, 2);
  const double y = m_(1, 0) * p.x + m_(1, 1) * p.y + m_(1, 2);
  const double w = m_(2, 0) * p.x + m_(2, 1) * p.y + m_(2, 2);
  if (std::abs(w) < 1e-12) fail(ErrorKind::DegeneratePoint, "point maps to the plane at infinity");
  if (w == 1.0) return {x, y};
  return {x / w, y / w};
}

std::string format_transform(const GlobalTransform &t) {
  std::ostringstream out;
  out << to_string(t.kind()) << '\n';
  for (int r = 0; r < 3; ++r)
    out << format_double(t.matrix()(r, 0)) << ' ' << format_double(t.matrix()(r, 1)) << ' '
        << format_double(t.matrix()(r, 2)) << '\n';
  return out.str();
}

void write_transform(const GlobalTransform &t, const std::filesystem::path &path) {
  write_text_file(path, format_transform(t));
}

GlobalTransform read_transform(const std::filesystem::path &path) {
  std::istringstream in(read_text_file(path));
  std::string kind_s;
  in >> kind_s;
  TransformKind kind;
  if (kind_s == "identity") kind = TransformKind::Identity;
  else if (kind_s == "affine") kind = TransformKind::Affine;
  else if (kind_s == "homography") kind = TransformKind::Homography;
  else fail(ErrorKind::Format, path.string() + ": unknown transform kind '" + kind_s + "'");
  Eigen::Matrix3d m;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c)
      if (!(in >> m(r, c))) fail(ErrorKind::Format, path.string() + ": expected 9 matrix entries");
  try {
    return {m, kind};
  } catch (const Error &e) {
    fail(ErrorKind::Format, path.string() + ": " + e.what());
  }
}

namespace {

// Similarity that moves the centroid to the origin and scales the mean
// distance from it to sqrt(2).
Eigen::Matrix3d normalizer(const std::vector<Vec2> &pts) {
  Vec2 c;
  for (const auto &p : pts) c += p;
  c *= 1.0 / static_cast<double>(pts.size());
  double mean_d = 0.0;
  for (const auto &p : pts) mean_d += norm(p - c);
  mean_d /= static_cast<double>(pts.size());
  if (!(mean_d > 1e-12)) fail(ErrorKind::DegenerateInput, "all points coincide");
  const double s = std::sqrt(2.0) / mean_d;
  Eigen::Matrix3d t = Eigen::Matrix3d::Identity();
  t(0, 0) = s;
  t(1, 1) = s;
  t(0, 2) = -s * c.x;
  t(1, 2) = -s * c.y;
  return t;
}

Vec2 xform(const Eigen::Matrix3d &t, Vec2 p) {
  const double w = t(2, 0) * p.x + t(2, 1) * p.y + t(2, 2);
  return {(t(0, 0) * p.x + t(0, 1) * p.y + t(0, 2)) / w, (t(1, 0) * p.x + t(1, 1) * p.y + t(1, 2)) / w};
}

double cross3(Vec2 a, Vec2 b, Vec2 c) { return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x); }

bool any_three_collinear(const std::array<Vec2, 4> &p) {
  double scale = 0.0;
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j) scale = std::max(scale, norm2(p[i] - p[j]));
  const double tol = 1e-9 * std::max(scale, 1e-300);
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j)
      for (int k = j + 1; k < 4; ++k)
        if (std::abs(cross3(p[i], p[j], p[k])) <= tol) return true;
  return false;
}

double transfer_error(const Eigen::Matrix3d &h, const Match &m) {
  const double w = h(2, 0) * m.fixed.x + h(2, 1) * m.fixed.y + h(2, 2);
  if (std::abs(w) < 1e-12) return std::numeric_limits<double>::infinity();
  const Vec2 q{(h(0, 0) * m.fixed.x + h(0, 1) * m.fixed.y + h(0, 2)) / w,
               (h(1, 0) * m.fixed.x + h(1, 1) * m.fixed.y + h(1, 2)) / w};
  return norm(q - m.moving);
}

} // namespace

GlobalTransform fit_affine(const MatchSet &matches) {
  matches.validate();
  const std::size_t n = matches.size();
  if (n < 3) fail(ErrorKind::DegenerateInput, "affine fit needs >= 3 pairs, got " + std::to_string(n));

  std::vector<Vec2> pf, pm;
  for (const auto &m : matches.pairs) {
    pf.push_back(m.fixed);
    pm.push_back(m.moving);
  }
  const Eigen::Matrix3d tf = normalizer(pf);
  Eigen::MatrixXd a(n, 3);
  Eigen::MatrixXd b(n, 2);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 q = xform(tf, pf[i]);
    a.row(i) << q.x, q.y, 1.0;
    b.row(i) << pm[i].x, pm[i].y;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto &sv = svd.singularValues();
  if (sv(2) <= 1e-10 * sv(0)) fail(ErrorKind::DegenerateInput, "collinear configuration: affine fit is rank deficient");
  const Eigen::MatrixXd x = svd.solve(b); // 3x2
  Eigen::Matrix3d an = Eigen::Matrix3d::Identity();
  an.block<2, 3>(0, 0) = x.transpose();
  return {an * tf, TransformKind::Affine};
}

Eigen::Matrix3d homography_dlt(const std::vector<Match> &pairs) {
  if (pairs.size() < 4) fail(ErrorKind::DegenerateInput, "homography needs >= 4 pairs");
  std::vector<Vec2> pf, pm;
  for (const auto &m : pairs) {
    pf.push_back(m.fixed);
    pm.push_back(m.moving);
  }
  const Eigen::Matrix3d tf = normalizer(pf);
  const Eigen::Matrix3d tm = normalizer(pm);
  Eigen::MatrixXd a(2 * pairs.size(), 9);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const Vec2 p = xform(tf, pf[i]);
    const Vec2 q = xform(tm, pm[i]);
    a.row(2 * i) << -p.x, -p.y, -1.0, 0.0, 0.0, 0.0, q.x * p.x, q.x * p.y, q.x;
    a.row(2 * i + 1) << 0.0, 0.0, 0.0, -p.x, -p.y, -1.0, q.y * p.x, q.y * p.y, q.y;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const Eigen::VectorXd h = svd.matrixV().col(8);
  Eigen::Matrix3d hn;
  hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
  Eigen::Matrix3d out = tm.inverse() * hn * tf;
  if (std::abs(out(2, 2)) < 1e-15) fail(ErrorKind::DegenerateInput, "DLT produced an unnormalizable homography");
  return out / out(2, 2);
}

int RansacConfig::resolved_min_inliers(std::size_t n_pairs) const {
  if (min_inliers > 0) return min_inliers;
  return std::max(10, static_cast<int>(std::ceil(0.3 * static_cast<double>(n_pairs))));
}

HomographyFit fit_homography_ransac(const MatchSet &matches, const RansacConfig &cfg) {
  matches.validate();
  const std::size_t n = matches.size();
  if (n < 4) fail(ErrorKind::DegenerateInput, "homography needs >= 4 pairs, got " + std::to_string(n));
  if (cfg.iters < 1 || !(cfg.inlier_thresh_px > 0.0)) fail(ErrorKind::Argument, "invalid RANSAC configuration");

  const int need = cfg.resolved_min_inliers(n);
  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);

  std::vector<std::size_t> best;
  for (int it = 0; it < cfg.iters; ++it) {
    std::array<std::size_t, 4> idx{};
    for (int k = 0; k < 4; ++k) {
      for (;;) {
        idx[k] = pick(rng);
        if (std::find(idx.begin(), idx.begin() + k, idx[k]) == idx.begin() + k) break;
      }
    }
    std::array<Vec2, 4> f{}, m{};
    std::vector<Match> sample;
    for (int k = 0; k < 4; ++k) {
      f[k] = matches.pairs[idx[k]].fixed;
      m[k] = matches.pairs[idx[k]].moving;
      sample.push_back(matches.pairs[idx[k]]);
    }
    if (any_three_collinear(f) || any_three_collinear(m)) continue;
    Eigen::Matrix3d h;
    try {
      h = homography_dlt(sample);
    } catch (const Error &) {
      continue;
    }
    if (!h.allFinite()) continue;
    std::vector<std::size_t> inl;
    for (std::size_t i = 0; i < n; ++i)
      if (transfer_error(h, matches.pairs[i]) <= cfg.inlier_thresh_px) inl.push_back(i);
    // Strict improvement only: ties keep the lower hypothesis index.
    if (inl.size() > best.size()) best = std::move(inl);
    if (best.size() == n) break;
  }
  if (static_cast<int>(best.size()) < need || best.size() < 4)
    fail(ErrorKind::NoConsensus, "best homography has " + std::to_string(best.size()) + " inliers, need " +
                                     std::to_string(need));
  std::vector<Match> inlier_pairs;
  for (auto i : best) inlier_pairs.push_back(matches.pairs[i]);
  return {GlobalTransform(homography_dlt(inlier_pairs), TransformKind::Homography), best};
}

GlobalTransform fit_homography(const MatchSet &matches, const RansacConfig &cfg) {
  return fit_homography_ransac(matches, cfg).transform;
}

CoarseFit fit_coarse(const MatchSet &matches, const RansacConfig &cfg) {
  try {
    auto fit = fit_homography_ransac(matches, cfg);
    return {fit.transform, std::move(fit.inliers), false};
  } catch (const Error &e) {
    if (e.kind() != ErrorKind::NoConsensus) throw;
  }
  CoarseFit out{fit_affine(matches), {}, true};
  for (std::size_t i = 0; i < matches.size(); ++i) out.inliers.push_back(i);
  return out;
}

Image apply_global(const Image &img, const GlobalTransform &t, int out_w, int out_h) {
  if (!t.invertible()) fail(ErrorKind::Argument, "singular global transform");
  if (out_w < 1 || out_h < 1) fail(ErrorKind::Argument, "output size must be >= 1x1");
  const Eigen::Matrix3d &h = t.matrix();
  std::vector<double> out(static_cast<std::size_t>(out_w) * out_h);
  parallel_rows(out_h, [&](std::size_t, std::size_t y0, std::size_t y1) {
    for (std::size_t y = y0; y < y1; ++y) {
      for (int x = 0; x < out_w; ++x) {
        const double px = h(0, 0) * x + h(0, 1) * static_cast<double>(y) + h(0, 2);
        const double py = h(1, 0) * x + h(1, 1) * static_cast<double>(y) + h(1, 2);
        double w = h(2, 0) * x + h(2, 1) * static_cast<double>(y) + h(2, 2);
        if (std::abs(w) < 1e-12) w = std::copysign(1e-12, w);
        const Vec2 p = w == 1.0 ? Vec2{px, py} : Vec2{px / w, py / w};
        out[y * out_w + x] = sample_value(img, p);
      }
    }
  });
  return Image(out_w, out_h, std::move(out));
}

PixelCoord to_coarse_frame(const GlobalTransform &t, PixelCoord p_moving) {
  if (!t.invertible()) fail(ErrorKind::Argument, "singular global transform");
  return t.inverse().apply(p_moving);
}

} // namespace gpo
