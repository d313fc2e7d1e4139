#include "gpo/primitives.hpp"
#include "gpo/text_table.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <sstream>

namespace gpo {

void RadiusConfig::validate() const {
  if (!(r_min >= 0.0) || !(r_max > r_min) || !std::isfinite(r_max))
    fail(ErrorKind::Argument, "radius bounds must satisfy 0 <= r_min < r_max");
}

double radius_of(double beta, const RadiusConfig &cfg) {
  return cfg.r_min + (cfg.r_max - cfg.r_min) * sigmoid(beta) + kRadiusOffset;
}

double radius_slope(double beta, const RadiusConfig &cfg) {
  const double s = sigmoid(beta);
  return (cfg.r_max - cfg.r_min) * s * (1.0 - s);
}

double beta_for_radius(double r, const RadiusConfig &cfg) {
  const double lo = cfg.r_min + kRadiusOffset;
  const double hi = cfg.r_max + kRadiusOffset;
  if (!(r > lo && r < hi))
    fail(ErrorKind::Argument, "radius " + std::to_string(r) + " outside (" + std::to_string(lo) + ", " +
                                  std::to_string(hi) + ")");
  const double p = (r - lo) / (cfg.r_max - cfg.r_min);
  return std::log(p) - std::log1p(-p);
}

NodeSet::NodeSet(std::vector<ControlNode> nodes, RadiusConfig radius, std::vector<Vec2> anchors,
                 std::vector<Vec2> targets)
    : nodes_(std::move(nodes)), radius_(radius), anchors_(std::move(anchors)), targets_(std::move(targets)) {
  validate();
}

void NodeSet::validate() const {
  radius_.validate();
  if (nodes_.empty()) fail(ErrorKind::Argument, "node set must contain at least one node");
  if (anchors_.size() != targets_.size()) fail(ErrorKind::Argument, "anchors and targets differ in length");
  if (!anchors_.empty() && anchors_.size() != nodes_.size())
    fail(ErrorKind::Argument, "anchor count must equal node count");
  for (const auto &n : nodes_)
    if (!is_finite(n.g) || !is_finite(n.t) || !std::isfinite(n.beta))
      fail(ErrorKind::Argument, "non-finite control node parameter");
  for (std::size_t i = 0; i < anchors_.size(); ++i)
    if (!is_finite(anchors_[i]) || !is_finite(targets_[i])) fail(ErrorKind::Argument, "non-finite anchor");
}

std::vector<std::size_t> subsample_indices(const MatchSet &matches, std::size_t n_nodes, std::uint64_t seed) {
  if (n_nodes < 1) fail(ErrorKind::Argument, "n_nodes must be >= 1");
  const std::size_t n = matches.size();
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), 0);
  if (n <= n_nodes) return all;

  double x0 = matches.pairs[0].fixed.x, x1 = x0, y0 = matches.pairs[0].fixed.y, y1 = y0;
  for (const auto &m : matches.pairs) {
    x0 = std::min(x0, m.fixed.x);
    x1 = std::max(x1, m.fixed.x);
    y0 = std::min(y0, m.fixed.y);
    y1 = std::max(y1, m.fixed.y);
  }
  const double wx = std::max(x1 - x0, 1e-12);
  const double wy = std::max(y1 - y0, 1e-12);
  auto bucket_of = [&](const Vec2 &p) {
    const int bx = std::clamp(static_cast<int>((p.x - x0) / wx * kSubsampleGrid), 0, kSubsampleGrid - 1);
    const int by = std::clamp(static_cast<int>((p.y - y0) / wy * kSubsampleGrid), 0, kSubsampleGrid - 1);
    return by * kSubsampleGrid + bx;
  };

  std::mt19937_64 rng(seed);
  std::shuffle(all.begin(), all.end(), rng);
  if (matches.has_confidence()) {
    std::stable_sort(all.begin(), all.end(),
                     [&](std::size_t a, std::size_t b) { return matches.confidence[a] > matches.confidence[b]; });
  }
  std::vector<std::vector<std::size_t>> buckets(kSubsampleGrid * kSubsampleGrid);
  for (auto i : all) buckets[bucket_of(matches.pairs[i].fixed)].push_back(i);

  std::vector<std::size_t> chosen;
  chosen.reserve(n_nodes);
  for (std::size_t level = 0; chosen.size() < n_nodes; ++level) {
    for (const auto &b : buckets) {
      if (level < b.size()) {
        chosen.push_back(b[level]);
        if (chosen.size() == n_nodes) break;
      }
    }
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

MatchSet subsample_keypoints(const MatchSet &matches, std::size_t n_nodes, std::uint64_t seed) {
  const auto idx = subsample_indices(matches, n_nodes, seed);
  MatchSet out;
  for (auto i : idx) {
    out.pairs.push_back(matches.pairs[i]);
    if (matches.has_confidence()) out.confidence.push_back(matches.confidence[i]);
  }
  return out;
}

double median_nn_distance(const std::vector<Vec2> &pts) {
  if (pts.size() < 2) return 0.0;
  std::vector<double> nn(pts.size(), std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = 0; j < pts.size(); ++j)
      if (i != j) nn[i] = std::min(nn[i], norm2(pts[i] - pts[j]));
  const auto mid = nn.begin() + static_cast<std::ptrdiff_t>(nn.size() / 2);
  std::nth_element(nn.begin(), mid, nn.end());
  double med = *mid;
  if (nn.size() % 2 == 0) {
    const double lower = *std::max_element(nn.begin(), mid);
    med = 0.5 * (med + lower);
  }
  return std::sqrt(med);
}

namespace {

// Keeps a requested radius strictly inside the representable interval.
double clamp_radius(double r, const RadiusConfig &cfg) {
  const double span = cfg.r_max - cfg.r_min;
  const double lo = cfg.r_min + kRadiusOffset + 1e-3 * span;
  const double hi = cfg.r_max + kRadiusOffset - 1e-3 * span;
  return std::clamp(r, lo, hi);
}

} // namespace

NodeSet init_dcn(const MatchSet &matches, const GlobalTransform &t, std::size_t n_nodes, const RadiusConfig &cfg,
                 double init_radius, std::uint64_t seed) {
  cfg.validate();
  if (matches.empty()) fail(ErrorKind::DegenerateInput, "DCN initialisation needs at least one match");
  if (n_nodes < 1) fail(ErrorKind::Argument, "n_nodes must be >= 1");
  matches.validate();
  const MatchSet kept = subsample_keypoints(matches, n_nodes, seed);
  const GlobalTransform inv = t.inverse();

  std::vector<Vec2> anchors, targets;
  for (const auto &m : kept.pairs) {
    anchors.push_back(m.fixed);
    targets.push_back(inv.apply(m.moving) - m.fixed);
  }
  double r = init_radius;
  if (!(r > 0.0)) {
    const double nn = median_nn_distance(anchors);
    r = nn > 0.0 ? 2.0 * nn : 0.5 * (cfg.r_min + cfg.r_max);
  }
  const double beta = beta_for_radius(clamp_radius(r, cfg), cfg);
  std::vector<ControlNode> nodes;
  for (std::size_t i = 0; i < anchors.size(); ++i) nodes.push_back({anchors[i], targets[i], beta});
  return NodeSet(std::move(nodes), cfg, std::move(anchors), std::move(targets));
}

NodeSet init_gcn(int width, int height, int n, const RadiusConfig &cfg, double init_radius) {
  cfg.validate();
  if (n < 2) fail(ErrorKind::Argument, "grid side must be >= 2, got " + std::to_string(n));
  if (width < 1 || height < 1) fail(ErrorKind::Argument, "grid extent must be >= 1x1");
  const double sx = static_cast<double>(width) / n;
  const double sy = static_cast<double>(height) / n;
  const double r = init_radius > 0.0 ? init_radius : 0.5 * (sx + sy);
  const double beta = beta_for_radius(clamp_radius(r, cfg), cfg);
  std::vector<ControlNode> nodes;
  nodes.reserve(static_cast<std::size_t>(n) * n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) nodes.push_back({{(i + 0.5) * sx, (j + 0.5) * sy}, {0.0, 0.0}, beta});
  return NodeSet(std::move(nodes), cfg);
}

void write_nodes(const NodeSet &nodes, const std::filesystem::path &path) {
  std::ostringstream out;
  out << "# r_min=" << format_double(nodes.radius_config().r_min)
      << " r_max=" << format_double(nodes.radius_config().r_max) << '\n';
  for (std::size_t i = 0; i < nodes.anchors().size(); ++i) {
    out << "# anchor " << format_double(nodes.anchors()[i].x) << ',' << format_double(nodes.anchors()[i].y) << ','
        << format_double(nodes.targets()[i].x) << ',' << format_double(nodes.targets()[i].y) << '\n';
  }
  out << "x,y,tx,ty,beta\n";
  for (const auto &n : nodes.nodes())
    out << format_double(n.g.x) << ',' << format_double(n.g.y) << ',' << format_double(n.t.x) << ','
        << format_double(n.t.y) << ',' << format_double(n.beta) << '\n';
  write_text_file(path, out.str());
}

NodeSet read_nodes(const std::filesystem::path &path) {
  const std::string text = read_text_file(path);
  RadiusConfig cfg;
  bool have_radius = false;
  std::vector<Vec2> anchors, targets;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const std::string t = trim(line);
    if (t.rfind("# r_min=", 0) == 0) {
      if (std::sscanf(t.c_str(), "# r_min=%lf r_max=%lf", &cfg.r_min, &cfg.r_max) != 2)
        fail(ErrorKind::Format, path.string() + ": malformed radius header");
      have_radius = true;
    } else if (t.rfind("# anchor ", 0) == 0) {
      const auto cells = split(t.substr(9), ',');
      if (cells.size() != 4) fail(ErrorKind::Format, path.string() + ": malformed anchor line");
      anchors.push_back({std::stod(cells[0]), std::stod(cells[1])});
      targets.push_back({std::stod(cells[2]), std::stod(cells[3])});
    }
  }
  if (!have_radius) fail(ErrorKind::Format, path.string() + ": missing '# r_min=... r_max=...' header");
  const TextTable table = parse_table(text, path.string());
  std::vector<ControlNode> nodes;
  for (const auto &row : table.rows) {
    if (row.size() != 5) fail(ErrorKind::Format, path.string() + ": node rows need 5 columns");
    nodes.push_back({{row[0], row[1]}, {row[2], row[3]}, row[4]});
  }
  try {
    return NodeSet(std::move(nodes), cfg, std::move(anchors), std::move(targets));
  } catch (const Error &e) {
    fail(ErrorKind::Format, path.string() + ": " + e.what());
  }
}

} // namespace gpo
