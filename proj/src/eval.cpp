#include "gpo/eval.hpp"
#include "gpo/text_table.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

namespace gpo {

void LandmarkPairs::validate() const {
  if (pairs.empty()) fail(ErrorKind::Argument, "landmark set is empty");
  if (!(scale_fixed.x > 0.0 && scale_fixed.y > 0.0 && scale_moving.x > 0.0 && scale_moving.y > 0.0))
    fail(ErrorKind::Argument, "landmark scales must be > 0");
  for (const auto &p : pairs)
    if (!is_finite(p.fixed) || !is_finite(p.moving)) fail(ErrorKind::Argument, "non-finite landmark");
}

LandmarkPairs read_landmarks(const std::filesystem::path &path) {
  const TextTable t = read_table(path);
  LandmarkPairs lm;
  for (const auto &row : t.rows) {
    if (row.size() != 4) fail(ErrorKind::Format, path.string() + ": landmark rows need 4 columns");
    lm.pairs.push_back({{row[0], row[1]}, {row[2], row[3]}});
  }
  try {
    lm.validate();
  } catch (const Error &e) {
    fail(ErrorKind::Format, path.string() + ": " + e.what());
  }
  return lm;
}

void write_landmarks(const LandmarkPairs &lm, const std::filesystem::path &path) {
  std::ostringstream out;
  out << "x_f,y_f,x_m,y_m\n";
  for (const auto &p : lm.pairs)
    out << format_double(p.fixed.x) << ',' << format_double(p.fixed.y) << ',' << format_double(p.moving.x) << ','
        << format_double(p.moving.y) << '\n';
  write_text_file(path, out.str());
}

PixelCoord map_fixed_to_moving(PixelCoord p_fixed, const GlobalTransform &t, const DisplacementField &field,
                               Vec2 scale_fixed, Vec2 scale_moving) {
  const Vec2 x{p_fixed.x / scale_fixed.x, p_fixed.y / scale_fixed.y};
  const Vec2 q = t.apply(x + field.interpolate(x));
  return {q.x * scale_moving.x, q.y * scale_moving.y};
}

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

TREStats TREStats::from_distances(std::vector<double> d) {
  TREStats s;
  s.distances = std::move(d);
  if (s.distances.empty()) return s;
  s.median = median_of(s.distances);
  s.mean = std::accumulate(s.distances.begin(), s.distances.end(), 0.0) / static_cast<double>(s.distances.size());
  s.max = *std::max_element(s.distances.begin(), s.distances.end());
  return s;
}

TREStats tre(const LandmarkPairs &landmarks, const GlobalTransform &t, const DisplacementField &field) {
  landmarks.validate();
  std::vector<double> d;
  d.reserve(landmarks.pairs.size());
  for (const auto &p : landmarks.pairs)
    d.push_back(norm(map_fixed_to_moving(p.fixed, t, field, landmarks.scale_fixed, landmarks.scale_moving) - p.moving));
  return TREStats::from_distances(std::move(d));
}

AUCCurve auc(const std::vector<TREStats> &per_pair, const std::vector<int> &thresholds) {
  if (per_pair.empty()) fail(ErrorKind::Argument, "auc needs at least one image pair");
  if (thresholds.empty()) fail(ErrorKind::Argument, "auc needs at least one threshold");
  for (int t : thresholds)
    if (t < 1) fail(ErrorKind::Argument, "AUC thresholds must be positive integers");
  const int t_max = *std::max_element(thresholds.begin(), thresholds.end());
  AUCCurve c;
  c.success_rate.resize(static_cast<std::size_t>(t_max));
  const double n = static_cast<double>(per_pair.size());
  for (int e = 1; e <= t_max; ++e) {
    std::size_t hits = 0;
    for (const auto &s : per_pair)
      if (s.mean <= static_cast<double>(e)) ++hits;
    c.success_rate[e - 1] = static_cast<double>(hits) / n;
  }
  for (int t : thresholds) {
    double sum = 0.0;
    for (int e = 1; e <= t; ++e) sum += c.success_rate[e - 1];
    c.auc_at[t] = sum / static_cast<double>(t);
  }
  return c;
}

void write_report(const std::vector<TREStats> &per_pair, const AUCCurve &curve, const std::filesystem::path &dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorKind::Io, "cannot create " + dir.string() + ": " + ec.message());
  std::ostringstream tre_out, sum_out, auc_out;
  tre_out << "pair,landmark,distance\n";
  sum_out << "pair,mean,median,max\n";
  for (std::size_t p = 0; p < per_pair.size(); ++p) {
    const auto &s = per_pair[p];
    for (std::size_t i = 0; i < s.distances.size(); ++i)
      tre_out << p << ',' << i << ',' << format_double(s.distances[i]) << '\n';
    sum_out << p << ',' << format_double(s.mean) << ',' << format_double(s.median) << ',' << format_double(s.max)
            << '\n';
  }
  auc_out << "threshold,auc\n";
  for (const auto &[t, v] : curve.auc_at) auc_out << t << ',' << format_double(v) << '\n';
  write_text_file(dir / "tre.csv", tre_out.str());
  write_text_file(dir / "tre_summary.csv", sum_out.str());
  write_text_file(dir / "auc.csv", auc_out.str());
}

} // namespace gpo
