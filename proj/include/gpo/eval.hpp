#pragma once

#include "gpo/coarse.hpp"
#include "gpo/field.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace gpo {

// Annotated correspondences at original resolution plus the per-axis
// original-to-working scale of each image.
struct LandmarkPairs {
  std::vector<Match> pairs;
  Vec2 scale_fixed{1.0, 1.0};
  Vec2 scale_moving{1.0, 1.0};

  void validate() const;
};

// `x_f,y_f,x_m,y_m` with header.
LandmarkPairs read_landmarks(const std::filesystem::path &path);
void write_landmarks(const LandmarkPairs &lm, const std::filesystem::path &path);

// Where the fixed landmark is sampled from in the original moving image:
// scale_moving * T(x + u(x)), x = p_f / scale_fixed.
PixelCoord map_fixed_to_moving(PixelCoord p_fixed, const GlobalTransform &t, const DisplacementField &field,
                               Vec2 scale_fixed, Vec2 scale_moving);

struct TREStats {
  std::vector<double> distances;
  double median = 0.0;
  double mean = 0.0;
  double max = 0.0;

  static TREStats from_distances(std::vector<double> d);
};

TREStats tre(const LandmarkPairs &landmarks, const GlobalTransform &t, const DisplacementField &field);

struct AUCCurve {
  std::vector<double> success_rate; // index e-1 holds success(e), e = 1..T_max
  std::map<int, double> auc_at;
};

inline const std::vector<int> kDefaultAucThresholds{15, 25, 50};

// success(e) = fraction of pairs whose mean TRE <= e; AUC@T = mean of
// success(1..T).
AUCCurve auc(const std::vector<TREStats> &per_pair, const std::vector<int> &thresholds = kDefaultAucThresholds);

// Writes tre.csv (pair,landmark,distance), tre_summary.csv
// (pair,mean,median,max) and auc.csv (threshold,auc) into `dir`.
void write_report(const std::vector<TREStats> &per_pair, const AUCCurve &curve, const std::filesystem::path &dir);

double median_of(std::vector<double> v);

} // namespace gpo
