#pragma once

#include "gpo/common.hpp"
#include "gpo/image.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

namespace gpo {

struct Match {
  Vec2 fixed;
  Vec2 moving;
};

// Point correspondences fixed -> moving. Confidences are optional but, when
// present, there is exactly one per pair.
struct MatchSet {
  std::vector<Match> pairs;
  std::vector<double> confidence;

  std::size_t size() const noexcept { return pairs.size(); }
  bool empty() const noexcept { return pairs.empty(); }
  bool has_confidence() const noexcept { return !confidence.empty(); }
  void validate() const;
};

// `x_f,y_f,x_m,y_m[,confidence]` with a header line.
MatchSet read_matches(const std::filesystem::path &path);
void write_matches(const MatchSet &m, const std::filesystem::path &path);

enum class TransformKind { Identity, Affine, Homography };
const char *to_string(TransformKind kind);

// Maps fixed/coarse-frame homogeneous coordinates into the moving frame.
class GlobalTransform {
public:
  GlobalTransform() : m_(Eigen::Matrix3d::Identity()), kind_(TransformKind::Identity) {}
  GlobalTransform(const Eigen::Matrix3d &m, TransformKind kind);

  static GlobalTransform identity() { return {}; }
  static GlobalTransform translation(double tx, double ty);

  const Eigen::Matrix3d &matrix() const noexcept { return m_; }
  TransformKind kind() const noexcept { return kind_; }

  bool invertible() const;
  GlobalTransform inverse() const;

  // Homogeneous application; throws DegeneratePoint when w ~ 0.
  Vec2 apply(Vec2 p) const;

private:
  Eigen::Matrix3d m_;
  TransformKind kind_;
};

// Text form: first line the kind, then three rows of three numbers.
void write_transform(const GlobalTransform &t, const std::filesystem::path &path);
GlobalTransform read_transform(const std::filesystem::path &path);
std::string format_transform(const GlobalTransform &t);

GlobalTransform fit_affine(const MatchSet &matches);

struct RansacConfig {
  int iters = 2000;
  double inlier_thresh_px = 3.0;
  int min_inliers = 0; // 0 = max(10, 30% of pairs)
  std::uint64_t seed = 0;

  int resolved_min_inliers(std::size_t n_pairs) const;
};

struct HomographyFit {
  GlobalTransform transform;
  std::vector<std::size_t> inliers; // indices into the match set, ascending
};

// RANSAC over 4-point samples, normalized DLT per hypothesis, DLT refit on
// the best inlier set. Deterministic for a given seed.
HomographyFit fit_homography_ransac(const MatchSet &matches, const RansacConfig &cfg);
GlobalTransform fit_homography(const MatchSet &matches, const RansacConfig &cfg);

// Normalized DLT on all given pairs (>= 4, not all collinear).
Eigen::Matrix3d homography_dlt(const std::vector<Match> &pairs);

struct CoarseFit {
  GlobalTransform transform;
  std::vector<std::size_t> inliers;
  bool used_affine_fallback = false;
};

// Homography with affine fallback on no-consensus.
CoarseFit fit_coarse(const MatchSet &matches, const RansacConfig &cfg);

// Backward warp: out(x) = img(T x).
Image apply_global(const Image &img, const GlobalTransform &t, int out_w, int out_h);

// Moving-frame point into the coarse frame: T^-1 p.
PixelCoord to_coarse_frame(const GlobalTransform &t, PixelCoord p_moving);

} // namespace gpo
