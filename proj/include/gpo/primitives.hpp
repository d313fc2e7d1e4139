#pragma once

#include "gpo/coarse.hpp"
#include "gpo/common.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace gpo {

// One Gaussian primitive: trainable center, displacement and raw radius.
struct ControlNode {
  Vec2 g;
  Vec2 t;
  double beta = 0.0;
};

struct RadiusConfig {
  double r_min = 8.0;
  double r_max = 256.0;

  void validate() const;
};

// Fixed offset keeping every radius strictly positive.
inline constexpr double kRadiusOffset = 0.1;

double radius_of(double beta, const RadiusConfig &cfg);
// d radius_of / d beta
double radius_slope(double beta, const RadiusConfig &cfg);
// Inverse of radius_of; r must lie in the open interval (r_min + 0.1, r_max + 0.1).
double beta_for_radius(double r, const RadiusConfig &cfg);

// The trainable node population plus the frozen data the keypoint term
// needs. Every mutable access bumps the revision so consumers can detect
// stale derived data.
class NodeSet {
public:
  NodeSet() = default;
  NodeSet(std::vector<ControlNode> nodes, RadiusConfig radius, std::vector<Vec2> anchors = {},
          std::vector<Vec2> targets = {});

  std::size_t size() const noexcept { return nodes_.size(); }
  const std::vector<ControlNode> &nodes() const noexcept { return nodes_; }
  const ControlNode &operator[](std::size_t i) const { return nodes_[i]; }
  std::vector<ControlNode> &mutable_nodes() {
    ++revision_;
    return nodes_;
  }

  const RadiusConfig &radius_config() const noexcept { return radius_; }
  double radius(std::size_t i) const { return radius_of(nodes_[i].beta, radius_); }

  const std::vector<Vec2> &anchors() const noexcept { return anchors_; }
  const std::vector<Vec2> &targets() const noexcept { return targets_; }
  bool has_anchors() const noexcept { return !anchors_.empty(); }

  std::uint64_t revision() const noexcept { return revision_; }

  void validate() const;

private:
  std::vector<ControlNode> nodes_;
  RadiusConfig radius_;
  std::vector<Vec2> anchors_;
  std::vector<Vec2> targets_;
  std::uint64_t revision_ = 0;
};

// Spatially stratified subsample: 16x16 buckets over the bounding box of the
// fixed points, round-robin over buckets, highest confidence first within a
// bucket (seeded shuffle breaks ties). Returns pairs in input order.
MatchSet subsample_keypoints(const MatchSet &matches, std::size_t n_nodes, std::uint64_t seed);

// Indices chosen by subsample_keypoints, ascending.
std::vector<std::size_t> subsample_indices(const MatchSet &matches, std::size_t n_nodes, std::uint64_t seed);

inline constexpr int kSubsampleGrid = 16;

// init_radius <= 0 picks the default: twice the median nearest-neighbour
// spacing of the retained keypoints.
NodeSet init_dcn(const MatchSet &matches, const GlobalTransform &t, std::size_t n_nodes, const RadiusConfig &cfg,
                 double init_radius = 0.0, std::uint64_t seed = 0);

// init_radius <= 0 picks the lattice spacing.
NodeSet init_gcn(int width, int height, int n, const RadiusConfig &cfg, double init_radius = 0.0);

double median_nn_distance(const std::vector<Vec2> &pts);

// `x,y,tx,ty,beta` table preceded by `# r_min=<v> r_max=<v>`. Anchors and
// targets are appended as `# anchor ax,ay,tx,ty` comment lines so DCN state
// survives a warm restart.
void write_nodes(const NodeSet &nodes, const std::filesystem::path &path);
NodeSet read_nodes(const std::filesystem::path &path);

} // namespace gpo
