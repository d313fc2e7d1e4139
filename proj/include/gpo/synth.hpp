#pragma once

#include "gpo/coarse.hpp"
#include "gpo/eval.hpp"
#include "gpo/field.hpp"
#include "gpo/image.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace gpo {

struct SynthConfig {
  std::uint64_t seed = 0;
  int size = 256;
  int n_vessels = 6;
  double vessel_width_min = 2.0; // full width at half depth, pixels
  double vessel_width_max = 5.0;
  double vessel_contrast = 0.3;
  int deform_nodes = 12;
  double deform_max_px = 12.0;
  double homography_jitter = 0.01; // corner offsets as a fraction of size; 0 = identity
  double intensity_jitter = 0.05;
  int landmark_count = 40;
  double match_noise_px = 2.0;
  int match_count = 200;
  double noise_amplitude = 0.01;

  void validate() const;
};

struct VesselRender {
  Image image;
  Image background;
  std::vector<std::vector<Vec2>> centerlines; // one polyline per walk, 1 px steps
  std::vector<double> widths;                 // per centerline
};

VesselRender render_vessels(const SynthConfig &cfg);
Image gen_vessel_image(const SynthConfig &cfg);

// Random Gaussian primitives blended with full support. Node displacements
// are drawn uniformly from [-D, D]^2 restricted to |t| <= D, so the blended
// field never exceeds D in magnitude.
DisplacementField gen_deformation(const SynthConfig &cfg, int size);

struct SynthPair {
  Image fixed;
  Image moving;
  DisplacementField gt_field;
  LandmarkPairs landmarks;
  MatchSet matches;
  GlobalTransform gt_transform;
};

// Largest residual |x + u(x) - z| tolerated by the field inversion.
inline constexpr double kInversionTolerance = 0.05;
inline constexpr int kInversionIterations = 20;

SynthPair make_pair(const SynthConfig &cfg);

// key=value lines, one per SynthConfig field.
std::string format_synth_config(const SynthConfig &cfg);

// fixed.png, moving.png, fixed.gpoi, moving.gpoi, landmarks.csv,
// matches.csv, gt_field.gpof, gt_transform.txt, manifest.txt
void write_synth_bundle(const SynthPair &pair, const SynthConfig &cfg, const std::filesystem::path &dir);

} // namespace gpo
