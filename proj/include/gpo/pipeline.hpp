#pragma once

#include "gpo/config.hpp"
#include "gpo/eval.hpp"
#include "gpo/optim.hpp"

#include <filesystem>
#include <optional>

namespace gpo {

struct PipelineInputs {
  std::filesystem::path fixed;
  std::filesystem::path moving;
  std::optional<std::filesystem::path> matches;
  std::optional<std::filesystem::path> landmarks; // original-resolution coordinates
};

struct PipelineResult {
  RegistrationResult registration;
  Image fixed;         // working resolution, preprocessed
  Image moving_coarse; // moving after the global pre-warp
  CoarseFit coarse;
  Vec2 scale_fixed{1.0, 1.0};  // original / working
  Vec2 scale_moving{1.0, 1.0};
  std::optional<TREStats> tre_coarse; // zero field
  std::optional<TREStats> tre_final;
  FieldStats field;
};

// Loads, preprocesses and registers one pair. Artifacts are written to
// cfg.output_dir (when set) only after the optimization succeeded.
PipelineResult run_pipeline(const PipelineInputs &in, const RunConfig &cfg);

// Writes warped.png, field.gpof, loss_trace.csv, overlay.png, diff.png,
// transform.txt, nodes.csv, metadata.txt and, with landmarks, tre.csv.
void write_artifacts(const PipelineResult &r, const RunConfig &cfg, const std::filesystem::path &dir);

} // namespace gpo
