#pragma once

#include "gpo/coarse.hpp"
#include "gpo/optim.hpp"
#include "gpo/primitives.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace gpo {

enum class Mode { Dcn, Gcn };
const char *to_string(Mode m);

struct PreprocConfig {
  double blur_sigma = 1.0;
  int max_size = 1024; // longer side is downscaled to this; 0 keeps the input size
};

// Every tunable of a registration run. Keys are dotted, e.g.
// `optim.tau_max = 100`.
struct RunConfig {
  Mode mode = Mode::Dcn;
  std::uint64_t seed = 0;
  PreprocConfig preproc;
  RansacConfig ransac;
  RadiusConfig radius;
  int n_nodes = 1000;
  int grid_n = 20;
  double init_radius = 0.0; // 0 = mode-dependent default
  std::optional<double> alpha_gcc; // unset = 0.4 for dcn, 0 for gcn
  OptimConfig optim;
  std::filesystem::path output_dir;

  // Applies `key = value`; throws ErrorKind::Usage naming the key.
  void set(const std::string &key, const std::string &value);
  // Reads `key = value` lines ('#' comments, blank lines allowed).
  void apply_text(const std::string &text, const std::string &origin);
  void apply_file(const std::filesystem::path &path);

  // Loss weights and seeds as the run will actually use them.
  OptimConfig resolved_optim() const;
  RansacConfig resolved_ransac() const;
  double resolved_alpha_gcc() const;

  void validate() const;
  // One `key = value` line per key, sorted, with resolved values.
  std::string echo() const;
  static std::vector<std::string> keys();
};

// FNV-1a over the echoed config.
std::uint64_t config_hash(const RunConfig &cfg);

} // namespace gpo
