#pragma once

#include "gpo/config.hpp"

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace gpo {

struct GridAxis {
  std::string key; // canonical config key
  std::vector<std::string> values;
};

// `key=v1,v2,...`; short aliases K, tau, N, grid_n are accepted.
GridAxis parse_grid_axis(const std::string &arg);

struct SweepRow {
  std::size_t cell = 0;
  std::uint64_t config_hash = 0;
  std::string overrides; // key=value;key=value
  double median_tre = 0.0; // median over pairs of the per-pair median TRE
  double mean_tre = 0.0;
  double wall_seconds = 0.0;
  std::vector<double> pair_median_tre;
  std::vector<double> pair_coarse_median_tre; // same pairs, zero field
};

// Sub-directories of `dir` holding a synth bundle (manifest.txt), sorted by name.
std::vector<std::filesystem::path> list_pair_bundles(const std::filesystem::path &dir);

using SweepProgress = std::function<void(const SweepRow &)>;

// Cartesian product over `axes` (first axis varies slowest), each cell run
// on every pair. Writes summary.csv plus cell_<i>/pairs.csv under out_dir.
std::vector<SweepRow> run_sweep(const RunConfig &base, const std::vector<GridAxis> &axes,
                                const std::filesystem::path &pairs_dir, const std::filesystem::path &out_dir,
                                const SweepProgress &progress = {});

} // namespace gpo
