#include "gpo/sweep.hpp"
#include "gpo/pipeline.hpp"
#include "gpo/text_table.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <map>
#include <numeric>
#include <sstream>

namespace gpo {

GridAxis parse_grid_axis(const std::string &arg) {
  static const std::map<std::string, std::string> aliases = {
      {"K", "optim.K"}, {"tau", "optim.tau_max"}, {"tau_max", "optim.tau_max"}, {"N", "nodes.n"},
      {"grid_n", "nodes.grid_n"}};
  const auto eq = arg.find('=');
  if (eq == std::string::npos) fail(ErrorKind::Usage, "grid axis '" + arg + "' must look like key=v1,v2");
  GridAxis axis;
  axis.key = trim(arg.substr(0, eq));
  if (const auto it = aliases.find(axis.key); it != aliases.end()) axis.key = it->second;
  const auto keys = RunConfig::keys();
  if (std::find(keys.begin(), keys.end(), axis.key) == keys.end())
    fail(ErrorKind::Usage, "unknown grid key '" + axis.key + "'");
  for (const auto &v : split(arg.substr(eq + 1), ','))
    if (!trim(v).empty()) axis.values.push_back(trim(v));
  if (axis.values.empty()) fail(ErrorKind::Usage, "grid axis '" + axis.key + "' has no values");
  return axis;
}

std::vector<std::filesystem::path> list_pair_bundles(const std::filesystem::path &dir) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) fail(ErrorKind::Usage, "pairs directory not found: " + dir.string());
  std::vector<std::filesystem::path> out;
  for (const auto &e : std::filesystem::directory_iterator(dir))
    if (e.is_directory() && std::filesystem::exists(e.path() / "manifest.txt")) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

std::filesystem::path pick_image(const std::filesystem::path &dir, const std::string &stem) {
  const auto dump = dir / (stem + ".gpoi");
  return std::filesystem::exists(dump) ? dump : dir / (stem + ".png");
}

} // namespace

std::vector<SweepRow> run_sweep(const RunConfig &base, const std::vector<GridAxis> &axes,
                                const std::filesystem::path &pairs_dir, const std::filesystem::path &out_dir,
                                const SweepProgress &progress) {
  if (axes.empty()) fail(ErrorKind::Usage, "sweep grid is empty");
  const auto pairs = list_pair_bundles(pairs_dir);
  if (pairs.empty()) fail(ErrorKind::Usage, "no pair bundles under " + pairs_dir.string());

  std::size_t cells = 1;
  for (const auto &a : axes) cells *= a.values.size();

  std::vector<SweepRow> rows;
  for (std::size_t cell = 0; cell < cells; ++cell) {
    RunConfig cfg = base;
    cfg.output_dir.clear();
    std::ostringstream ov;
    std::size_t rem = cell;
    std::vector<std::size_t> pick(axes.size());
    for (std::size_t a = axes.size(); a-- > 0;) {
      pick[a] = rem % axes[a].values.size();
      rem /= axes[a].values.size();
    }
    for (std::size_t a = 0; a < axes.size(); ++a) {
      cfg.set(axes[a].key, axes[a].values[pick[a]]);
      ov << (a ? ";" : "") << axes[a].key << '=' << axes[a].values[pick[a]];
    }
    cfg.validate();

    SweepRow row;
    row.cell = cell;
    row.config_hash = config_hash(cfg);
    row.overrides = ov.str();
    const auto t0 = std::chrono::steady_clock::now();
    std::ostringstream per_pair;
    per_pair << "pair,tre_coarse_median,tre_median,tre_mean\n";
    std::vector<double> means;
    for (const auto &dir : pairs) {
      PipelineInputs in{pick_image(dir, "fixed"), pick_image(dir, "moving"), std::nullopt, dir / "landmarks.csv"};
      if (cfg.mode == Mode::Dcn) in.matches = dir / "matches.csv";
      const PipelineResult r = run_pipeline(in, cfg);
      row.pair_median_tre.push_back(r.tre_final->median);
      row.pair_coarse_median_tre.push_back(r.tre_coarse->median);
      means.push_back(r.tre_final->mean);
      per_pair << dir.filename().string() << ',' << format_double(r.tre_coarse->median) << ','
               << format_double(r.tre_final->median) << ',' << format_double(r.tre_final->mean) << '\n';
    }
    row.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    row.median_tre = median_of(row.pair_median_tre);
    row.mean_tre = std::accumulate(means.begin(), means.end(), 0.0) / static_cast<double>(means.size());

    const auto cell_dir = out_dir / ("cell_" + std::to_string(cell));
    std::filesystem::create_directories(cell_dir);
    write_text_file(cell_dir / "pairs.csv", per_pair.str());
    write_text_file(cell_dir / "config.txt", cfg.echo());
    rows.push_back(std::move(row));
    if (progress) progress(rows.back());
  }

  std::ostringstream s;
  s << "cell,config_hash,overrides,median_tre,mean_tre,wall_seconds\n";
  for (const auto &r : rows) {
    char hash[17];
    std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(r.config_hash));
    s << r.cell << ',' << hash << ',' << r.overrides << ',' << format_double(r.median_tre) << ','
      << format_double(r.mean_tre) << ',' << format_double(r.wall_seconds) << '\n';
  }
  write_text_file(out_dir / "summary.csv", s.str());
  return rows;
}

} // namespace gpo
