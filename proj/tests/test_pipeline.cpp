#include "gpo/pipeline.hpp"
#include "gpo/sweep.hpp"
#include "gpo/synth.hpp"
#include "gpo/text_table.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <functional>

using namespace gpo;

namespace {

std::filesystem::path bundle(const std::filesystem::path &root, const std::string &name, SynthConfig c) {
  const auto dir = root / name;
  write_synth_bundle(make_pair(c), c, dir);
  return dir;
}

ErrorKind kind_of(const std::function<void()> &fn) {
  try {
    fn();
  } catch (const Error &e) {
    return e.kind();
  }
  return ErrorKind::Argument;
}

} // namespace

TEST_CASE("gcn on identical inputs writes every artifact and barely moves") {
  const auto root = oracle::temp_dir("pipe_identity");
  save_image_dump(oracle::smooth_image(96, 80), root / "img.gpoi");
  RunConfig cfg;
  cfg.set("mode", "gcn");
  cfg.set("optim.tau_max", "30");
  cfg.set("nodes.grid_n", "6");
  cfg.output_dir = root / "out";
  const auto r = run_pipeline({root / "img.gpoi", root / "img.gpoi", std::nullopt, std::nullopt}, cfg);
  CHECK(r.field.mean_mag < 0.5);
  CHECK(r.coarse.transform.kind() == TransformKind::Identity);
  for (const char *f : {"warped.png", "field.gpof", "loss_trace.csv", "overlay.png", "diff.png", "transform.txt",
                        "nodes.csv", "metadata.txt"})
    CHECK(std::filesystem::exists(root / "out" / f));
  CHECK_FALSE(std::filesystem::exists(root / "out" / "tre.csv"));
  const auto meta = read_text_file(root / "out" / "metadata.txt");
  CHECK(meta.find("mode = gcn") != std::string::npos);
  CHECK(read_table(root / "out" / "loss_trace.csv").rows.size() == 30);
}

TEST_CASE("dcn preconditions are usage errors raised before optimizing") {
  const auto root = oracle::temp_dir("pipe_usage");
  save_image_dump(oracle::smooth_image(64, 64), root / "img.gpoi");
  RunConfig cfg;
  cfg.output_dir = root / "out";
  CHECK(kind_of([&] { run_pipeline({root / "img.gpoi", root / "img.gpoi", std::nullopt, std::nullopt}, cfg); }) ==
        ErrorKind::Usage);
  MatchSet three;
  for (int i = 0; i < 3; ++i) three.pairs.push_back({{10.0 * i, 5.0 + i}, {10.0 * i, 5.0 + i}});
  write_matches(three, root / "m.csv");
  CHECK(kind_of([&] { run_pipeline({root / "img.gpoi", root / "img.gpoi", root / "m.csv", std::nullopt}, cfg); }) ==
        ErrorKind::Usage);
  CHECK_FALSE(std::filesystem::exists(root / "out"));
}

TEST_CASE("a default synthetic pair registers with a large TRE reduction") {
  const auto root = oracle::temp_dir("pipe_synth");
  SynthConfig c;
  c.seed = 1;
  const auto dir = bundle(root, "pair", c);
  RunConfig cfg;
  cfg.set("mode", "gcn");
  cfg.set("optim.tau_max", "200");
  cfg.output_dir = root / "out";
  const auto r =
      run_pipeline({dir / "fixed.gpoi", dir / "moving.gpoi", std::nullopt, dir / "landmarks.csv"}, cfg);
  REQUIRE(r.tre_coarse);
  REQUIRE(r.tre_final);
  MESSAGE("median TRE " << r.tre_coarse->median << " -> " << r.tre_final->median);
  CHECK(r.tre_final->median <= 0.3 * r.tre_coarse->median);
  CHECK(std::filesystem::exists(root / "out" / "tre.csv"));
}

TEST_CASE("dcn on a synthetic pair beats its own coarse fit") {
  const auto root = oracle::temp_dir("pipe_dcn");
  SynthConfig c;
  c.seed = 2;
  c.size = 128;
  c.deform_max_px = 6.0;
  const auto dir = bundle(root, "pair", c);
  RunConfig cfg;
  cfg.set("optim.tau_max", "60");
  const auto r =
      run_pipeline({dir / "fixed.gpoi", dir / "moving.gpoi", dir / "matches.csv", dir / "landmarks.csv"}, cfg);
  CHECK(r.coarse.transform.kind() == TransformKind::Homography);
  CHECK(r.tre_final->median < r.tre_coarse->median);
}

TEST_CASE("sweep over a 2x2 grid on three pairs") {
  const auto root = oracle::temp_dir("sweep");
  for (int i = 0; i < 3; ++i) {
    SynthConfig c;
    c.seed = 10 + i;
    c.size = 96;
    c.deform_max_px = 4.0;
    c.landmark_count = 10;
    c.match_count = 40;
    bundle(root / "pairs", "pair_" + std::to_string(i), c);
  }
  std::filesystem::create_directories(root / "pairs" / "not_a_pair");
  CHECK(list_pair_bundles(root / "pairs").size() == 3);

  RunConfig base;
  base.set("mode", "gcn");
  base.set("nodes.grid_n", "6");
  const std::vector<GridAxis> axes{parse_grid_axis("K=5,10"), parse_grid_axis("tau=10,20")};
  CHECK(axes[0].key == "optim.K");
  CHECK(axes[1].key == "optim.tau_max");
  int progress = 0;
  const auto rows = run_sweep(base, axes, root / "pairs", root / "out", [&](const SweepRow &) { ++progress; });
  REQUIRE(rows.size() == 4);
  CHECK(progress == 4);
  std::size_t registrations = 0;
  for (const auto &r : rows) registrations += r.pair_median_tre.size();
  CHECK(registrations == 12);
  CHECK(rows[1].overrides == "optim.K=5;optim.tau_max=20");
  CHECK(rows[2].overrides == "optim.K=10;optim.tau_max=10");
  const auto lines = split(read_text_file(root / "out" / "cell_3" / "pairs.csv"), '\n');
  REQUIRE(lines.size() == 5);
  CHECK(lines[0] == "pair,tre_coarse_median,tre_median,tre_mean");
  for (std::size_t i = 1; i < 4; ++i) CHECK(split(lines[i], ',').size() == 4);
  CHECK(split(lines[1], ',')[0] == "pair_0");
  CHECK(lines[4].empty());

  const auto again = run_sweep(base, axes, root / "pairs", root / "out2");
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(again[i].config_hash == rows[i].config_hash);
    CHECK(again[i].pair_median_tre == rows[i].pair_median_tre);
  }

  CHECK(kind_of([&] { run_sweep(base, {}, root / "pairs", root / "out3"); }) == ErrorKind::Usage);
  CHECK(kind_of([&] { parse_grid_axis("K"); }) == ErrorKind::Usage);
  CHECK(kind_of([&] { parse_grid_axis("bogus=1,2"); }) == ErrorKind::Usage);
}
