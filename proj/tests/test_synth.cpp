#include "gpo/synth.hpp"
#include "gpo/text_table.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace gpo;

namespace {

SynthConfig small(std::uint64_t seed) {
  SynthConfig c;
  c.seed = seed;
  c.size = 128;
  c.deform_max_px = 6.0;
  c.landmark_count = 20;
  c.match_count = 60;
  return c;
}

} // namespace

TEST_CASE("same seed gives bit-identical output, another seed does not") {
  const auto a = make_pair(small(3));
  const auto b = make_pair(small(3));
  CHECK(a.fixed == b.fixed);
  CHECK(a.moving == b.moving);
  CHECK(a.gt_field.u == b.gt_field.u);
  CHECK(a.gt_transform.matrix() == b.gt_transform.matrix());
  REQUIRE(a.landmarks.pairs.size() == b.landmarks.pairs.size());
  for (std::size_t i = 0; i < a.landmarks.pairs.size(); ++i) CHECK(a.landmarks.pairs[i].moving == b.landmarks.pairs[i].moving);
  CHECK_FALSE(make_pair(small(4)).fixed == a.fixed);
}

TEST_CASE("vessels cover a small fraction of the default image") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    SynthConfig c;
    c.seed = seed;
    const auto r = render_vessels(c);
    std::size_t dark = 0;
    for (std::size_t i = 0; i < r.image.size(); ++i) dark += r.background.pixels()[i] - r.image.pixels()[i] > 0.1;
    const double frac = static_cast<double>(dark) / static_cast<double>(r.image.size());
    CHECK(frac > 0.0);
    CHECK(frac < 0.15);
    CHECK(r.centerlines.size() == r.widths.size());
  }
}

TEST_CASE("without vessels the image is a smooth background") {
  SynthConfig c;
  c.n_vessels = 0;
  c.noise_amplitude = 0.0;
  const Image img = gen_vessel_image(c);
  double worst = 0.0;
  for (int y = 0; y + 1 < img.height(); ++y)
    for (int x = 0; x + 1 < img.width(); ++x)
      worst = std::max(worst, std::hypot(img.at(x + 1, y) - img.at(x, y), img.at(x, y + 1) - img.at(x, y)));
  CHECK(worst < 0.01);
  for (double v : img.pixels()) {
    CHECK(v >= 0.3);
    CHECK(v <= 0.7);
  }
}

TEST_CASE("deformation: zero amplitude, magnitude bound, reproducibility") {
  SynthConfig c;
  c.deform_max_px = 0.0;
  for (const auto &u : gen_deformation(c, 96).u) CHECK(u == Vec2{0, 0});

  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SynthConfig d;
    d.seed = seed;
    const auto f = gen_deformation(d, 128);
    const auto s = field_stats(f);
    CHECK(s.max_mag <= d.deform_max_px + 1e-9);
    CHECK(s.max_mag > 0.5);
    CHECK(gen_deformation(d, 128).u == f.u);
  }
}

TEST_CASE("no deformation, no jitter: moving equals fixed and landmarks coincide") {
  SynthConfig c = small(9);
  c.deform_max_px = 0.0;
  c.homography_jitter = 0.0;
  c.intensity_jitter = 0.0;
  const auto p = make_pair(c);
  CHECK(p.moving == p.fixed);
  const auto t = tre(p.landmarks, GlobalTransform::identity(), DisplacementField(128, 128));
  for (double d : t.distances) CHECK(d == 0.0);
}

TEST_CASE("warping moving by the ground truth reproduces fixed") {
  SynthConfig c = small(5);
  c.intensity_jitter = 0.0;
  c.deform_max_px = 10.0;
  const auto p = make_pair(c);
  double mad = 0.0;
  for (int y = 0; y < 128; ++y)
    for (int x = 0; x < 128; ++x) {
      const Vec2 q = p.gt_transform.apply(Vec2{double(x), double(y)} + p.gt_field.at(x, y));
      mad += std::abs(sample_value(p.moving, q) - p.fixed.at(x, y));
    }
  mad /= 128.0 * 128.0;
  CHECK(mad < 0.02);
}

TEST_CASE("landmarks follow the ground truth map and lie away from the border") {
  const auto p = make_pair(small(2));
  CHECK(p.landmarks.pairs.size() == 20);
  CHECK(p.matches.size() == 60);
  CHECK(p.matches.confidence.size() == 60);
  for (const auto &m : p.landmarks.pairs) {
    const Vec2 want = p.gt_transform.apply(m.fixed + p.gt_field.interpolate(m.fixed));
    CHECK(norm(m.moving - want) < 1e-12);
    CHECK(m.fixed.x >= 8.0);
    CHECK(m.fixed.x <= 120.0);
  }
  for (std::size_t i = 0; i < p.matches.size(); ++i) {
    const auto &m = p.matches.pairs[i];
    const Vec2 exact = p.gt_transform.apply(m.fixed + p.gt_field.interpolate(m.fixed));
    CHECK(norm(m.moving - exact) <= 2.0 + 1e-12);
    CHECK(p.matches.confidence[i] >= 0.5);
  }
}

TEST_CASE("an oversized deformation fails with a generation error") {
  SynthConfig c = small(1);
  c.size = 64;
  c.deform_nodes = 4;
  c.deform_max_px = 200.0;
  try {
    make_pair(c);
    FAIL("expected generation error");
  } catch (const Error &e) {
    CHECK(e.kind() == ErrorKind::Generation);
  }
}

TEST_CASE("configuration validation") {
  SynthConfig c;
  c.size = 32;
  CHECK_THROWS_AS(c.validate(), Error);
  c = {};
  c.homography_jitter = 0.05;
  CHECK_THROWS_AS(c.validate(), Error);
  c = {};
  c.match_count = 3;
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("bundle contents") {
  const auto dir = oracle::temp_dir("synth_bundle");
  const SynthConfig c = small(7);
  const auto p = make_pair(c);
  write_synth_bundle(p, c, dir / "a");
  write_synth_bundle(p, c, dir / "b");
  for (const char *f : {"fixed.png", "moving.png", "fixed.gpoi", "moving.gpoi", "landmarks.csv", "matches.csv",
                        "gt_field.gpof", "gt_transform.txt", "manifest.txt"}) {
    REQUIRE(std::filesystem::exists(dir / "a" / f));
    CHECK(read_text_file(dir / "a" / f) == read_text_file(dir / "b" / f));
  }
  CHECK(load_image_dump(dir / "a" / "moving.gpoi") == p.moving);
  CHECK(read_text_file(dir / "a" / "manifest.txt").find(format_synth_config(c)) != std::string::npos);
}
