#include "gpo/image.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <fstream>

using gpo::Image;

TEST_CASE("GPOI dump round-trips exactly") {
  const auto dir = oracle::temp_dir("gpoi");
  const Image img = oracle::random_image(17, 5, 2);
  gpo::save_image_dump(img, dir / "a.gpoi");
  CHECK(gpo::load_image_dump(dir / "a.gpoi") == img);
  CHECK(gpo::load_image(dir / "a.gpoi") == img);
}

TEST_CASE("PNG round trip is exact to 8-bit quantisation") {
  const auto dir = oracle::temp_dir("png");
  const Image img = oracle::random_image(11, 7, 4);
  gpo::save_png(img, dir / "a.png");
  const Image back = gpo::load_image(dir / "a.png");
  REQUIRE(back.width() == 11);
  REQUIRE(back.height() == 7);
  for (std::size_t i = 0; i < img.size(); ++i)
    CHECK(back.pixels()[i] == doctest::Approx(std::round(img.pixels()[i] * 255.0) / 255.0).epsilon(1e-12));
}

TEST_CASE("RGB PNG loads as luma") {
  const auto dir = oracle::temp_dir("rgb");
  const Image r = Image::filled(3, 2, 1.0), z = Image::filled(3, 2, 0.0);
  gpo::save_png_rgb(r, z, z, dir / "red.png");
  const Image l = gpo::load_image(dir / "red.png");
  CHECK(l.at(0, 0) == doctest::Approx(0.299));
  gpo::save_png_rgb(z, r, z, dir / "green.png");
  CHECK(gpo::load_image(dir / "green.png").at(2, 1) == doctest::Approx(0.587));
}

TEST_CASE("binary PGM and PPM load") {
  const auto dir = oracle::temp_dir("pnm");
  {
    std::ofstream f(dir / "a.pgm", std::ios::binary);
    f << "P5\n# comment\n3 1\n255\n";
    f.put(0).put(static_cast<char>(128)).put(static_cast<char>(255));
  }
  const Image g = gpo::load_image(dir / "a.pgm");
  CHECK(g.width() == 3);
  CHECK(g.at(1, 0) == doctest::Approx(128.0 / 255.0));
  {
    std::ofstream f(dir / "b.ppm", std::ios::binary);
    f << "P6 1 1 65535\n";
    for (int i = 0; i < 3; ++i) f.put(static_cast<char>(0xff)).put(static_cast<char>(0xff));
  }
  CHECK(gpo::load_image(dir / "b.ppm").at(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("unreadable or unknown files are reported") {
  const auto dir = oracle::temp_dir("bad");
  CHECK_THROWS_AS(gpo::load_image(dir / "missing.png"), gpo::Error);
  {
    std::ofstream f(dir / "junk.bin", std::ios::binary);
    f << "not an image";
  }
  try {
    gpo::load_image(dir / "junk.bin");
    FAIL("expected an error");
  } catch (const gpo::Error &e) {
    CHECK(e.kind() == gpo::ErrorKind::Format);
  }
  {
    std::ofstream f(dir / "short.gpoi", std::ios::binary);
    f << "GPOI";
    f.put(1);
  }
  CHECK_THROWS_AS(gpo::load_image(dir / "short.gpoi"), gpo::Error);
}
