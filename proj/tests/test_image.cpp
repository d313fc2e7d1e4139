#include "gpo/image.hpp"
#include "oracles.hpp"

#include <doctest.h>

using gpo::Image;

TEST_CASE("image construction validates shape and range") {
  CHECK_THROWS_AS(Image(0, 3, {}), gpo::Error);
  CHECK_THROWS_AS(Image(2, 2, std::vector<double>(3, 0.5)), gpo::Error);
  CHECK_THROWS_AS(Image(1, 1, {1.5}), gpo::Error);
  CHECK_THROWS_AS(Image(1, 1, {-0.1}), gpo::Error);
  CHECK_THROWS_AS(Image(1, 1, {std::nan("")}), gpo::Error);
  const Image ok(2, 1, {0.0, 1.0});
  CHECK(ok.width() == 2);
  CHECK(ok.at(1, 0) == 1.0);
  CHECK(Image::filled(3, 2, 0.25).pixels()[5] == 0.25);
}

TEST_CASE("bilinear sampling matches the textbook formula inside the image") {
  const Image img = oracle::random_image(9, 7, 3);
  for (double y = 0.0; y <= 6.0; y += 0.37)
    for (double x = 0.0; x <= 8.0; x += 0.41) CHECK(gpo::sample_value(img, {x, y}) == doctest::Approx(oracle::bilinear(img, x, y)).epsilon(1e-14));
}

TEST_CASE("bilinear gradient equals finite differences off the lattice lines") {
  const Image img = oracle::random_image(9, 7, 5);
  for (double y = 0.3; y < 5.9; y += 0.77)
    for (double x = 0.2; x < 7.9; x += 0.63) {
      const auto s = gpo::sample_bilinear(img, {x, y});
      const double fx = oracle::central_diff([&](double v) { return gpo::sample_value(img, {v, y}); }, x, 1e-6);
      const double fy = oracle::central_diff([&](double v) { return gpo::sample_value(img, {x, v}); }, y, 1e-6);
      CHECK(s.gx == doctest::Approx(fx).epsilon(1e-7));
      CHECK(s.gy == doctest::Approx(fy).epsilon(1e-7));
    }
}

TEST_CASE("lattice lines use the floor cell and the last row/column uses the final cell") {
  const Image img(4, 1, {0.0, 0.1, 0.5, 0.6});
  auto s = gpo::sample_bilinear(img, {2.0, 0.0});
  CHECK(s.value == doctest::Approx(0.5));
  CHECK(s.gx == doctest::Approx(0.1));
  s = gpo::sample_bilinear(img, {3.0, 0.0});
  CHECK(s.value == doctest::Approx(0.6));
  CHECK(s.gx == doctest::Approx(0.1));
  s = gpo::sample_bilinear(img, {1.0, 0.0});
  CHECK(s.gx == doctest::Approx(0.4));
}

TEST_CASE("clamped axes report zero gradient") {
  const Image img = oracle::random_image(5, 5, 1);
  auto s = gpo::sample_bilinear(img, {-2.0, 1.5});
  CHECK(s.gx == 0.0);
  CHECK(s.value == doctest::Approx(gpo::sample_value(img, {0.0, 1.5})));
  s = gpo::sample_bilinear(img, {2.5, 9.0});
  CHECK(s.gy == 0.0);
  CHECK(s.gx != 0.0);
}

TEST_CASE("gaussian kernel is normalised, symmetric and 2*ceil(3 sigma)+1 long") {
  for (double sigma : {0.5, 1.0, 2.0, 3.3}) {
    const auto k = gpo::gaussian_kernel(sigma);
    CHECK(k.size() == 2 * static_cast<std::size_t>(std::ceil(3 * sigma)) + 1);
    double sum = 0;
    for (double v : k) sum += v;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-14));
    for (std::size_t i = 0; i < k.size(); ++i) CHECK(k[i] == doctest::Approx(k[k.size() - 1 - i]));
    const double r = static_cast<double>(k.size() / 2);
    CHECK(k[0] / k[k.size() / 2] == doctest::Approx(std::exp(-r * r / (2 * sigma * sigma))));
  }
}

TEST_CASE("blurring an impulse gives the separable kernel product") {
  std::vector<double> px(21 * 21, 0.0);
  px[10 * 21 + 10] = 1.0;
  const Image out = gpo::gaussian_blur(Image(21, 21, px), 1.5);
  const auto k = gpo::gaussian_kernel(1.5);
  const int r = static_cast<int>(k.size() / 2);
  for (int dy = -r; dy <= r; ++dy)
    for (int dx = -r; dx <= r; ++dx) CHECK(out.at(10 + dx, 10 + dy) == doctest::Approx(k[dx + r] * k[dy + r]).epsilon(1e-12));
}

TEST_CASE("blur keeps constants and sigma 0 is the identity") {
  const Image c = Image::filled(13, 8, 0.37);
  const Image b = gpo::gaussian_blur(c, 2.0);
  for (double v : b.pixels()) CHECK(v == doctest::Approx(0.37).epsilon(1e-14));
  const Image img = oracle::random_image(6, 6, 9);
  CHECK(gpo::gaussian_blur(img, 0.0) == img);
}

TEST_CASE("resize uses half-pixel alignment") {
  std::vector<double> px(8);
  for (int i = 0; i < 8; ++i) px[i] = i / 10.0;
  const Image ramp(8, 1, px);
  const Image half = gpo::resize_bilinear(ramp, 4, 1);
  // dst i samples src (i + 0.5) * 2 - 0.5 = 2i + 0.5
  for (int i = 0; i < 4; ++i) CHECK(half.at(i, 0) == doctest::Approx((2 * i + 0.5) / 10.0));
  CHECK(gpo::resize_bilinear(ramp, 8, 1) == ramp);
  const Image c = gpo::resize_bilinear(Image::filled(10, 6, 0.2), 17, 3);
  for (double v : c.pixels()) CHECK(v == doctest::Approx(0.2));
}
