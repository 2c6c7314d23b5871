#include "doctest.h"

#include <cmath>

#include "evidence3/image.hpp"
#include "evidence3/rng.hpp"

using namespace ev3;

namespace {

double max_channel_error(const Rgb& a, const Rgb& b) {
  return std::max({std::fabs(a.r - b.r), std::fabs(a.g - b.g),
                   std::fabs(a.b - b.b)});
}

}  // namespace

TEST_CASE("rgb_to_hsv matches a hand-computed reference point") {
  HsvPixel hsv = rgb_to_hsv({0.5, 0.25, 0.125});
  CHECK(hsv.h == doctest::Approx(20.0).epsilon(1e-12));
  CHECK(hsv.s == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(hsv.v == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("primary and secondary colors land on the expected hue spokes") {
  CHECK(rgb_to_hsv({1.0, 0.0, 0.0}).h == doctest::Approx(0.0));
  CHECK(rgb_to_hsv({1.0, 1.0, 0.0}).h == doctest::Approx(60.0));
  CHECK(rgb_to_hsv({0.0, 1.0, 0.0}).h == doctest::Approx(120.0));
  CHECK(rgb_to_hsv({0.0, 1.0, 1.0}).h == doctest::Approx(180.0));
  CHECK(rgb_to_hsv({0.0, 0.0, 1.0}).h == doctest::Approx(240.0));
  CHECK(rgb_to_hsv({1.0, 0.0, 1.0}).h == doctest::Approx(300.0));
}

TEST_CASE("gray pixels have zero saturation and hue pinned to zero") {
  for (double v : {0.0, 0.25, 1.0}) {
    HsvPixel hsv = rgb_to_hsv({v, v, v});
    CHECK(hsv.h == 0.0);
    CHECK(hsv.s == 0.0);
    CHECK(hsv.v == doctest::Approx(v));
  }
}

TEST_CASE("hue output always lies in [0, 360)") {
  Rng rng(2024);
  for (int i = 0; i < 1000; ++i) {
    HsvPixel hsv =
        rgb_to_hsv({rng.next_double(), rng.next_double(), rng.next_double()});
    CHECK(hsv.h >= 0.0);
    CHECK(hsv.h < 360.0);
    CHECK(hsv.s >= 0.0);
    CHECK(hsv.s <= 1.0);
  }
}

TEST_CASE("rgb -> hsv -> rgb round-trips within 1e-6 on random pixels") {
  Rng rng(7);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    Rgb in{rng.next_double(), rng.next_double(), rng.next_double()};
    Rgb out = hsv_to_rgb(rgb_to_hsv(in));
    worst = std::max(worst, max_channel_error(in, out));
  }
  CHECK(worst <= 1e-6);
}

TEST_CASE("hsv_to_rgb treats hue 360 like hue 0") {
  const HsvPixel at0{0.0, 0.6, 0.8};
  const HsvPixel at360{360.0, 0.6, 0.8};
  CHECK(max_channel_error(hsv_to_rgb(at0), hsv_to_rgb(at360)) <= 1e-9);
}

TEST_CASE("luminance_plane applies the standard luma weights") {
  Image img(2, 1);
  img.set_pixel(0, 0, {1.0, 0.0, 0.0});
  img.set_pixel(1, 0, {0.25, 0.5, 0.75});
  Plane lum = luminance_plane(img);
  CHECK(lum.at(0, 0) == doctest::Approx(0.299).epsilon(1e-12));
  CHECK(lum.at(1, 0) ==
        doctest::Approx(0.299 * 0.25 + 0.587 * 0.5 + 0.114 * 0.75)
            .epsilon(1e-12));
}

TEST_CASE("image accessors read and write the expected locations") {
  Image img(3, 2);
  img.set_pixel(2, 1, {0.1, 0.2, 0.3});
  Rgb px = img.pixel(2, 1);
  CHECK(px.r == 0.1);
  CHECK(px.g == 0.2);
  CHECK(px.b == 0.3);
  CHECK(img.pixel_index(2, 1) == (static_cast<std::size_t>(1) * 3 + 2) * 3);
  CHECK(img.shape_valid());

  Image filled = Image::filled(4, 4, {0.5, 0.5, 0.5});
  CHECK(filled.data.size() == 4u * 4u * 3u);
  CHECK(filled.pixel(3, 3).g == 0.5);
}
