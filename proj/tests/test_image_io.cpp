#include "doctest.h"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "evidence3/errors.hpp"
#include "evidence3/image.hpp"
#include "evidence3/image_io.hpp"
#include "evidence3/rng.hpp"

using namespace ev3;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const char* name) {
  return fs::temp_directory_path() / name;
}

Image random_image(int w, int h, std::uint64_t seed) {
  Image img(w, h);
  Rng rng(seed);
  for (double& v : img.data) v = rng.next_double();
  return img;
}

double quantized(double v) {
  double clamped = std::min(1.0, std::max(0.0, v));
  return std::floor(clamped * 255.0 + 0.5) / 255.0;
}

// Writes an 8-bit grayscale PNG so the loader's channel expansion runs.
void write_gray_png(const fs::path& path, int w, int h, unsigned char value) {
  FILE* f = std::fopen(path.string().c_str(), "wb");
  REQUIRE(f != nullptr);
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  REQUIRE(png != nullptr);
  png_infop info = png_create_info_struct(png);
  REQUIRE(info != nullptr);
  REQUIRE(setjmp(png_jmpbuf(png)) == 0);
  png_init_io(png, f);
  png_set_IHDR(png, info, w, h, 8, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<unsigned char> row(static_cast<std::size_t>(w), value);
  for (int y = 0; y < h; ++y) png_write_row(png, row.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(f);
}

}  // namespace

TEST_CASE("png save/load round-trips to the 8-bit quantization grid") {
  Image img = random_image(20, 14, 5);
  const fs::path path = temp_file("ev3_roundtrip.png");
  save_image(path, img);
  Image back = load_image(path);
  fs::remove(path);

  REQUIRE(back.width == img.width);
  REQUIRE(back.height == img.height);
  for (std::size_t i = 0; i < img.data.size(); ++i)
    CHECK(back.data[i] == doctest::Approx(quantized(img.data[i])).epsilon(1e-12));
}

TEST_CASE("ppm save/load round-trips to the 8-bit quantization grid") {
  Image img = random_image(9, 7, 6);
  const fs::path path = temp_file("ev3_roundtrip.ppm");
  save_image(path, img);
  Image back = load_image(path);
  fs::remove(path);

  REQUIRE(back.width == img.width);
  REQUIRE(back.height == img.height);
  for (std::size_t i = 0; i < img.data.size(); ++i)
    CHECK(back.data[i] == doctest::Approx(quantized(img.data[i])).epsilon(1e-12));
}

TEST_CASE("a second save of the same image is byte-identical") {
  Image img = random_image(12, 12, 7);
  const fs::path a = temp_file("ev3_bytes_a.png");
  const fs::path b = temp_file("ev3_bytes_b.png");
  save_image(a, img);
  save_image(b, img);
  std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
  std::string ba((std::istreambuf_iterator<char>(fa)),
                 std::istreambuf_iterator<char>());
  std::string bb((std::istreambuf_iterator<char>(fb)),
                 std::istreambuf_iterator<char>());
  fs::remove(a);
  fs::remove(b);
  CHECK(ba == bb);
  CHECK_FALSE(ba.empty());
}

TEST_CASE("grayscale pngs are expanded to three equal channels") {
  const fs::path path = temp_file("ev3_gray.png");
  write_gray_png(path, 6, 4, 200);
  Image img = load_image(path);
  fs::remove(path);
  REQUIRE(img.width == 6);
  REQUIRE(img.height == 4);
  const double want = 200.0 / 255.0;
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      Rgb px = img.pixel(x, y);
      CHECK(px.r == doctest::Approx(want).epsilon(1e-12));
      CHECK(px.g == doctest::Approx(want).epsilon(1e-12));
      CHECK(px.b == doctest::Approx(want).epsilon(1e-12));
    }
  }
}

TEST_CASE("loading a missing file raises an io error") {
  CHECK_THROWS_AS(load_image("/nonexistent/dir/missing.png"), IoError);
  CHECK_THROWS_AS(load_image("/nonexistent/dir/missing.ppm"), IoError);
}

TEST_CASE("loading corrupt bytes raises an io error") {
  const fs::path png_path = temp_file("ev3_corrupt.png");
  {
    std::ofstream out(png_path, std::ios::binary);
    out << "this is not a png";
  }
  CHECK_THROWS_AS(load_image(png_path), IoError);
  fs::remove(png_path);

  const fs::path ppm_path = temp_file("ev3_corrupt.ppm");
  {
    std::ofstream out(ppm_path, std::ios::binary);
    out << "P6\n3 3\n255\nxx";  // truncated raster
  }
  CHECK_THROWS_AS(load_image(ppm_path), IoError);
  fs::remove(ppm_path);
}

TEST_CASE("unsupported extensions are rejected before any file io") {
  Image img = Image::filled(2, 2, {0.5, 0.5, 0.5});
  CHECK_THROWS_AS(save_image("/tmp/ev3_img.jpeg", img), ValidationError);
  CHECK_THROWS_AS(load_image("/tmp/ev3_img.bmp"), ValidationError);
}

TEST_CASE("ppm headers tolerate comments and reject bad maxval") {
  const fs::path path = temp_file("ev3_comment.ppm");
  {
    std::ofstream out(path, std::ios::binary);
    out << "P6\n# a comment line\n2 1\n255\n";
    const unsigned char raster[6] = {255, 0, 0, 0, 255, 0};
    out.write(reinterpret_cast<const char*>(raster), 6);
  }
  Image img = load_image(path);
  fs::remove(path);
  REQUIRE(img.width == 2);
  REQUIRE(img.height == 1);
  CHECK(img.pixel(0, 0).r == doctest::Approx(1.0));
  CHECK(img.pixel(1, 0).g == doctest::Approx(1.0));

  const fs::path bad = temp_file("ev3_maxval.ppm");
  {
    std::ofstream out(bad, std::ios::binary);
    out << "P6\n2 1\n65535\n";
    for (int i = 0; i < 12; ++i) out.put('\0');
  }
  CHECK_THROWS_AS(load_image(bad), IoError);
  fs::remove(bad);
}
