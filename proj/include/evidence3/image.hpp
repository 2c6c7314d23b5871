#pragma once

#include <vector>

namespace ev3 {

struct Rgb {
  double r = 0.0;
  double g = 0.0;
  double b = 0.0;
};

// Hue in degrees [0, 360); saturation and value in [0, 1].
// Grayscale pixels (zero saturation) carry h = 0 by convention.
struct HsvPixel {
  double h = 0.0;
  double s = 0.0;
  double v = 0.0;
};

// Interleaved RGB raster, row-major, each channel a real in [0, 1].
// 8-bit files are divided by 255 on load and re-quantized only on save,
// so all in-memory math is exact.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<double> data;  // width * height * 3

  Image() = default;
  Image(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3, 0.0) {}

  static Image filled(int w, int h, Rgb c) {
    Image img(w, h);
    for (std::size_t i = 0; i + 2 < img.data.size(); i += 3) {
      img.data[i] = c.r;
      img.data[i + 1] = c.g;
      img.data[i + 2] = c.b;
    }
    return img;
  }

  std::size_t pixel_index(int x, int y) const {
    return (static_cast<std::size_t>(y) * width + x) * 3;
  }

  Rgb pixel(int x, int y) const {
    std::size_t i = pixel_index(x, y);
    return {data[i], data[i + 1], data[i + 2]};
  }

  void set_pixel(int x, int y, Rgb c) {
    std::size_t i = pixel_index(x, y);
    data[i] = c.r;
    data[i + 1] = c.g;
    data[i + 2] = c.b;
  }

  bool shape_valid() const {
    return width > 0 && height > 0 &&
           data.size() == static_cast<std::size_t>(width) * height * 3;
  }
};

// Single-channel row-major grid with image extent.
struct Plane {
  int width = 0;
  int height = 0;
  std::vector<double> values;

  Plane() = default;
  Plane(int w, int h) : width(w), height(h), values(static_cast<std::size_t>(w) * h, 0.0) {}

  double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
  double& at(int x, int y) { return values[static_cast<std::size_t>(y) * width + x]; }
};

// Hexcone conversion. Channels are assumed pre-clamped to [0, 1].
HsvPixel rgb_to_hsv(const Rgb& p);

// Inverse hexcone conversion. The value channel round-trips bit-exactly:
// the maximal output channel is assigned v directly.
Rgb hsv_to_rgb(const HsvPixel& p);

// Per-pixel BT.601 luma: Y = 0.299 R + 0.587 G + 0.114 B, clamped to [0, 1].
Plane luminance_plane(const Image& img);

}  // namespace ev3
