#include "evidence3/image.hpp"

#include <algorithm>
#include <cmath>

namespace ev3 {

HsvPixel rgb_to_hsv(const Rgb& p) {
  double maxc = std::max({p.r, p.g, p.b});
  double minc = std::min({p.r, p.g, p.b});
  double delta = maxc - minc;

  HsvPixel out;
  out.v = maxc;
  out.s = (maxc > 0.0) ? delta / maxc : 0.0;
  if (delta <= 0.0) {
    out.h = 0.0;  // grayscale convention
    return out;
  }
  double h;
  if (maxc == p.r) {
    h = 60.0 * ((p.g - p.b) / delta);
  } else if (maxc == p.g) {
    h = 60.0 * ((p.b - p.r) / delta + 2.0);
  } else {
    h = 60.0 * ((p.r - p.g) / delta + 4.0);
  }
  if (h < 0.0) h += 360.0;
  if (h >= 360.0) h -= 360.0;
  out.h = h;
  return out;
}

Rgb hsv_to_rgb(const HsvPixel& p) {
  double h = p.h;
  double s = std::clamp(p.s, 0.0, 1.0);
  double v = std::clamp(p.v, 0.0, 1.0);
  if (s <= 0.0) return {v, v, v};

  double hp = h / 60.0;
  int sector = static_cast<int>(hp) % 6;
  double frac = hp - std::floor(hp);

  // hi/mid/lo formulation keeps the max channel equal to v bit-for-bit.
  double lo = v * (1.0 - s);
  double rising = v * (1.0 - s * (1.0 - frac));
  double falling = v * (1.0 - s * frac);

  switch (sector) {
    case 0: return {v, rising, lo};
    case 1: return {falling, v, lo};
    case 2: return {lo, v, rising};
    case 3: return {lo, falling, v};
    case 4: return {rising, lo, v};
    default: return {v, lo, falling};
  }
}

Plane luminance_plane(const Image& img) {
  Plane out(img.width, img.height);
  const double* src = img.data.data();
  std::size_t n = static_cast<std::size_t>(img.width) * img.height;
  for (std::size_t i = 0; i < n; ++i) {
    double y = 0.299 * src[3 * i] + 0.587 * src[3 * i + 1] + 0.114 * src[3 * i + 2];
    out.values[i] = std::clamp(y, 0.0, 1.0);
  }
  return out;
}

}  // namespace ev3
