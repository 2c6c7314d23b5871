#include "evidence3/perturb.hpp"

#include <algorithm>
#include <cmath>

#include "evidence3/rng.hpp"

namespace ev3 {

Image hue_shift(const Image& img, double delta_hue) {
  Image out(img.width, img.height);
  std::size_t n = static_cast<std::size_t>(img.width) * img.height;
  for (std::size_t i = 0; i < n; ++i) {
    const double* src = &img.data[3 * i];
    HsvPixel hsv = rgb_to_hsv({src[0], src[1], src[2]});
    double h = std::fmod(hsv.h + delta_hue, 360.0);
    if (h < 0.0) h += 360.0;
    if (h >= 360.0) h = 0.0;
    hsv.h = h;
    Rgb back = hsv_to_rgb(hsv);
    out.data[3 * i] = back.r;
    out.data[3 * i + 1] = back.g;
    out.data[3 * i + 2] = back.b;
  }
  return out;
}

Image illum_adjust(const Image& img, double gain) {
  Image out(img.width, img.height);
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    out.data[i] = std::clamp(gain * img.data[i], 0.0, 1.0);
  }
  return out;
}

Image noise_inject(const Image& img, double sigma, std::uint64_t seed) {
  if (sigma == 0.0) return img;
  Image out(img.width, img.height);
  Rng rng(seed);
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    out.data[i] = std::clamp(img.data[i] + sigma * rng.gaussian(), 0.0, 1.0);
  }
  return out;
}

PerturbationSpec sample_spec(const SamplerConfig& cfg, std::uint64_t rng_seed) {
  Rng rng(rng_seed);
  PerturbationSpec spec;
  if (rng.next_double() < cfg.p_clean) return spec;

  // Subsets use the bit encoding color=1, illum=2, noise=4; 1..7 nonempty.
  std::uint64_t subset = 1 + rng.next_below(7);
  spec.use_color = (subset & 1) != 0;
  spec.use_illum = (subset & 2) != 0;
  spec.use_noise = (subset & 4) != 0;

  if (spec.use_color) {
    double mag = rng.uniform(cfg.hue_range.first, cfg.hue_range.second);
    double sign = rng.next_bool() ? 1.0 : -1.0;
    spec.delta_hue = sign * mag;
    if (spec.delta_hue <= -180.0) spec.delta_hue = 180.0;  // fold onto (-180, 180]
  }
  if (spec.use_illum) {
    double g = rng.uniform(cfg.gain_range.first, cfg.gain_range.second);
    spec.gain = rng.next_bool() ? g : 1.0 / g;
  }
  if (spec.use_noise) {
    spec.sigma = rng.uniform(cfg.sigma_range.first, cfg.sigma_range.second);
  }
  spec.seed = rng.next_u64();
  return spec;
}

Image apply_perturbation(const Image& img, const PerturbationSpec& spec) {
  if (spec.empty()) return img;
  Image out = img;
  if (spec.use_color) out = hue_shift(out, spec.delta_hue);
  if (spec.use_illum) out = illum_adjust(out, spec.gain);
  if (spec.use_noise) out = noise_inject(out, spec.sigma, spec.seed);
  return out;
}

}  // namespace ev3
