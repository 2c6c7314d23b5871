#pragma once

#include <cstdint>
#include <utility>

#include "evidence3/image.hpp"

namespace ev3 {

// One sampled photometric attack: the active subset plus its parameters.
// An all-false subset is legal and denotes a clean sample.
struct PerturbationSpec {
  bool use_color = false;
  double delta_hue = 0.0;  // degrees in (-180, 180]
  bool use_illum = false;
  double gain = 1.0;  // > 0
  bool use_noise = false;
  double sigma = 0.0;  // channel units on the [0,1] scale
  std::uint64_t seed = 0;

  bool empty() const { return !use_color && !use_illum && !use_noise; }

  bool operator==(const PerturbationSpec&) const = default;
};

// Parameter ranges for random spec sampling. gain_range is the dark branch;
// the bright branch uses the reciprocal, so gains cover
// [lo, hi] U [1/hi, 1/lo] with the branch chosen uniformly.
struct SamplerConfig {
  std::pair<double, double> hue_range{30.0, 150.0};   // |delta_hue| degrees
  std::pair<double, double> gain_range{0.4, 0.8};     // dark-branch gain
  std::pair<double, double> sigma_range{0.02, 0.10};  // noise std
  double p_clean = 0.5;
};

// Rotates every pixel's hue by delta_hue degrees (mod 360).
// Saturation and value channels are untouched.
Image hue_shift(const Image& img, double delta_hue);

// Per-channel c <- clamp(gain * c, 0, 1).
Image illum_adjust(const Image& img, double gain);

// Adds i.i.d. Gaussian(0, sigma^2) per channel, clamped to [0, 1].
// The draw order is row-major by pixel, R then G then B, so identical
// (img, sigma, seed) inputs give bit-identical outputs.
Image noise_inject(const Image& img, double sigma, std::uint64_t seed);

// Draws a random spec: clean with probability p_clean, otherwise a subset
// chosen uniformly from the 7 nonempty subsets with parameters uniform in
// their configured ranges. Deterministic in rng_seed.
PerturbationSpec sample_spec(const SamplerConfig& cfg, std::uint64_t rng_seed);

// Applies the active transforms in fixed order: color, illumination, noise.
Image apply_perturbation(const Image& img, const PerturbationSpec& spec);

}  // namespace ev3
