#pragma once

#include <cmath>
#include <cstdint>

namespace ev3 {

// splitmix64 step (Vigna). Advances the state and returns the next output.
// Used as both the seed mixer and the core stream so every draw in the
// toolkit is reproducible bit-for-bit, independent of the standard
// library's distribution internals.
inline std::uint64_t splitmix64_next(std::uint64_t& state) noexcept {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Deterministic per-item seed derivation: seed_i = mix64(global_seed, i).
// Parallel per-record work seeded this way equals the serial result.
inline std::uint64_t mix64(std::uint64_t a, std::uint64_t b) noexcept {
  std::uint64_t s = a;
  std::uint64_t x = splitmix64_next(s);
  s ^= x + b * 0x9e3779b97f4a7c15ULL;
  return splitmix64_next(s);
}

// Small deterministic generator over the splitmix64 stream.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) noexcept : state_(seed) {}

  std::uint64_t next_u64() noexcept { return splitmix64_next(state_); }

  // Uniform in [0, 1), 53 mantissa bits.
  double next_double() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) noexcept {
    return lo + (hi - lo) * next_double();
  }

  // Uniform in {0, ..., n-1}. Modulo bias is < 2^-57 for the small n used here.
  std::uint64_t next_below(std::uint64_t n) noexcept { return next_u64() % n; }

  bool next_bool() noexcept { return (next_u64() & 1ULL) != 0; }

  // Standard normal via Box-Muller; the second variate of each pair is cached.
  double gaussian() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    // u1 in (0, 1] so log() is finite.
    double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    double u2 = next_double();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace ev3
