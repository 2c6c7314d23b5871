#include "doctest.h"

#include <cmath>
#include <complex>
#include <vector>

#include "evidence3/fft.hpp"
#include "evidence3/image.hpp"
#include "evidence3/rng.hpp"

using namespace ev3;

namespace {

constexpr double kPi = 3.14159265358979323846;

// Definition-level 1-D transform, quadratic cost.
std::vector<fft::Complex> naive_dft(const std::vector<fft::Complex>& x) {
  const std::size_t n = x.size();
  std::vector<fft::Complex> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    fft::Complex acc(0.0, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      double ang = -2.0 * kPi * static_cast<double>(k * j) / static_cast<double>(n);
      acc += x[j] * fft::Complex(std::cos(ang), std::sin(ang));
    }
    out[k] = acc;
  }
  return out;
}

// Definition-level 2-D transform, quartic cost: row index u is the vertical
// frequency, column index v the horizontal one, matching dft2's layout.
std::vector<fft::Complex> naive_dft2(const Plane& p) {
  const int h = p.height;
  const int w = p.width;
  std::vector<fft::Complex> out(static_cast<std::size_t>(h) * w);
  for (int u = 0; u < h; ++u) {
    for (int v = 0; v < w; ++v) {
      fft::Complex acc(0.0, 0.0);
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          double ang = -2.0 * kPi *
                       (static_cast<double>(u) * y / h + static_cast<double>(v) * x / w);
          acc += fft::Complex(p.at(x, y), 0.0) *
                 fft::Complex(std::cos(ang), std::sin(ang));
        }
      }
      out[static_cast<std::size_t>(u) * w + v] = acc;
    }
  }
  return out;
}

Plane random_plane(int w, int h, std::uint64_t seed) {
  Plane p(w, h);
  Rng rng(seed);
  for (double& v : p.values) v = rng.next_double();
  return p;
}

double max_rel_error(const std::vector<fft::Complex>& got,
                     const std::vector<fft::Complex>& want) {
  REQUIRE(got.size() == want.size());
  double scale = 0.0;
  for (const auto& c : want) scale = std::max(scale, std::abs(c));
  double worst = 0.0;
  for (std::size_t i = 0; i < got.size(); ++i)
    worst = std::max(worst, std::abs(got[i] - want[i]));
  return scale > 0.0 ? worst / scale : worst;
}

}  // namespace

TEST_CASE("dft2 matches the definition-level oracle on an 8x8 grid") {
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    Plane p = random_plane(8, 8, seed);
    CHECK(max_rel_error(fft::dft2(p), naive_dft2(p)) <= 1e-9);
  }
}

TEST_CASE("dft2 matches the definition-level oracle on a 12x10 grid") {
  // 12 and 10 are not powers of two, so both axes use the chirp transform.
  for (std::uint64_t seed : {4ULL, 5ULL, 6ULL}) {
    Plane p = random_plane(12, 10, seed);
    CHECK(max_rel_error(fft::dft2(p), naive_dft2(p)) <= 1e-9);
  }
}

TEST_CASE("1-D transform matches the naive sum on prime and composite sizes") {
  Rng rng(99);
  for (std::size_t n : {1u, 2u, 3u, 5u, 7u, 12u, 16u, 31u}) {
    std::vector<fft::Complex> x(n);
    for (auto& c : x) c = fft::Complex(rng.next_double(), rng.next_double());
    CHECK(max_rel_error(fft::dft(x, false), naive_dft(x)) <= 1e-9);
  }
}

TEST_CASE("inverse transform undoes the forward transform") {
  Rng rng(123);
  for (std::size_t n : {4u, 8u, 10u, 13u}) {
    std::vector<fft::Complex> x(n);
    for (auto& c : x) c = fft::Complex(rng.next_double(), rng.next_double());
    std::vector<fft::Complex> back = fft::dft(fft::dft(x, false), true);
    CHECK(max_rel_error(back, x) <= 1e-9);
  }
}

TEST_CASE("transform energy obeys Parseval's identity") {
  Rng rng(55);
  std::vector<fft::Complex> x(16);
  for (auto& c : x) c = fft::Complex(rng.next_double(), rng.next_double());
  std::vector<fft::Complex> spec = x;
  fft::transform_pow2(spec, false);
  double time_energy = 0.0, freq_energy = 0.0;
  for (const auto& c : x) time_energy += std::norm(c);
  for (const auto& c : spec) freq_energy += std::norm(c);
  CHECK(freq_energy == doctest::Approx(time_energy * 16.0).epsilon(1e-12));
}

TEST_CASE("constant plane concentrates all spectral energy in the DC bin") {
  Plane p(8, 8);
  for (double& v : p.values) v = 0.37;
  std::vector<fft::Complex> spec = fft::dft2(p);
  CHECK(std::abs(spec[0]) == doctest::Approx(0.37 * 64.0).epsilon(1e-12));
  double rest = 0.0;
  for (std::size_t i = 1; i < spec.size(); ++i) rest += std::norm(spec[i]);
  CHECK(rest <= 1e-18);
}
