#include "evidence3/fft.hpp"

#include <cmath>
#include <cstdint>

namespace ev3::fft {

namespace {

constexpr double kPi = 3.14159265358979323846;

bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace

void transform_pow2(std::vector<Complex>& a, bool inverse) {
  const std::size_t n = a.size();
  if (n <= 1) return;

  // bit-reversal permutation
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }

  for (std::size_t len = 2; len <= n; len <<= 1) {
    double ang = 2.0 * kPi / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
    Complex wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      Complex w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        Complex u = a[i + k];
        Complex v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }

  if (inverse) {
    double inv = 1.0 / static_cast<double>(n);
    for (auto& x : a) x *= inv;
  }
}

std::vector<Complex> dft(const std::vector<Complex>& x, bool inverse) {
  const std::size_t n = x.size();
  if (n == 0) return {};
  if (is_pow2(n)) {
    std::vector<Complex> a = x;
    transform_pow2(a, inverse);
    return a;
  }

  // Bluestein: X_k = conj(w_k) * (a (*) b)_k with a_n = x_n conj(w_n),
  // b_n = w_n, w_n = exp(i pi n^2 / N). The chirp exponent is reduced
  // mod 2N before the float multiply to keep the angle accurate.
  const std::size_t m = next_pow2(2 * n - 1);
  const double sign = inverse ? 1.0 : -1.0;

  std::vector<Complex> w(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::uint64_t sq = (static_cast<std::uint64_t>(k) * k) % (2 * n);
    double ang = sign * kPi * static_cast<double>(sq) / static_cast<double>(n);
    w[k] = Complex(std::cos(ang), std::sin(ang));
  }

  std::vector<Complex> a(m, Complex(0.0, 0.0));
  std::vector<Complex> b(m, Complex(0.0, 0.0));
  for (std::size_t k = 0; k < n; ++k) a[k] = x[k] * w[k];
  b[0] = Complex(1.0, 0.0);
  for (std::size_t k = 1; k < n; ++k) b[k] = b[m - k] = std::conj(w[k]);

  transform_pow2(a, false);
  transform_pow2(b, false);
  for (std::size_t k = 0; k < m; ++k) a[k] *= b[k];
  transform_pow2(a, true);

  std::vector<Complex> out(n);
  for (std::size_t k = 0; k < n; ++k) out[k] = a[k] * w[k];
  if (inverse) {
    double invn = 1.0 / static_cast<double>(n);
    for (auto& v : out) v *= invn;
  }
  return out;
}

std::vector<Complex> dft2(const Plane& p) {
  const int h = p.height;
  const int w = p.width;
  std::vector<Complex> grid(static_cast<std::size_t>(h) * w);
  for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = Complex(p.values[i], 0.0);

  std::vector<Complex> row(w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) row[x] = grid[static_cast<std::size_t>(y) * w + x];
    std::vector<Complex> tr = dft(row, false);
    for (int x = 0; x < w; ++x) grid[static_cast<std::size_t>(y) * w + x] = tr[x];
  }

  std::vector<Complex> col(h);
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) col[y] = grid[static_cast<std::size_t>(y) * w + x];
    std::vector<Complex> tc = dft(col, false);
    for (int y = 0; y < h; ++y) grid[static_cast<std::size_t>(y) * w + x] = tc[y];
  }
  return grid;
}

}  // namespace ev3::fft
