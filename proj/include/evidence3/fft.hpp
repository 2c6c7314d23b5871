#pragma once

#include <complex>
#include <vector>

#include "evidence3/image.hpp"

namespace ev3::fft {

using Complex = std::complex<double>;

// In-place iterative radix-2 transform. Length must be a power of two.
void transform_pow2(std::vector<Complex>& a, bool inverse);

// DFT of arbitrary length. Power-of-two lengths use radix-2 directly;
// other lengths go through Bluestein's chirp-z reduction, which evaluates
// the exact DFT (zero-padding would not).
std::vector<Complex> dft(const std::vector<Complex>& x, bool inverse = false);

// Forward 2-D DFT of a real grid, computed row-column. Output is row-major
// height x width, unnormalized.
std::vector<Complex> dft2(const Plane& p);

}  // namespace ev3::fft
