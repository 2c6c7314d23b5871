#pragma once

#include <filesystem>

#include "evidence3/image.hpp"

namespace ev3 {

// Reads an 8-bit RGB image from a PNG or binary PPM (P6) file, dispatching
// on the (case-insensitive) file extension. PNG inputs in other layouts
// (grayscale, palette, alpha, 16-bit) are normalized to 8-bit RGB while
// decoding. Samples are scaled to [0,1] as value / 255.
// Throws IoError on unreadable or undecodable files and ValidationError on
// an unsupported extension.
Image load_image(const std::filesystem::path& path);

// Writes an image as 8-bit RGB, dispatching on extension like load_image.
// Samples are quantized as floor(clamp(v,0,1) * 255 + 0.5); the write is
// atomic (temp file + rename). PNG is the default output format elsewhere;
// PPM exists for dependency-free fixtures.
void save_image(const std::filesystem::path& path, const Image& image);

// Quantization helper shared by both encoders (and their tests).
unsigned char quantize_u8(double v);

}  // namespace ev3
