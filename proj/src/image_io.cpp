#include "evidence3/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <csetjmp>
#include <cstring>
#include <sstream>
#include <string>
#include <vector>

#include "evidence3/errors.hpp"
#include "evidence3/io_util.hpp"

namespace ev3 {

namespace {

std::string lower_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return ext;
}

// ---------------------------------------------------------------------------
// PNG via libpng, decoding from / encoding to in-memory buffers so the final
// file write can go through the shared atomic write-then-rename path.
// ---------------------------------------------------------------------------

struct PngReadCursor {
  const unsigned char* data;
  std::size_t size;
  std::size_t pos;
};

void png_read_callback(png_structp png, png_bytep out, png_size_t count) {
  auto* cursor = static_cast<PngReadCursor*>(png_get_io_ptr(png));
  if (cursor->pos + count > cursor->size)
    png_error(png, "unexpected end of PNG stream");
  std::memcpy(out, cursor->data + cursor->pos, count);
  cursor->pos += count;
}

void png_write_callback(png_structp png, png_bytep data, png_size_t count) {
  auto* sink = static_cast<std::string*>(png_get_io_ptr(png));
  sink->append(reinterpret_cast<const char*>(data), count);
}

void png_flush_callback(png_structp) {}

Image decode_png(const std::string& bytes, const std::string& path_label) {
  if (bytes.size() < 8 ||
      png_sig_cmp(reinterpret_cast<png_const_bytep>(bytes.data()), 0, 8) != 0)
    throw IoError("not a PNG file: " + path_label);

  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("PNG decoder initialization failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("PNG decoder initialization failed");
  }

  PngReadCursor cursor{reinterpret_cast<const unsigned char*>(bytes.data()),
                       bytes.size(), 0};
  std::vector<unsigned char> pixels;
  std::vector<png_bytep> rows;

  // libpng reports decode errors via longjmp back to this point.
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("PNG decode failed: " + path_label);
  }

  png_set_read_fn(png, &cursor, png_read_callback);
  png_read_info(png, info);

  const png_uint_32 width = png_get_image_width(png, info);
  const png_uint_32 height = png_get_image_height(png, info);
  const int bit_depth = png_get_bit_depth(png, info);
  const int color_type = png_get_color_type(png, info);

  // Normalize every input layout to 8-bit RGB.
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8)
    png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (bit_depth == 16) png_set_strip_16(png);
  if (color_type == PNG_COLOR_TYPE_GRAY ||
      color_type == PNG_COLOR_TYPE_GRAY_ALPHA)
    png_set_gray_to_rgb(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);

  if (png_get_channels(png, info) != 3 || png_get_bit_depth(png, info) != 8) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("PNG could not be normalized to 8-bit RGB: " + path_label);
  }

  pixels.resize(static_cast<std::size_t>(width) * height * 3);
  rows.resize(height);
  const std::size_t stride = static_cast<std::size_t>(width) * 3;
  for (png_uint_32 y = 0; y < height; ++y) rows[y] = pixels.data() + y * stride;

  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  Image image(static_cast<int>(width), static_cast<int>(height));
  for (std::size_t i = 0; i < pixels.size(); ++i)
    image.data[i] = static_cast<double>(pixels[i]) / 255.0;
  return image;
}

std::string encode_png(const Image& image) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                            nullptr, nullptr);
  if (!png) throw IoError("PNG encoder initialization failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("PNG encoder initialization failed");
  }

  std::string out;
  std::vector<unsigned char> pixels(image.data.size());
  std::vector<png_bytep> rows(static_cast<std::size_t>(image.height));

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("PNG encode failed");
  }

  png_set_write_fn(png, &out, png_write_callback, png_flush_callback);
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width),
               static_cast<png_uint_32>(image.height), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  for (std::size_t i = 0; i < image.data.size(); ++i)
    pixels[i] = quantize_u8(image.data[i]);
  const std::size_t stride = static_cast<std::size_t>(image.width) * 3;
  for (int y = 0; y < image.height; ++y)
    rows[static_cast<std::size_t>(y)] =
        pixels.data() + static_cast<std::size_t>(y) * stride;

  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

// ---------------------------------------------------------------------------
// Binary PPM (P6)
// ---------------------------------------------------------------------------

// Reads one PPM header token, skipping whitespace and '#' comment lines.
std::string next_ppm_token(const std::string& bytes, std::size_t& pos,
                           const std::string& path_label) {
  while (pos < bytes.size()) {
    const char c = bytes[pos];
    if (c == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else if (std::isspace(static_cast<unsigned char>(c))) {
      ++pos;
    } else {
      break;
    }
  }
  const std::size_t start = pos;
  while (pos < bytes.size() &&
         !std::isspace(static_cast<unsigned char>(bytes[pos])))
    ++pos;
  if (start == pos) throw IoError("truncated PPM header: " + path_label);
  return bytes.substr(start, pos - start);
}

long parse_ppm_int(const std::string& token, const std::string& path_label) {
  for (char c : token)
    if (!std::isdigit(static_cast<unsigned char>(c)))
      throw IoError("malformed PPM header: " + path_label);
  try {
    return std::stol(token);
  } catch (const std::exception&) {
    throw IoError("malformed PPM header: " + path_label);
  }
}

Image decode_ppm(const std::string& bytes, const std::string& path_label) {
  std::size_t pos = 0;
  if (next_ppm_token(bytes, pos, path_label) != "P6")
    throw IoError("not a binary PPM (P6) file: " + path_label);
  const long width = parse_ppm_int(next_ppm_token(bytes, pos, path_label),
                                   path_label);
  const long height = parse_ppm_int(next_ppm_token(bytes, pos, path_label),
                                    path_label);
  const long maxval = parse_ppm_int(next_ppm_token(bytes, pos, path_label),
                                    path_label);
  if (width < 1 || height < 1)
    throw IoError("invalid PPM dimensions: " + path_label);
  if (maxval < 1 || maxval > 255)
    throw IoError("unsupported PPM maxval (want 1..255): " + path_label);
  // Exactly one whitespace byte separates the header from the raster.
  if (pos >= bytes.size() ||
      !std::isspace(static_cast<unsigned char>(bytes[pos])))
    throw IoError("malformed PPM header: " + path_label);
  ++pos;

  const std::size_t count =
      static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3;
  if (bytes.size() - pos < count)
    throw IoError("truncated PPM raster: " + path_label);

  Image image(static_cast<int>(width), static_cast<int>(height));
  const double scale = 1.0 / static_cast<double>(maxval);
  for (std::size_t i = 0; i < count; ++i)
    image.data[i] =
        static_cast<double>(static_cast<unsigned char>(bytes[pos + i])) * scale;
  return image;
}

std::string encode_ppm(const Image& image) {
  std::ostringstream header;
  header << "P6\n" << image.width << ' ' << image.height << "\n255\n";
  std::string out = header.str();
  out.reserve(out.size() + image.data.size());
  for (double v : image.data) out.push_back(static_cast<char>(quantize_u8(v)));
  return out;
}

}  // namespace

unsigned char quantize_u8(double v) {
  const double clamped = std::clamp(v, 0.0, 1.0);
  return static_cast<unsigned char>(std::floor(clamped * 255.0 + 0.5));
}

Image load_image(const std::filesystem::path& path) {
  const std::string ext = lower_extension(path);
  if (ext != ".png" && ext != ".ppm")
    throw ValidationError("unsupported image extension '" + ext +
                          "' (expected .png or .ppm): " + path.string());
  const std::string bytes = read_file_bytes(path.string());
  Image image = ext == ".png" ? decode_png(bytes, path.string())
                              : decode_ppm(bytes, path.string());
  if (!image.shape_valid())
    throw IoError("decoded image has invalid shape: " + path.string());
  return image;
}

void save_image(const std::filesystem::path& path, const Image& image) {
  if (!image.shape_valid())
    throw ValidationError("save_image: image shape is invalid");
  const std::string ext = lower_extension(path);
  if (ext == ".png") {
    atomic_write_bytes(path.string(), encode_png(image));
  } else if (ext == ".ppm") {
    atomic_write_bytes(path.string(), encode_ppm(image));
  } else {
    throw ValidationError("unsupported image extension '" + ext +
                          "' (expected .png or .ppm): " + path.string());
  }
}

}  // namespace ev3
