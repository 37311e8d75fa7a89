#pragma once

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "ewt/grid.hpp"

namespace ewt::io {

static_assert(std::endian::native == std::endian::little,
              "binary field files assume a little-endian host");

namespace detail {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f != nullptr) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline FilePtr open(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.string().c_str(), mode));
  if (!f) throw IoError("cannot open '" + path.string() + "'");
  return f;
}

inline Image read_png(const std::filesystem::path& path) {
  FilePtr file = open(path, "rb");
  unsigned char signature[8];
  if (std::fread(signature, 1, 8, file.get()) != 8 || png_sig_cmp(signature, 0, 8) != 0) {
    throw IoError("'" + path.string() + "' is not a PNG file");
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (png == nullptr) throw IoError("libpng: out of memory");
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("libpng: out of memory");
  }
  // Declared before setjmp so longjmp never skips a destructor we rely on.
  std::vector<unsigned char> buffer;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("libpng: failed to decode '" + path.string() + "'");
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const png_byte color = png_get_color_type(png, info);
  const png_byte depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA ||
      color == PNG_COLOR_TYPE_PALETTE) {
    png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  }
  png_read_update_info(png, info);
  const int width = static_cast<int>(png_get_image_width(png, info));
  const int height = static_cast<int>(png_get_image_height(png, info));
  const int out_depth = png_get_bit_depth(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  buffer.resize(stride * static_cast<std::size_t>(height));
  rows.resize(static_cast<std::size_t>(height));
  for (int y = 0; y < height; ++y) rows[static_cast<std::size_t>(y)] = buffer.data() + stride * y;
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);

  Image img(width, height);
  const double scale = out_depth == 16 ? 1.0 / 65535.0 : 1.0 / 255.0;
  for (int y = 0; y < height; ++y) {
    const unsigned char* row = rows[static_cast<std::size_t>(y)];
    for (int x = 0; x < width; ++x) {
      const unsigned v = out_depth == 16 ? (static_cast<unsigned>(row[2 * x]) << 8) | row[2 * x + 1]
                                         : row[x];
      img(x, y) = v * scale;
    }
  }
  return img;
}

inline Image read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  auto token = [&]() {
    std::string t;
    while (in >> std::ws && in.peek() == '#') {
      std::string comment;
      std::getline(in, comment);
    }
    in >> t;
    return t;
  };
  const std::string magic = token();
  if (magic != "P2" && magic != "P5") throw IoError("'" + path.string() + "' is not a PGM file");
  const int width = std::stoi(token());
  const int height = std::stoi(token());
  const int maxval = std::stoi(token());
  if (width <= 0 || height <= 0 || maxval <= 0 || maxval > 65535) {
    throw IoError("'" + path.string() + "': bad PGM header");
  }
  Image img(width, height);
  if (magic == "P2") {
    for (auto& v : img) v = std::stod(token()) / maxval;
  } else {
    in.get();  // single whitespace after maxval
    const int bytes = maxval > 255 ? 2 : 1;
    std::vector<unsigned char> raw(img.size() * bytes);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!in) throw IoError("'" + path.string() + "': truncated PGM data");
    for (std::size_t i = 0; i < img.size(); ++i) {
      const unsigned v = bytes == 2 ? (static_cast<unsigned>(raw[2 * i]) << 8) | raw[2 * i + 1]
                                    : raw[i];
      img[i] = static_cast<double>(v) / maxval;
    }
  }
  return img;
}

}  // namespace detail

/// Reads a grayscale PNG (any bit depth) or PGM; values are mapped to [0, 1].
inline Image read_image(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("input not found: '" + path.string() + "'");
  std::ifstream probe(path, std::ios::binary);
  char magic[2] = {0, 0};
  probe.read(magic, 2);
  if (magic[0] == 'P' && (magic[1] == '2' || magic[1] == '5')) return detail::read_pgm(path);
  return detail::read_png(path);
}

/// Writes raw 8- or 16-bit grayscale samples.
inline void write_png_samples(const std::filesystem::path& path, int width, int height,
                              int bit_depth, const std::vector<std::uint16_t>& samples) {
  if (bit_depth != 8 && bit_depth != 16) throw InvalidArgument("png: bit depth must be 8 or 16");
  if (samples.size() != static_cast<std::size_t>(width) * height) {
    throw InvalidArgument("png: sample count mismatch");
  }
  detail::FilePtr file = detail::open(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (png == nullptr) throw IoError("libpng: out of memory");
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("libpng: out of memory");
  }
  const std::size_t bytes = bit_depth / 8;
  std::vector<unsigned char> row(static_cast<std::size_t>(width) * bytes);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng: failed to encode '" + path.string() + "'");
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height),
               bit_depth, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const std::uint16_t v = samples[static_cast<std::size_t>(y) * width + x];
      if (bytes == 2) {
        row[2 * x] = static_cast<unsigned char>(v >> 8);
        row[2 * x + 1] = static_cast<unsigned char>(v & 0xff);
      } else {
        row[x] = static_cast<unsigned char>(std::min<std::uint16_t>(v, 255));
      }
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

/// Writes 8-bit RGB pixels, three bytes per pixel, row-major.
inline void write_png_rgb(const std::filesystem::path& path, int width, int height,
                          const std::vector<std::uint8_t>& rgb) {
  if (rgb.size() != static_cast<std::size_t>(width) * height * 3) {
    throw InvalidArgument("png: sample count mismatch");
  }
  detail::FilePtr file = detail::open(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (png == nullptr) throw IoError("libpng: out of memory");
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("libpng: out of memory");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng: failed to encode '" + path.string() + "'");
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < height; ++y) {
    png_write_row(png, const_cast<png_bytep>(rgb.data() + static_cast<std::size_t>(y) * width * 3));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

/// Writes an image with values clamped to [0, 1].
inline void write_png(const std::filesystem::path& path, const Image& img, int bit_depth = 16) {
  const double maxval = bit_depth == 16 ? 65535.0 : 255.0;
  std::vector<std::uint16_t> samples(img.size());
  for (std::size_t i = 0; i < img.size(); ++i) {
    const double v = std::isfinite(img[i]) ? std::clamp(img[i], 0.0, 1.0) : 0.0;
    samples[i] = static_cast<std::uint16_t>(std::lround(v * maxval));
  }
  write_png_samples(path, img.width(), img.height(), bit_depth, samples);
}

/// Reads raw 16-bit samples written by write_png_samples.
inline std::vector<std::uint16_t> read_png_samples16(const std::filesystem::path& path,
                                                    int& width, int& height) {
  const Image img = detail::read_png(path);
  width = img.width();
  height = img.height();
  std::vector<std::uint16_t> out(img.size());
  for (std::size_t i = 0; i < img.size(); ++i) {
    out[i] = static_cast<std::uint16_t>(std::lround(img[i] * 65535.0));
  }
  return out;
}

namespace detail {

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  return value;
}

inline void check_magic(std::istream& in, const char* magic, const std::filesystem::path& path) {
  char tag[4] = {0, 0, 0, 0};
  in.read(tag, 4);
  if (!in || std::memcmp(tag, magic, 4) != 0) {
    throw IoError("'" + path.string() + "': bad magic, expected " + std::string(magic, 4));
  }
}

}  // namespace detail

/// Field file: "EWTF", u32 width, u32 height, then width*height (dx, dy)
/// pairs of little-endian float64, row-major.
inline void write_field(const std::filesystem::path& path, const DisplacementField& field) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out.write("EWTF", 4);
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(field.width()));
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(field.height()));
  for (const Vec2& v : field) {
    detail::put<double>(out, v.x);
    detail::put<double>(out, v.y);
  }
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

inline DisplacementField read_field(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  detail::check_magic(in, "EWTF", path);
  const auto w = detail::get<std::uint32_t>(in);
  const auto h = detail::get<std::uint32_t>(in);
  if (!in || w == 0 || h == 0 || w > 1u << 16 || h > 1u << 16) {
    throw IoError("'" + path.string() + "': bad field header");
  }
  DisplacementField field(static_cast<int>(w), static_cast<int>(h));
  for (Vec2& v : field) {
    v.x = detail::get<double>(in);
    v.y = detail::get<double>(in);
  }
  if (!in) throw IoError("'" + path.string() + "': truncated field data");
  return field;
}

/// Coefficient file: "EWTC", u32 width, u32 height, then width*height
/// little-endian float32 values, row-major.
inline void write_coefficients(const std::filesystem::path& path, const Image& band) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out.write("EWTC", 4);
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(band.width()));
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(band.height()));
  for (double v : band) detail::put<float>(out, static_cast<float>(v));
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

inline Image read_coefficients(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  detail::check_magic(in, "EWTC", path);
  const auto w = detail::get<std::uint32_t>(in);
  const auto h = detail::get<std::uint32_t>(in);
  if (!in || w == 0 || h == 0 || w > 1u << 16 || h > 1u << 16) {
    throw IoError("'" + path.string() + "': bad coefficient header");
  }
  Image band(static_cast<int>(w), static_cast<int>(h));
  for (double& v : band) v = detail::get<float>(in);
  if (!in) throw IoError("'" + path.string() + "': truncated coefficient data");
  return band;
}

/// Linear rescale to [0, 1] for previews; constant images map to 0.
inline Image normalize_for_display(const Image& img) {
  const auto [lo, hi] = std::minmax_element(img.begin(), img.end());
  Image out(img.width(), img.height());
  const double range = *hi - *lo;
  for (std::size_t i = 0; i < img.size(); ++i) out[i] = range > 0 ? (img[i] - *lo) / range : 0.0;
  return out;
}

}  // namespace ewt::io
