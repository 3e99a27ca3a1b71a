#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include <png.h>

#include "densecorr/error.hpp"

namespace densecorr {

struct Pixel {
  int x = 0;
  int y = 0;
  friend auto operator<=>(const Pixel&, const Pixel&) = default;
};

/// 8-bit interleaved raster with 1 (gray), 2 (gray+alpha), 3 (RGB) or 4 (RGBA) channels.
struct Image {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<std::uint8_t> data;

  Image() = default;
  Image(int w, int h, int c, std::uint8_t fill = 0)
      : width(w), height(h), channels(c), data(static_cast<std::size_t>(w) * h * c, fill) {}

  std::size_t offset(int x, int y) const {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)) *
           static_cast<std::size_t>(channels);
  }
  std::uint8_t& at(int x, int y, int c) { return data[offset(x, y) + static_cast<std::size_t>(c)]; }
  std::uint8_t at(int x, int y, int c) const { return data[offset(x, y) + static_cast<std::size_t>(c)]; }
  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }

  friend bool operator==(const Image&, const Image&) = default;
};

namespace detail {

inline png_uint_32 png_format_for(int channels) {
  switch (channels) {
    case 1: return PNG_FORMAT_GRAY;
    case 2: return PNG_FORMAT_GA;
    case 3: return PNG_FORMAT_RGB;
    case 4: return PNG_FORMAT_RGBA;
  }
  fail(Errc::InvalidArgument, "unsupported channel count " + std::to_string(channels));
}

inline Image finish_png_read(png_image& header) {
  header.format &= (PNG_FORMAT_FLAG_COLOR | PNG_FORMAT_FLAG_ALPHA);
  const int channels = static_cast<int>(PNG_IMAGE_PIXEL_CHANNELS(header.format));
  Image image(static_cast<int>(header.width), static_cast<int>(header.height), channels);
  if (!png_image_finish_read(&header, nullptr, image.data.data(), 0, nullptr)) {
    const std::string message = header.message;
    png_image_free(&header);
    fail(Errc::ParseError, "png: " + message);
  }
  return image;
}

}  // namespace detail

/// Reads an 8-bit PNG keeping its gray/colour and alpha layout.
inline Image read_png(const std::filesystem::path& path) {
  png_image header;
  std::memset(&header, 0, sizeof header);
  header.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&header, path.string().c_str())) {
    const std::string message = header.message;
    png_image_free(&header);
    fail(std::filesystem::exists(path) ? Errc::ParseError : Errc::IoError, path.string() + ": " + message);
  }
  return detail::finish_png_read(header);
}

inline Image decode_png(const std::vector<std::uint8_t>& bytes) {
  png_image header;
  std::memset(&header, 0, sizeof header);
  header.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&header, bytes.data(), bytes.size())) {
    const std::string message = header.message;
    png_image_free(&header);
    fail(Errc::ParseError, "png: " + message);
  }
  return detail::finish_png_read(header);
}

inline std::vector<std::uint8_t> encode_png(const Image& image) {
  png_image header;
  std::memset(&header, 0, sizeof header);
  header.version = PNG_IMAGE_VERSION;
  header.width = static_cast<png_uint_32>(image.width);
  header.height = static_cast<png_uint_32>(image.height);
  header.format = detail::png_format_for(image.channels);
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&header, nullptr, &size, 0, image.data.data(), 0, nullptr))
    fail(Errc::IoError, std::string("png encode: ") + header.message);
  std::vector<std::uint8_t> bytes(size);
  if (!png_image_write_to_memory(&header, bytes.data(), &size, 0, image.data.data(), 0, nullptr))
    fail(Errc::IoError, std::string("png encode: ") + header.message);
  bytes.resize(size);
  return bytes;
}

inline void write_png(const std::filesystem::path& path, const Image& image) {
  png_image header;
  std::memset(&header, 0, sizeof header);
  header.version = PNG_IMAGE_VERSION;
  header.width = static_cast<png_uint_32>(image.width);
  header.height = static_cast<png_uint_32>(image.height);
  header.format = detail::png_format_for(image.channels);
  if (!png_image_write_to_file(&header, path.string().c_str(), 0, image.data.data(), 0, nullptr))
    fail(Errc::IoError, path.string() + ": " + header.message);
}

}  // namespace densecorr
