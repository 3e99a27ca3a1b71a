#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <vector>

#include "densecorr/decoder.hpp"
#include "densecorr/image.hpp"

namespace densecorr {

namespace detail {

inline Image to_rgb(const Image& img) {
  if (img.channels == 3) return img;
  Image out(img.width, img.height, 3);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = img.at(x, y, img.channels >= 3 ? c : 0);
  return out;
}

}  // namespace detail

/// 24 square RGB tiles, one per part. Texel (0,0) is the tile's top-left and
/// corresponds to (U,V) = (0,0).
class TextureAtlas {
 public:
  static TextureAtlas from_tiles(std::vector<Image> tiles) {
    if (tiles.size() != static_cast<std::size_t>(kPartCount))
      fail(Errc::MissingTile, "texture atlas needs 24 tiles, got " + std::to_string(tiles.size()));
    TextureAtlas atlas;
    atlas.resolution_ = tiles.front().width;
    for (std::size_t i = 0; i < tiles.size(); ++i) {
      const Image& t = tiles[i];
      if (t.width != t.height || t.width != atlas.resolution_ || t.width < 1)
        fail(Errc::DimensionMismatch, "tile " + std::to_string(i + 1) + " is " + std::to_string(t.width) + "x" +
                                          std::to_string(t.height) + ", expected square " +
                                          std::to_string(atlas.resolution_));
      atlas.tiles_[i] = detail::to_rgb(t);
    }
    return atlas;
  }

  /// One image holding the tiles in a 6 x 4 grid, part 1 top-left, row-major.
  static TextureAtlas from_grid(const Image& grid) {
    if (grid.width % 6 != 0 || grid.height % 4 != 0 || grid.width / 6 != grid.height / 4 || grid.width == 0)
      fail(Errc::DimensionMismatch, "texture grid " + std::to_string(grid.width) + "x" + std::to_string(grid.height) +
                                        " is not 6 x 4 square tiles");
    const int res = grid.width / 6;
    std::vector<Image> tiles;
    for (int part = 0; part < kPartCount; ++part) {
      Image tile(res, res, grid.channels);
      const int ox = (part % 6) * res, oy = (part / 6) * res;
      for (int y = 0; y < res; ++y)
        for (int x = 0; x < res; ++x)
          for (int c = 0; c < grid.channels; ++c) tile.at(x, y, c) = grid.at(ox + x, oy + y, c);
      tiles.push_back(std::move(tile));
    }
    return from_tiles(std::move(tiles));
  }

  /// Every *.png in the directory, in file-name order, must give exactly 24 tiles.
  static TextureAtlas from_directory(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) fail(Errc::IoError, dir.string() + " is not a directory");
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir))
      if (entry.is_regular_file() && entry.path().extension() == ".png") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    if (files.size() != static_cast<std::size_t>(kPartCount))
      fail(Errc::MissingTile, dir.string() + " holds " + std::to_string(files.size()) + " tiles, expected 24");
    std::vector<Image> tiles;
    for (const auto& f : files) tiles.push_back(read_png(f));
    return from_tiles(std::move(tiles));
  }

  static TextureAtlas load(const std::filesystem::path& path) {
    return std::filesystem::is_directory(path) ? from_directory(path) : from_grid(read_png(path));
  }

  int resolution() const noexcept { return resolution_; }
  const Image& tile(PartId part) const {
    if (!part.is_surface()) fail(Errc::InvalidArgument, "background has no texture tile");
    return tiles_[static_cast<std::size_t>(part.value() - 1)];
  }

  /// Bilinear, clamped texel lookup at (U (res-1), V (res-1)).
  std::array<std::uint8_t, 3> sample(PartId part, double u, double v) const {
    const Image& t = tile(part);
    const double last = resolution_ - 1;
    const double sx = std::clamp(u, 0.0, 1.0) * last, sy = std::clamp(v, 0.0, 1.0) * last;
    const int x0 = static_cast<int>(std::floor(sx)), y0 = static_cast<int>(std::floor(sy));
    const int x1 = std::min(x0 + 1, resolution_ - 1), y1 = std::min(y0 + 1, resolution_ - 1);
    const double fx = sx - x0, fy = sy - y0;
    std::array<std::uint8_t, 3> out{};
    for (int c = 0; c < 3; ++c) {
      const double top = (1 - fx) * t.at(x0, y0, c) + fx * t.at(x1, y0, c);
      const double bottom = (1 - fx) * t.at(x0, y1, c) + fx * t.at(x1, y1, c);
      out[static_cast<std::size_t>(c)] = static_cast<std::uint8_t>(std::lround((1 - fy) * top + fy * bottom));
    }
    return out;
  }

 private:
  int resolution_ = 0;
  std::array<Image, kPartCount> tiles_;
};

/// Repaints every foreground pixel of `base` from the tile of its part.
inline Image apply_texture(const IuvRaster& iuv, const Image& base, const TextureAtlas& atlas) {
  if (iuv.width != base.width || iuv.height != base.height)
    fail(Errc::DimensionMismatch, "IUV raster " + std::to_string(iuv.width) + "x" + std::to_string(iuv.height) +
                                      " does not match image " + std::to_string(base.width) + "x" +
                                      std::to_string(base.height));
  Image out = detail::to_rgb(base);
  for (int y = 0; y < iuv.height; ++y)
    for (int x = 0; x < iuv.width; ++x) {
      const auto i = iuv.index(x, y);
      if (iuv.part[i] == 0) continue;
      const auto rgb = atlas.sample(PartId(iuv.part[i]), iuv.u[i], iuv.v[i]);
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = rgb[static_cast<std::size_t>(c)];
    }
  return out;
}

}  // namespace densecorr
