#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "densecorr/atlas.hpp"
#include "densecorr/binary_io.hpp"
#include "densecorr/image.hpp"
#include "densecorr/metrics.hpp"

namespace densecorr {

inline constexpr int kClassCount = kPartCount + 1;
inline constexpr int kScoreChannels = kClassCount + 2 * kPartCount;  // 73

/// Network outputs for one image, stored channel-planar: 25 class posteriors,
/// then U for parts 1..24, then V for parts 1..24.
class ScoreMaps {
 public:
  ScoreMaps() = default;
  ScoreMaps(int width, int height, std::vector<float> data) : width_(width), height_(height), data_(std::move(data)) {
    if (width <= 0 || height <= 0) fail(Errc::ShapeMismatch, "score maps need positive dimensions");
    if (data_.size() != plane() * kScoreChannels)
      fail(Errc::ShapeMismatch, "score maps hold " + std::to_string(data_.size()) + " values, expected " +
                                    std::to_string(plane() * kScoreChannels));
  }

  static ScoreMaps zeros(int width, int height) {
    return ScoreMaps(width, height, std::vector<float>(static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * kScoreChannels));
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  const std::vector<float>& data() const noexcept { return data_; }

  float& posterior(int c, int x, int y) { return data_[offset(c, x, y)]; }
  float posterior(int c, int x, int y) const { return data_[offset(c, x, y)]; }
  float& u(int part, int x, int y) { return data_[offset(kClassCount + part - 1, x, y)]; }
  float u(int part, int x, int y) const { return data_[offset(kClassCount + part - 1, x, y)]; }
  float& v(int part, int x, int y) { return data_[offset(kClassCount + kPartCount + part - 1, x, y)]; }
  float v(int part, int x, int y) const { return data_[offset(kClassCount + kPartCount + part - 1, x, y)]; }

  /// Posteriors non-negative and summing to 1 within 1e-4; regressors finite.
  void validate() const {
    for (int y = 0; y < height_; ++y)
      for (int x = 0; x < width_; ++x) {
        double sum = 0.0;
        for (int c = 0; c < kClassCount; ++c) {
          const float p = posterior(c, x, y);
          if (!(p >= 0.0f) || !std::isfinite(p)) fail(Errc::InvalidArgument, at(x, y) + ": negative or non-finite posterior");
          sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-4) fail(Errc::InvalidArgument, at(x, y) + ": posteriors sum to " + std::to_string(sum));
        for (int part = 1; part <= kPartCount; ++part)
          if (!std::isfinite(u(part, x, y)) || !std::isfinite(v(part, x, y)))
            fail(Errc::InvalidArgument, at(x, y) + ": non-finite regressor");
      }
  }

 private:
  std::size_t plane() const { return static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_); }
  std::size_t offset(int c, int x, int y) const {
    return static_cast<std::size_t>(c) * plane() + static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }
  static std::string at(int x, int y) { return "pixel (" + std::to_string(x) + "," + std::to_string(y) + ")"; }

  int width_ = 0;
  int height_ = 0;
  std::vector<float> data_;
};

inline std::vector<std::uint8_t> encode_dcsm(const ScoreMaps& maps) {
  ByteWriter w;
  w.reserve(12 + maps.data().size() * 4);
  w.magic("DCSM");
  w.u32(static_cast<std::uint32_t>(maps.width()));
  w.u32(static_cast<std::uint32_t>(maps.height()));
  for (float f : maps.data()) w.f32(f);
  return w.bytes();
}

inline ScoreMaps decode_dcsm(const std::vector<std::uint8_t>& bytes) {
  ByteReader r(bytes, "DCSM");
  r.expect_magic("DCSM");
  const auto width = r.u32();
  const auto height = r.u32();
  if (width == 0 || height == 0 || width > 65536 || height > 65536) fail(Errc::ShapeMismatch, "DCSM: bad dimensions");
  const auto count = static_cast<std::size_t>(width) * height * kScoreChannels;
  if (r.remaining() != count * 4)
    fail(Errc::ShapeMismatch, "DCSM: payload holds " + std::to_string(r.remaining() / 4) + " floats, expected " +
                                  std::to_string(count));
  std::vector<float> data(count);
  for (float& f : data) f = r.f32();
  return ScoreMaps(static_cast<int>(width), static_cast<int>(height), std::move(data));
}

inline ScoreMaps read_dcsm(const std::filesystem::path& path) { return decode_dcsm(read_binary_file(path)); }
inline void write_dcsm(const std::filesystem::path& path, const ScoreMaps& maps) { write_binary_file(path, encode_dcsm(maps)); }

/// Per-pixel part index and chart coordinates; background has part 0 and U = V = 0.
struct IuvRaster {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> part;
  std::vector<float> u;
  std::vector<float> v;

  IuvRaster() = default;
  IuvRaster(int w, int h)
      : width(w), height(h), part(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), 0),
        u(part.size(), 0.0f), v(part.size(), 0.0f) {}

  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x);
  }
  bool contains(Pixel p) const { return p.x >= 0 && p.y >= 0 && p.x < width && p.y < height; }
  friend bool operator==(const IuvRaster&, const IuvRaster&) = default;
};

/// Most probable class per pixel (lowest index on ties) with its clamped regressor outputs.
inline IuvRaster decode(const ScoreMaps& maps) {
  maps.validate();
  IuvRaster out(maps.width(), maps.height());
  for (int y = 0; y < maps.height(); ++y)
    for (int x = 0; x < maps.width(); ++x) {
      int best = 0;
      for (int c = 1; c < kClassCount; ++c)
        if (maps.posterior(c, x, y) > maps.posterior(best, x, y)) best = c;
      if (best == 0) continue;
      const auto i = out.index(x, y);
      out.part[i] = static_cast<std::uint8_t>(best);
      out.u[i] = std::clamp(maps.u(best, x, y), 0.0f, 1.0f);
      out.v[i] = std::clamp(maps.v(best, x, y), 0.0f, 1.0f);
    }
  return out;
}

/// Surface vertex under each requested pixel, or kBackgroundVertex.
inline std::vector<VertexId> lift(const IuvRaster& raster, const UVAtlas& atlas, std::span<const Pixel> pixels) {
  std::vector<VertexId> out;
  out.reserve(pixels.size());
  for (const Pixel& p : pixels) {
    if (!raster.contains(p))
      fail(Errc::IndexOutOfRange, "pixel (" + std::to_string(p.x) + "," + std::to_string(p.y) + ") outside raster");
    const auto i = raster.index(p.x, p.y);
    if (raster.part[i] == 0) {
      out.push_back(kBackgroundVertex);
      continue;
    }
    out.push_back(uv_to_vertex(atlas, PartId(raster.part[i]), raster.u[i], raster.v[i]));
  }
  return out;
}

/// Predicted instance covering every foreground pixel of the raster.
inline PredictedInstance lift_instance(const IuvRaster& raster, const UVAtlas& atlas, std::int64_t id,
                                       std::int64_t image_id, double score) {
  PredictedInstance pred{id, image_id, score, {}};
  std::vector<Pixel> pixels;
  for (int y = 0; y < raster.height; ++y)
    for (int x = 0; x < raster.width; ++x)
      if (raster.part[raster.index(x, y)] != 0) pixels.push_back({x, y});
  const auto vertices = lift(raster, atlas, pixels);
  for (std::size_t k = 0; k < pixels.size(); ++k) pred.vertices.emplace_hint(pred.vertices.end(), pixels[k], vertices[k]);
  return pred;
}

/// 3-channel PNG raster: (I, round(255 U), round(255 V)).
inline Image iuv_to_image(const IuvRaster& raster) {
  Image img(raster.width, raster.height, 3);
  for (int y = 0; y < raster.height; ++y)
    for (int x = 0; x < raster.width; ++x) {
      const auto i = raster.index(x, y);
      img.at(x, y, 0) = raster.part[i];
      img.at(x, y, 1) = static_cast<std::uint8_t>(std::lround(255.0 * raster.u[i]));
      img.at(x, y, 2) = static_cast<std::uint8_t>(std::lround(255.0 * raster.v[i]));
    }
  return img;
}

inline IuvRaster iuv_from_image(const Image& img) {
  if (img.channels < 3) fail(Errc::ShapeMismatch, "IUV image needs 3 channels, got " + std::to_string(img.channels));
  IuvRaster raster(img.width, img.height);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      const auto i = raster.index(x, y);
      const int part = img.at(x, y, 0);
      if (part > kPartCount)
        fail(Errc::ParseError, "IUV pixel (" + std::to_string(x) + "," + std::to_string(y) + ") has part " + std::to_string(part));
      if (part == 0) continue;
      raster.part[i] = static_cast<std::uint8_t>(part);
      raster.u[i] = static_cast<float>(img.at(x, y, 1) / 255.0);
      raster.v[i] = static_cast<float>(img.at(x, y, 2) / 255.0);
    }
  return raster;
}

}  // namespace densecorr
