#pragma once

#include <cstdio>
#include <filesystem>
#include <string>

#include "densecorr/binary_io.hpp"
#include "densecorr/image.hpp"
#include "densecorr/mesh.hpp"
#include "densecorr/render.hpp"

namespace densecorr {

// DCVB: "DCVB", u32 width, u32 height, then per pixel (row-major)
// i32 face id, 3 x f32 barycentric, f32 depth. Little-endian.

inline std::vector<std::uint8_t> encode_dcvb(const ViewRender& view) {
  ByteWriter w;
  const auto n = view.face_id.size();
  w.reserve(12 + n * 20);
  w.magic("DCVB");
  w.u32(static_cast<std::uint32_t>(view.width()));
  w.u32(static_cast<std::uint32_t>(view.height()));
  for (std::size_t i = 0; i < n; ++i) {
    w.i32(view.face_id[i]);
    for (float b : view.barycentric[i]) w.f32(b);
    w.f32(view.depth[i]);
  }
  return w.bytes();
}

/// Fills the G-buffers of `view` (camera must already be set or is sized here).
inline void decode_dcvb(const std::vector<std::uint8_t>& bytes, ViewRender& view) {
  ByteReader r(bytes, "DCVB");
  r.expect_magic("DCVB");
  const auto width = r.u32();
  const auto height = r.u32();
  if (width == 0 || height == 0 || width > 65536 || height > 65536) fail(Errc::ParseError, "DCVB: bad dimensions");
  const auto n = static_cast<std::size_t>(width) * height;
  if (r.remaining() != n * 20) fail(Errc::ParseError, "DCVB: payload size does not match dimensions");
  view.camera.width = static_cast<int>(width);
  view.camera.height = static_cast<int>(height);
  view.face_id.resize(n);
  view.barycentric.resize(n);
  view.depth.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    view.face_id[i] = r.i32();
    for (float& b : view.barycentric[i]) b = r.f32();
    view.depth[i] = r.f32();
  }
  r.expect_end();
}

inline std::filesystem::path part_view_dir(const std::filesystem::path& root, PartId part) {
  char name[16];
  std::snprintf(name, sizeof name, "part_%02d", part.value());
  return root / name;
}

/// Writes view_<v>.png, view_<v>.dcvb and view_<v>.json for each of the six views.
inline void save_view_bundle(const std::filesystem::path& root, const ViewBundle& views) {
  const auto dir = part_view_dir(root, views[0].part);
  std::filesystem::create_directories(dir);
  for (const auto& view : views) {
    const std::string stem = "view_" + std::to_string(view.view);
    write_png(dir / (stem + ".png"), view.shaded);
    write_binary_file(dir / (stem + ".dcvb"), encode_dcvb(view));
    std::ofstream(dir / (stem + ".json")) << view_meta(view).dump(2) << '\n';
  }
}

inline bool has_view_bundle(const std::filesystem::path& root, PartId part) {
  return std::filesystem::exists(part_view_dir(root, part) / "view_0.dcvb");
}

inline ViewBundle load_view_bundle(const std::filesystem::path& root, PartId part) {
  const auto dir = part_view_dir(root, part);
  ViewBundle views;
  for (int v = 0; v < kViewCount; ++v) {
    const std::string stem = "view_" + std::to_string(v);
    ViewRender& view = views[static_cast<std::size_t>(v)];
    nlohmann::json meta;
    try {
      meta = nlohmann::json::parse(detail::read_text_file(dir / (stem + ".json")));
    } catch (const nlohmann::json::exception& e) {
      fail(Errc::ParseError, (dir / (stem + ".json")).string() + ": " + e.what());
    }
    view.part = part;
    view.view = v;
    view.camera = camera_from_json(meta.at("camera"));
    const int width = view.camera.width, height = view.camera.height;
    decode_dcvb(read_binary_file(dir / (stem + ".dcvb")), view);
    if (view.camera.width != width || view.camera.height != height)
      fail(Errc::DimensionMismatch, stem + ": G-buffer size differs from camera metadata");
    view.shaded = read_png(dir / (stem + ".png"));
    if (view.shaded.width != width || view.shaded.height != height)
      fail(Errc::DimensionMismatch, stem + ": shaded image size differs from camera metadata");
  }
  return views;
}

}  // namespace densecorr
