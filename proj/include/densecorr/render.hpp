#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <set>
#include <vector>

#include <Eigen/Eigenvalues>
#include <json.hpp>

#include "densecorr/image.hpp"
#include "densecorr/mesh.hpp"
#include "densecorr/surface_point.hpp"

namespace densecorr {

inline constexpr int kViewCount = 6;

/// Orthographic camera. `direction` points from the part toward the viewer;
/// right x up = direction. Image y grows downward.
struct ViewCamera {
  Vec3 direction = Vec3::UnitZ();
  Vec3 right = Vec3::UnitX();
  Vec3 up = Vec3::UnitY();
  Vec3 center = Vec3::Zero();
  double scale = 1.0;  // pixels per world unit
  int width = 0;
  int height = 0;
  double depth_epsilon = 0.0;

  /// (x, y) in continuous pixel coordinates (pixel (i, j) spans [i, i+1) x [j, j+1))
  /// and depth along -direction (smaller is nearer).
  Vec3 project(const Vec3& p) const {
    const Vec3 q = p - center;
    return Vec3(0.5 * width + q.dot(right) * scale, 0.5 * height - q.dot(up) * scale, -q.dot(direction));
  }

  double world_per_pixel() const { return 1.0 / scale; }

  bool faces_viewer(const Vec3& normal) const { return normal.dot(direction) > 1e-12 * normal.norm(); }
};

/// One rendered view of a part with per-pixel surface lookup buffers.
struct ViewRender {
  PartId part;
  int view = 0;
  ViewCamera camera;
  Image shaded;  // 1 channel
  std::vector<std::int32_t> face_id;
  std::vector<std::array<float, 3>> barycentric;
  std::vector<float> depth;

  int width() const noexcept { return camera.width; }
  int height() const noexcept { return camera.height; }
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(camera.width) + static_cast<std::size_t>(x);
  }
  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < camera.width && y < camera.height; }
};

using ViewBundle = std::array<ViewRender, kViewCount>;

namespace detail {

inline Vec3 face_normal(const SurfaceMesh& mesh, FaceId f) {
  const Face& face = mesh.face(f);
  const Vec3& a = mesh.position(face[0]);
  return (mesh.position(face[1]) - a).cross(mesh.position(face[2]) - a);
}

inline double edge_function(double ax, double ay, double bx, double by, double px, double py) {
  return (bx - ax) * (py - ay) - (by - ay) * (px - ax);
}

// Barycentric weights of (px, py) in the projected triangle; nullopt if degenerate.
inline std::optional<std::array<double, 3>> screen_barycentric(const std::array<Vec3, 3>& s, double px, double py) {
  const double area = edge_function(s[0].x(), s[0].y(), s[1].x(), s[1].y(), s[2].x(), s[2].y());
  if (area == 0.0) return std::nullopt;
  const double w0 = edge_function(s[1].x(), s[1].y(), s[2].x(), s[2].y(), px, py) / area;
  const double w1 = edge_function(s[2].x(), s[2].y(), s[0].x(), s[0].y(), px, py) / area;
  return std::array<double, 3>{w0, w1, 1.0 - w0 - w1};
}

inline std::array<Vec3, 6> part_view_directions(const SurfaceMesh& mesh, PartId part, Vec3& centroid) {
  const auto& members = mesh.part_vertices(part);
  centroid = Vec3::Zero();
  for (VertexId v : members) centroid += mesh.position(v);
  centroid /= static_cast<double>(members.size());
  Eigen::Matrix3d covariance = Eigen::Matrix3d::Zero();
  for (VertexId v : members) {
    const Vec3 d = mesh.position(v) - centroid;
    covariance += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(covariance);
  const Vec3 e0 = solver.eigenvectors().col(2);
  const Vec3 e1 = solver.eigenvectors().col(1);
  const Vec3 e2 = e0.cross(e1);
  return {e0, -e0, e1, -e1, e2, -e2};
}

}  // namespace detail

/// Six orthographic views along the +/- principal axes of the part, each
/// fitted with a 5% margin; only the part's front-facing faces are drawn.
inline ViewBundle render_part_views(const SurfaceMesh& mesh, PartId part, int resolution) {
  if (resolution < 2) fail(Errc::InvalidArgument, "resolution must be at least 2 pixels");
  if (!mesh.has_part(part) || mesh.part_faces(part).empty())
    fail(Errc::EmptyPart, "part " + std::to_string(part.value()) + " has no faces");
  const auto& members = mesh.part_vertices(part);
  const auto& faces = mesh.part_faces(part);

  Vec3 centroid;
  const auto directions = detail::part_view_directions(mesh, part, centroid);
  Vec3 lo = mesh.position(members.front()), hi = lo;
  for (VertexId v : members) {
    lo = lo.cwiseMin(mesh.position(v));
    hi = hi.cwiseMax(mesh.position(v));
  }
  const double epsilon = 1e-4 * (hi - lo).norm();

  ViewBundle bundle;
  for (int view = 0; view < kViewCount; ++view) {
    ViewCamera camera;
    camera.direction = directions[static_cast<std::size_t>(view)];
    camera.up = directions[static_cast<std::size_t>(((view / 2 + 1) % 3) * 2)];
    camera.right = camera.up.cross(camera.direction);
    camera.width = camera.height = resolution;
    camera.depth_epsilon = epsilon;

    double r_lo = std::numeric_limits<double>::infinity(), r_hi = -r_lo, u_lo = r_lo, u_hi = -r_lo;
    for (VertexId v : members) {
      const Vec3 q = mesh.position(v) - centroid;
      r_lo = std::min(r_lo, q.dot(camera.right));
      r_hi = std::max(r_hi, q.dot(camera.right));
      u_lo = std::min(u_lo, q.dot(camera.up));
      u_hi = std::max(u_hi, q.dot(camera.up));
    }
    camera.center = centroid + 0.5 * (r_lo + r_hi) * camera.right + 0.5 * (u_lo + u_hi) * camera.up;
    const double extent = std::max(r_hi - r_lo, u_hi - u_lo);
    camera.scale = extent > 0.0 ? resolution / (extent * 1.1) : 1.0;

    ViewRender& out = bundle[static_cast<std::size_t>(view)];
    out.part = part;
    out.view = view;
    out.camera = camera;
    const auto pixels = static_cast<std::size_t>(resolution) * static_cast<std::size_t>(resolution);
    out.shaded = Image(resolution, resolution, 1, 255);
    out.face_id.assign(pixels, -1);
    out.barycentric.assign(pixels, {0.0f, 0.0f, 0.0f});
    out.depth.assign(pixels, std::numeric_limits<float>::infinity());
    std::vector<double> zbuffer(pixels, std::numeric_limits<double>::infinity());

    for (FaceId f : faces) {
      const Vec3 normal = detail::face_normal(mesh, f);
      if (!camera.faces_viewer(normal)) continue;
      const Face& face = mesh.face(f);
      const std::array<Vec3, 3> s{camera.project(mesh.position(face[0])), camera.project(mesh.position(face[1])),
                                  camera.project(mesh.position(face[2]))};
      const int x0 = std::max(0, static_cast<int>(std::floor(std::min({s[0].x(), s[1].x(), s[2].x()}))));
      const int x1 = std::min(resolution - 1, static_cast<int>(std::floor(std::max({s[0].x(), s[1].x(), s[2].x()}))));
      const int y0 = std::max(0, static_cast<int>(std::floor(std::min({s[0].y(), s[1].y(), s[2].y()}))));
      const int y1 = std::min(resolution - 1, static_cast<int>(std::floor(std::max({s[0].y(), s[1].y(), s[2].y()}))));
      const auto shade = static_cast<std::uint8_t>(std::lround(40.0 + 180.0 * normal.normalized().dot(camera.direction)));
      for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
          const auto w = detail::screen_barycentric(s, x + 0.5, y + 0.5);
          if (!w || (*w)[0] < 0.0 || (*w)[1] < 0.0 || (*w)[2] < 0.0) continue;
          const double z = (*w)[0] * s[0].z() + (*w)[1] * s[1].z() + (*w)[2] * s[2].z();
          const std::size_t i = out.index(x, y);
          if (!(z < zbuffer[i])) continue;
          zbuffer[i] = z;
          out.face_id[i] = f;
          out.barycentric[i] = {static_cast<float>((*w)[0]), static_cast<float>((*w)[1]), static_cast<float>((*w)[2])};
          out.depth[i] = static_cast<float>(z);
          out.shaded.at(x, y, 0) = shade;
        }
      }
    }
  }
  return bundle;
}

/// Surface point under a pixel of a rendered view.
inline SurfacePoint click_to_surface(const ViewRender& view, int x, int y) {
  if (!view.contains(x, y))
    fail(Errc::IndexOutOfRange, "pixel (" + std::to_string(x) + "," + std::to_string(y) + ") outside view");
  const std::size_t i = view.index(x, y);
  if (view.face_id[i] < 0) fail(Errc::NoSurface, "pixel (" + std::to_string(x) + "," + std::to_string(y) + ") is background");
  const auto& w = view.barycentric[i];
  const double total = static_cast<double>(w[0]) + static_cast<double>(w[1]) + static_cast<double>(w[2]);
  return SurfacePoint{view.face_id[i], {w[0] / total, w[1] / total, w[2] / total}};
}

struct ViewProjection {
  double x = 0.0;  // continuous pixel coordinates
  double y = 0.0;
  int pixel_x = 0;
  int pixel_y = 0;
  bool visible = false;
};

/// Visibility of a surface point in one view: its face must face the viewer,
/// it must land inside the image, and no face found in the G-buffer around
/// its pixel may cover it from more than the depth tolerance in front.
inline ViewProjection project_to_view(const SurfaceMesh& mesh, const ViewRender& view, const SurfacePoint& p) {
  const ViewCamera& camera = view.camera;
  const Vec3 q = camera.project(p.position(mesh));
  ViewProjection out;
  out.x = q.x();
  out.y = q.y();
  out.pixel_x = static_cast<int>(std::floor(q.x()));
  out.pixel_y = static_cast<int>(std::floor(q.y()));
  if (!camera.faces_viewer(detail::face_normal(mesh, p.face)) || !view.contains(out.pixel_x, out.pixel_y)) return out;

  std::set<FaceId> nearby;
  for (int dy = -1; dy <= 1; ++dy)
    for (int dx = -1; dx <= 1; ++dx) {
      const int x = out.pixel_x + dx, y = out.pixel_y + dy;
      if (!view.contains(x, y)) continue;
      const FaceId f = view.face_id[view.index(x, y)];
      if (f >= 0 && f != p.face) nearby.insert(f);
    }
  for (FaceId f : nearby) {
    const Face& face = mesh.face(f);
    const std::array<Vec3, 3> s{camera.project(mesh.position(face[0])), camera.project(mesh.position(face[1])),
                                camera.project(mesh.position(face[2]))};
    const auto w = detail::screen_barycentric(s, q.x(), q.y());
    if (!w || (*w)[0] < 0.0 || (*w)[1] < 0.0 || (*w)[2] < 0.0) continue;
    const double z = (*w)[0] * s[0].z() + (*w)[1] * s[1].z() + (*w)[2] * s[2].z();
    if (z < q.z() - camera.depth_epsilon) return out;
  }
  out.visible = true;
  return out;
}

inline std::array<ViewProjection, kViewCount> project_to_views(const SurfaceMesh& mesh, const ViewBundle& views,
                                                               const SurfacePoint& p) {
  validate(mesh, p);
  if (mesh.face_part(p.face) != views[0].part)
    fail(Errc::InvalidArgument, "surface point lies on part " + std::to_string(mesh.face_part(p.face).value()) +
                                    ", views show part " + std::to_string(views[0].part.value()));
  std::array<ViewProjection, kViewCount> out;
  for (std::size_t v = 0; v < kViewCount; ++v) out[v] = project_to_view(mesh, views[v], p);
  return out;
}

/// The visible view that sees p's face most head-on, or -1 when p is hidden in all six.
inline int most_frontal_view(const SurfaceMesh& mesh, const ViewBundle& views,
                             const std::array<ViewProjection, kViewCount>& projections, const SurfacePoint& p) {
  const Vec3 normal = detail::face_normal(mesh, p.face).normalized();
  int best = -1;
  double best_cos = -1.0;
  for (int v = 0; v < kViewCount; ++v) {
    if (!projections[static_cast<std::size_t>(v)].visible) continue;
    const double c = normal.dot(views[static_cast<std::size_t>(v)].camera.direction);
    if (c > best_cos) {
      best_cos = c;
      best = v;
    }
  }
  return best;
}

/// Faces of the part that cover no pixel in any of the six views.
inline std::vector<FaceId> faces_unseen(const SurfaceMesh& mesh, const ViewBundle& views) {
  std::set<FaceId> seen;
  for (const auto& view : views)
    for (FaceId f : view.face_id)
      if (f >= 0) seen.insert(f);
  std::vector<FaceId> missing;
  for (FaceId f : mesh.part_faces(views[0].part))
    if (!seen.count(f)) missing.push_back(f);
  return missing;
}

inline nlohmann::json camera_to_json(const ViewCamera& c) {
  auto vec = [](const Vec3& v) { return nlohmann::json::array({v.x(), v.y(), v.z()}); };
  return nlohmann::json{{"direction", vec(c.direction)}, {"right", vec(c.right)}, {"up", vec(c.up)},
                        {"center", vec(c.center)},       {"scale", c.scale},    {"width", c.width},
                        {"height", c.height},            {"depth_epsilon", c.depth_epsilon}};
}

inline ViewCamera camera_from_json(const nlohmann::json& j) {
  auto vec = [&](const char* key) {
    const auto& a = j.at(key);
    if (!a.is_array() || a.size() != 3) fail(Errc::SchemaError, std::string("/camera/") + key + ": expected 3 numbers");
    return Vec3(a[0].get<double>(), a[1].get<double>(), a[2].get<double>());
  };
  try {
    ViewCamera c;
    c.direction = vec("direction");
    c.right = vec("right");
    c.up = vec("up");
    c.center = vec("center");
    c.scale = j.at("scale").get<double>();
    c.width = j.at("width").get<int>();
    c.height = j.at("height").get<int>();
    c.depth_epsilon = j.at("depth_epsilon").get<double>();
    return c;
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::SchemaError, std::string("/camera: ") + e.what());
  }
}

inline nlohmann::json view_meta(const ViewRender& view) {
  return nlohmann::json{{"part", view.part.value()},
                        {"view", view.view},
                        {"width", view.width()},
                        {"height", view.height()},
                        {"world_per_pixel", view.camera.world_per_pixel()},
                        {"camera", camera_to_json(view.camera)}};
}

}  // namespace densecorr
