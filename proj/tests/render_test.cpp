#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "densecorr/geodesic.hpp"
#include "densecorr/render.hpp"
#include "densecorr/view_io.hpp"
#include "support/ray_oracle.hpp"
#include "support/synthetic.hpp"

namespace densecorr {
namespace {

SurfaceMesh single_triangle() {
  return SurfaceMesh::create({Vec3(0, 0, 0), Vec3(2, 0, 0), Vec3(0.5, 1.5, 0)}, {{0, 1, 2}}, {3, 3, 3});
}

SurfacePoint random_point(const SurfaceMesh& mesh, PartId part, std::mt19937_64& rng) {
  const auto& faces = mesh.part_faces(part);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const FaceId f = faces[rng() % faces.size()];
  const double r1 = std::sqrt(unit(rng)), r2 = unit(rng);
  return SurfacePoint{f, {1.0 - r1, r1 * (1.0 - r2), r1 * r2}};
}

int covered_pixels(const ViewRender& view) {
  return static_cast<int>(std::count_if(view.face_id.begin(), view.face_id.end(), [](auto f) { return f >= 0; }));
}

TEST(RenderViews, SingleTriangleShowsInExactlyOneView) {
  const auto mesh = single_triangle();
  const auto views = render_part_views(mesh, PartId(3), 64);
  int covering = 0;
  for (const auto& view : views) {
    EXPECT_EQ(view.width(), 64);
    EXPECT_EQ(view.shaded.channels, 1);
    if (covered_pixels(view) > 0) ++covering;
  }
  EXPECT_EQ(covering, 1);
  EXPECT_TRUE(faces_unseen(mesh, views).empty());
}

TEST(RenderViews, BackgroundPixels) {
  const auto mesh = single_triangle();
  const auto views = render_part_views(mesh, PartId(3), 64);
  for (const auto& view : views) {
    const auto i = view.index(0, 0);
    EXPECT_EQ(view.face_id[i], -1);
    EXPECT_TRUE(std::isinf(view.depth[i]));
    EXPECT_EQ(view.shaded.at(0, 0, 0), 255);
    try {
      click_to_surface(view, 0, 0);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::NoSurface);
    }
    EXPECT_THROW(click_to_surface(view, 64, 0), Error);
  }
}

TEST(RenderViews, CentroidPixelHasThirdWeights) {
  const auto mesh = single_triangle();
  const int res = 128;
  const auto views = render_part_views(mesh, PartId(3), res);
  for (const auto& view : views) {
    if (covered_pixels(view) == 0) continue;
    const Vec3 c = view.camera.project((mesh.position(0) + mesh.position(1) + mesh.position(2)) / 3.0);
    const auto p = click_to_surface(view, static_cast<int>(c.x()), static_cast<int>(c.y()));
    EXPECT_EQ(p.face, 0);
    for (double w : p.weights) EXPECT_NEAR(w, 1.0 / 3.0, 2.0 / res);
  }
}

TEST(RenderViews, FrameIsRightHanded) {
  const auto mesh = testing::ellipsoid(10, 16, Vec3(1.0, 0.6, 0.4), 2);
  const auto views = render_part_views(mesh, PartId(1), 32);
  for (int v = 0; v < kViewCount; ++v) {
    const auto& cam = views[static_cast<std::size_t>(v)].camera;
    EXPECT_NEAR(cam.direction.norm(), 1.0, 1e-12);
    EXPECT_NEAR(cam.up.dot(cam.direction), 0.0, 1e-12);
    EXPECT_LT((cam.right.cross(cam.up) - cam.direction).norm(), 1e-12);
    if (v % 2 == 1) {
      EXPECT_LT((cam.direction + views[static_cast<std::size_t>(v - 1)].camera.direction).norm(), 1e-12);
    }
  }
}

TEST(RenderViews, Validation) {
  const auto mesh = single_triangle();
  EXPECT_THROW(render_part_views(mesh, PartId(3), 1), Error);
  try {
    render_part_views(mesh, PartId(4), 32);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::EmptyPart);
  }
}

TEST(RenderViews, Deterministic) {
  const auto mesh = testing::ellipsoid(12, 18, Vec3(1.0, 0.7, 0.5), 3);
  const auto a = render_part_views(mesh, PartId(2), 96);
  const auto b = render_part_views(mesh, PartId(2), 96);
  for (int v = 0; v < kViewCount; ++v) {
    const auto& x = a[static_cast<std::size_t>(v)];
    const auto& y = b[static_cast<std::size_t>(v)];
    EXPECT_EQ(x.face_id, y.face_id);
    EXPECT_EQ(x.barycentric, y.barycentric);
    EXPECT_EQ(x.shaded, y.shaded);
  }
}

TEST(RenderViews, ClickedPixelReprojectsIntoItself) {
  const auto mesh = testing::ellipsoid(12, 18, Vec3(1.0, 0.7, 0.5), 3);
  const auto views = render_part_views(mesh, PartId(1), 128);
  for (const auto& view : views) {
    for (int y = 0; y < view.height(); y += 3)
      for (int x = 0; x < view.width(); x += 3) {
        if (view.face_id[view.index(x, y)] < 0) continue;
        const auto p = click_to_surface(view, x, y);
        const Vec3 s = view.camera.project(p.position(mesh));
        EXPECT_NEAR(s.x(), x + 0.5, 1e-3);
        EXPECT_NEAR(s.y(), y + 0.5, 1e-3);
      }
  }
}

TEST(RenderViews, EveryFaceSeenOnConvexParts) {
  const auto mesh = testing::ellipsoid(12, 18, Vec3(1.0, 0.7, 0.5), 3);
  for (int part = 1; part <= 3; ++part) {
    const auto views = render_part_views(mesh, PartId(part), 256);
    EXPECT_TRUE(faces_unseen(mesh, views).empty()) << "part " << part;
  }
}

TEST(ProjectToViews, FrontFacingPointVisibleAtItsPixel) {
  const auto mesh = single_triangle();
  const auto views = render_part_views(mesh, PartId(3), 64);
  const SurfacePoint p{0, {0.3, 0.3, 0.4}};
  const auto proj = project_to_views(mesh, views, p);
  int visible = 0;
  for (int v = 0; v < kViewCount; ++v) {
    const auto& pr = proj[static_cast<std::size_t>(v)];
    if (!pr.visible) continue;
    ++visible;
    const auto& view = views[static_cast<std::size_t>(v)];
    EXPECT_EQ(view.face_id[view.index(pr.pixel_x, pr.pixel_y)], 0);
    // The opposite view looks at the triangle's back.
    EXPECT_FALSE(proj[static_cast<std::size_t>(v ^ 1)].visible);
  }
  EXPECT_EQ(visible, 1);
}

TEST(ProjectToViews, RejectsPointOnOtherPart) {
  const auto mesh = testing::ellipsoid(10, 16, Vec3(1.0, 0.6, 0.4), 2);
  const auto views = render_part_views(mesh, PartId(1), 32);
  const SurfacePoint p{mesh.part_faces(PartId(2)).front(), {1.0 / 3, 1.0 / 3, 1.0 / 3}};
  EXPECT_THROW(project_to_views(mesh, views, p), Error);
  EXPECT_THROW(project_to_views(mesh, views, SurfacePoint{-1, {1, 0, 0}}), Error);
}

TEST(ProjectToViews, VisibilityMatchesRayOracle) {
  std::mt19937_64 rng(21);
  const auto ellipsoid = testing::ellipsoid(14, 20, Vec3(1.0, 0.6, 0.45), 3);
  const auto cylinder = testing::two_part_cylinder(8, 20, 0.5, 2.0);
  for (const SurfaceMesh* mesh : {&ellipsoid, &cylinder}) {
    for (int part = 1; part <= 2; ++part) {
      const auto views = render_part_views(*mesh, PartId(part), 192);
      for (int i = 0; i < 60; ++i) {
        const auto p = random_point(*mesh, PartId(part), rng);
        const auto proj = project_to_views(*mesh, views, p);
        for (int v = 0; v < kViewCount; ++v)
          EXPECT_EQ(proj[static_cast<std::size_t>(v)].visible,
                    testing::ray_visible(*mesh, views[static_cast<std::size_t>(v)], p));
      }
    }
  }
}

TEST(ProjectToViews, ClickRoundTrip) {
  std::mt19937_64 rng(4);
  const auto mesh = testing::ellipsoid(14, 20, Vec3(1.0, 0.6, 0.45), 3);
  for (int part = 1; part <= 3; ++part) {
    const auto views = render_part_views(mesh, PartId(part), 256);
    for (int i = 0; i < 50; ++i) {
      const auto p = random_point(mesh, PartId(part), rng);
      const auto proj = project_to_views(mesh, views, p);
      const int best = most_frontal_view(mesh, views, proj, p);
      ASSERT_GE(best, 0);
      const auto& view = views[static_cast<std::size_t>(best)];
      const auto& pr = proj[static_cast<std::size_t>(best)];
      const auto q = click_to_surface(view, pr.pixel_x, pr.pixel_y);
      EXPECT_LE(surface_distance(mesh, p, q), 2.0 * view.camera.world_per_pixel());
    }
  }
}

TEST(ViewIo, DcvbRoundTrip) {
  const auto mesh = testing::ellipsoid(10, 16, Vec3(1.0, 0.6, 0.4), 2);
  const auto views = render_part_views(mesh, PartId(2), 48);
  ViewRender back;
  decode_dcvb(encode_dcvb(views[3]), back);
  EXPECT_EQ(back.face_id, views[3].face_id);
  EXPECT_EQ(back.barycentric, views[3].barycentric);
  EXPECT_EQ(back.depth, views[3].depth);

  auto bytes = encode_dcvb(views[3]);
  bytes[0] = 'X';
  try {
    decode_dcvb(bytes, back);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::BadMagic);
  }
  bytes = encode_dcvb(views[3]);
  bytes.pop_back();
  EXPECT_THROW(decode_dcvb(bytes, back), Error);
}

TEST(ViewIo, BundleRoundTrip) {
  const auto mesh = testing::ellipsoid(10, 16, Vec3(1.0, 0.6, 0.4), 2);
  const auto views = render_part_views(mesh, PartId(2), 40);
  const auto dir = std::filesystem::temp_directory_path() / ("densecorr_views_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  save_view_bundle(dir, views);
  EXPECT_TRUE(has_view_bundle(dir, PartId(2)));
  EXPECT_FALSE(has_view_bundle(dir, PartId(1)));
  EXPECT_TRUE(std::filesystem::exists(dir / "part_02" / "view_5.json"));
  const auto back = load_view_bundle(dir, PartId(2));
  for (int v = 0; v < kViewCount; ++v) {
    const auto& a = views[static_cast<std::size_t>(v)];
    const auto& b = back[static_cast<std::size_t>(v)];
    EXPECT_EQ(a.face_id, b.face_id);
    EXPECT_EQ(a.shaded, b.shaded);
    EXPECT_EQ(a.camera.scale, b.camera.scale);
    EXPECT_EQ(a.camera.direction, b.camera.direction);
    EXPECT_EQ(b.view, v);
  }
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace densecorr
