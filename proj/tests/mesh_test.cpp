#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "densecorr/mesh.hpp"
#include "support/synthetic.hpp"

namespace densecorr {
namespace {

class MeshFiles : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() /
           ("densecorr_mesh_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    std::filesystem::create_directories(dir_);
  }
  void TearDown() override { std::filesystem::remove_all(dir_); }

  std::filesystem::path write(const std::string& name, const std::string& text) {
    const auto path = dir_ / name;
    std::ofstream(path) << text;
    return path;
  }

  std::filesystem::path dir_;
};

constexpr const char* kSquareObj =
    "# unit square\n"
    "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\n"
    "vn 0 0 1\n"
    "f 1 2 3\nf 1/1/1 3/3/1 4/4/1\n";

TEST_F(MeshFiles, LoadsTwoTriangleSquare) {
  const auto mesh = load_mesh(write("m.obj", kSquareObj), write("l.json", "[1,1,1,1]"));
  EXPECT_EQ(mesh.vertex_count(), 4u);
  EXPECT_EQ(mesh.face_count(), 2u);
  EXPECT_EQ(mesh.face(1)[2], 3);
  EXPECT_EQ(mesh.part_vertices(PartId(1)).size(), 4u);
  EXPECT_EQ(mesh.part_faces(PartId(1)).size(), 2u);
}

TEST_F(MeshFiles, LabelOutOfRangeIsLabelMismatch) {
  try {
    load_mesh(write("m.obj", kSquareObj), write("l.json", "[1,1,25,1]"));
    FAIL() << "expected LabelMismatch";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::LabelMismatch);
  }
}

TEST_F(MeshFiles, LabelCountMismatch) {
  try {
    load_mesh(write("m.obj", kSquareObj), write("l.json", "[1,1,1]"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::LabelMismatch);
  }
}

TEST_F(MeshFiles, FaceIndexBeyondVertexCountIsParseError) {
  std::string obj;
  for (int i = 0; i < 8; ++i) obj += "v " + std::to_string(i) + " 0 " + std::to_string(i % 2) + "\n";
  obj += "f 1 2 3\nf 2 3 9\n";
  try {
    load_mesh(write("m.obj", obj), write("l.json", "[1,1,1,1,1,1,1,1]"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ParseError);
  }
}

TEST_F(MeshFiles, MalformedInputs) {
  EXPECT_THROW(load_mesh(write("a.obj", "v 0 0\n"), write("l.json", "[1]")), Error);
  EXPECT_THROW(load_mesh(write("b.obj", "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 1 1 0\nf 1 2 3 4\n"), write("l.json", "[1,1,1,1]")),
               Error);
  EXPECT_THROW(load_mesh(write("c.obj", kSquareObj), write("l.json", "[1,1,1,")), Error);
  EXPECT_THROW(load_mesh(write("d.obj", kSquareObj), write("l.json", "[1,1.5,1,1]")), Error);
  EXPECT_THROW(load_mesh(dir_ / "missing.obj", write("l.json", "[1]")), Error);
}

TEST(Mesh, DegenerateFaceRejected) {
  EXPECT_THROW(SurfaceMesh::create({Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)}, {{0, 1, 1}}, {1, 1, 1}), Error);
}

TEST(Mesh, ReferencedVertexNeedsLabel) {
  try {
    SurfaceMesh::create({Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)}, {{0, 1, 2}}, {1, 0, 1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::LabelMismatch);
  }
}

TEST(Mesh, DisconnectedPartRejected) {
  // 1x4 strip: columns 0 and 3 labelled 1, the middle labelled 2.
  try {
    testing::grid(2, 4, 1.0, [](int, int c) { return (c == 0 || c == 3) ? 1 : 2; });
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::DisconnectedPart);
  }
}

TEST(Mesh, BoundaryFacesBelongToNoPart) {
  const auto mesh = testing::grid(2, 3, 1.0, [](int, int c) { return c < 2 ? 1 : 2; });
  int straddling = 0;
  for (std::size_t f = 0; f < mesh.face_count(); ++f)
    if (mesh.face_part(static_cast<FaceId>(f)).is_background()) ++straddling;
  EXPECT_EQ(straddling, 2);
  EXPECT_EQ(mesh.part_faces(PartId(1)).size(), 2u);
  EXPECT_TRUE(mesh.part_faces(PartId(2)).empty());
}

TEST(Mesh, PartIdRange) {
  EXPECT_THROW(PartId(25), Error);
  EXPECT_THROW(PartId(-1), Error);
  EXPECT_TRUE(PartId(0).is_background());
  EXPECT_LT(PartId(3), PartId(4));
}

TEST(Mesh, SubdivisionKeepsOriginalsAndParts) {
  const auto coarse = testing::grid(3, 3, 1.0, [](int r, int) { return r == 0 ? 1 : 2; });
  const auto fine = subdivide_midpoints(coarse);
  EXPECT_EQ(fine.face_count(), coarse.face_count() * 4);
  for (std::size_t v = 0; v < coarse.vertex_count(); ++v) {
    EXPECT_EQ(fine.vertices()[v], coarse.vertices()[v]);
    EXPECT_EQ(fine.labels()[v], coarse.labels()[v]);
  }
  // 9 vertices + 16 unique edges
  EXPECT_EQ(fine.vertex_count(), 25u);
}

TEST(Mesh, ObjRoundTrip) {
  const auto mesh = testing::ellipsoid(5, 8, Vec3(0.3, 0.2, 0.1), 2);
  const auto again = parse_obj(to_obj(mesh));
  EXPECT_EQ(again.faces, mesh.faces());
  ASSERT_EQ(again.vertices.size(), mesh.vertex_count());
  for (std::size_t i = 0; i < again.vertices.size(); ++i) EXPECT_EQ(again.vertices[i], mesh.vertices()[i]);
}

}  // namespace
}  // namespace densecorr
