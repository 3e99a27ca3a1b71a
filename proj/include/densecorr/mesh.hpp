#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "densecorr/error.hpp"

namespace densecorr {

using Vec3 = Eigen::Vector3d;
using VertexId = std::int32_t;
using FaceId = std::int32_t;
using Face = std::array<VertexId, 3>;

inline constexpr int kPartCount = 24;

/// Body-part label: 0 is background, 1..24 are surface parts.
class PartId {
 public:
  constexpr PartId() = default;
  constexpr explicit PartId(int value) : value_(value) {
    if (value < 0 || value > kPartCount) fail(Errc::InvalidArgument, "part id " + std::to_string(value) + " outside 0..24");
  }

  constexpr int value() const noexcept { return value_; }
  constexpr bool is_background() const noexcept { return value_ == 0; }
  constexpr bool is_surface() const noexcept { return value_ > 0; }

  friend constexpr auto operator<=>(PartId, PartId) = default;

 private:
  int value_ = 0;
};

/// One undirected edge as seen from a vertex.
struct Neighbor {
  VertexId vertex;
  double length;
};

/// Triangle mesh with one part label per vertex. Immutable once created;
/// the factory validates every structural invariant.
class SurfaceMesh {
 public:
  static SurfaceMesh create(std::vector<Vec3> vertices, std::vector<Face> faces, std::vector<int> labels) {
    SurfaceMesh mesh;
    mesh.vertices_ = std::move(vertices);
    mesh.faces_ = std::move(faces);
    mesh.labels_ = std::move(labels);
    mesh.validate_and_index();
    return mesh;
  }

  std::size_t vertex_count() const noexcept { return vertices_.size(); }
  std::size_t face_count() const noexcept { return faces_.size(); }
  const std::vector<Vec3>& vertices() const noexcept { return vertices_; }
  const std::vector<Face>& faces() const noexcept { return faces_; }
  const std::vector<int>& labels() const noexcept { return labels_; }

  const Vec3& position(VertexId v) const { return vertices_.at(static_cast<std::size_t>(v)); }
  const Face& face(FaceId f) const { return faces_.at(static_cast<std::size_t>(f)); }
  PartId part_of(VertexId v) const { return PartId(labels_.at(static_cast<std::size_t>(v))); }

  /// Part shared by all three corners, or background for faces straddling a part boundary.
  PartId face_part(FaceId f) const { return PartId(face_parts_.at(static_cast<std::size_t>(f))); }

  std::span<const Neighbor> neighbors(VertexId v) const {
    const auto begin = adjacency_offsets_.at(static_cast<std::size_t>(v));
    const auto end = adjacency_offsets_.at(static_cast<std::size_t>(v) + 1);
    return std::span<const Neighbor>(adjacency_).subspan(begin, end - begin);
  }

  bool contains(VertexId v) const noexcept { return v >= 0 && static_cast<std::size_t>(v) < vertices_.size(); }

  /// Sorted vertex ids carrying the given label.
  const std::vector<VertexId>& part_vertices(PartId part) const {
    return part_vertices_.at(static_cast<std::size_t>(part.value()));
  }

  /// Faces whose three corners all carry the given label.
  const std::vector<FaceId>& part_faces(PartId part) const {
    return part_faces_.at(static_cast<std::size_t>(part.value()));
  }

  bool has_part(PartId part) const { return part.is_surface() && !part_vertices(part).empty(); }

 private:
  void validate_and_index();

  std::vector<Vec3> vertices_;
  std::vector<Face> faces_;
  std::vector<int> labels_;
  std::vector<int> face_parts_;
  std::vector<std::size_t> adjacency_offsets_;
  std::vector<Neighbor> adjacency_;
  std::vector<std::vector<VertexId>> part_vertices_;
  std::vector<std::vector<FaceId>> part_faces_;
};

inline void SurfaceMesh::validate_and_index() {
  const auto n = vertices_.size();
  if (labels_.size() != n) {
    fail(Errc::LabelMismatch,
         std::to_string(labels_.size()) + " labels for " + std::to_string(n) + " vertices");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (labels_[i] < 0 || labels_[i] > kPartCount)
      fail(Errc::LabelMismatch, "vertex " + std::to_string(i) + " has label " + std::to_string(labels_[i]));
    if (!vertices_[i].allFinite()) fail(Errc::ParseError, "vertex " + std::to_string(i) + " is not finite");
  }

  std::vector<std::pair<VertexId, VertexId>> edges;
  edges.reserve(faces_.size() * 3);
  std::vector<bool> referenced(n, false);
  face_parts_.assign(faces_.size(), 0);
  for (std::size_t f = 0; f < faces_.size(); ++f) {
    const Face& face = faces_[f];
    for (VertexId v : face) {
      if (v < 0 || static_cast<std::size_t>(v) >= n)
        fail(Errc::ParseError, "face " + std::to_string(f) + " references vertex " + std::to_string(v) +
                                   " of " + std::to_string(n));
      referenced[static_cast<std::size_t>(v)] = true;
    }
    if (face[0] == face[1] || face[1] == face[2] || face[0] == face[2])
      fail(Errc::ParseError, "face " + std::to_string(f) + " is degenerate");
    for (int k = 0; k < 3; ++k) {
      const VertexId a = face[static_cast<std::size_t>(k)];
      const VertexId b = face[static_cast<std::size_t>((k + 1) % 3)];
      edges.emplace_back(std::min(a, b), std::max(a, b));
    }
    const int l0 = labels_[static_cast<std::size_t>(face[0])];
    if (l0 == labels_[static_cast<std::size_t>(face[1])] && l0 == labels_[static_cast<std::size_t>(face[2])])
      face_parts_[f] = l0;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (referenced[i] && labels_[i] == 0)
      fail(Errc::LabelMismatch, "vertex " + std::to_string(i) + " is used by a face but has no part label");
  }

  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

  std::vector<std::size_t> degree(n, 0);
  for (const auto& [a, b] : edges) {
    ++degree[static_cast<std::size_t>(a)];
    ++degree[static_cast<std::size_t>(b)];
  }
  adjacency_offsets_.assign(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) adjacency_offsets_[i + 1] = adjacency_offsets_[i] + degree[i];
  adjacency_.resize(adjacency_offsets_[n]);
  std::vector<std::size_t> cursor(adjacency_offsets_.begin(), adjacency_offsets_.end() - 1);
  for (const auto& [a, b] : edges) {
    const double length = (vertices_[static_cast<std::size_t>(a)] - vertices_[static_cast<std::size_t>(b)]).norm();
    adjacency_[cursor[static_cast<std::size_t>(a)]++] = Neighbor{b, length};
    adjacency_[cursor[static_cast<std::size_t>(b)]++] = Neighbor{a, length};
  }

  part_vertices_.assign(kPartCount + 1, {});
  part_faces_.assign(kPartCount + 1, {});
  for (std::size_t i = 0; i < n; ++i) part_vertices_[static_cast<std::size_t>(labels_[i])].push_back(static_cast<VertexId>(i));
  for (std::size_t f = 0; f < faces_.size(); ++f) {
    if (face_parts_[f] > 0) part_faces_[static_cast<std::size_t>(face_parts_[f])].push_back(static_cast<FaceId>(f));
  }

  // Each part's subgraph must be connected (flood fill over same-label edges).
  std::vector<int> seen(n, 0);
  for (int part = 1; part <= kPartCount; ++part) {
    const auto& members = part_vertices_[static_cast<std::size_t>(part)];
    if (members.empty()) continue;
    std::vector<VertexId> stack{members.front()};
    seen[static_cast<std::size_t>(members.front())] = part;
    std::size_t reached = 1;
    while (!stack.empty()) {
      const VertexId v = stack.back();
      stack.pop_back();
      for (const Neighbor& nb : neighbors(v)) {
        const auto w = static_cast<std::size_t>(nb.vertex);
        if (labels_[w] == part && seen[w] != part) {
          seen[w] = part;
          ++reached;
          stack.push_back(nb.vertex);
        }
      }
    }
    if (reached != members.size())
      fail(Errc::DisconnectedPart, "part " + std::to_string(part) + " splits into several components (" +
                                       std::to_string(reached) + " of " + std::to_string(members.size()) +
                                       " vertices reachable)");
  }
}

namespace detail {

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::IoError, "cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

inline double parse_double(std::string_view token, std::size_t line) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size())
    fail(Errc::ParseError, "line " + std::to_string(line) + ": bad number '" + std::string(token) + "'");
  return value;
}

inline long parse_index(std::string_view token, std::size_t line) {
  // "a/b/c" face corners keep only the position index.
  token = token.substr(0, token.find('/'));
  long value = 0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size())
    fail(Errc::ParseError, "line " + std::to_string(line) + ": bad index '" + std::string(token) + "'");
  return value;
}

}  // namespace detail

struct ObjGeometry {
  std::vector<Vec3> vertices;
  std::vector<Face> faces;
};

/// Reads "v x y z" / "f a b c" lines; everything else is ignored.
inline ObjGeometry parse_obj(std::string_view text) {
  ObjGeometry geometry;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto end = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    std::vector<std::string_view> tokens;
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
      const auto start = i;
      while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
      if (i > start) tokens.push_back(line.substr(start, i - start));
    }
    if (tokens.empty() || tokens[0].front() == '#') continue;

    if (tokens[0] == "v") {
      if (tokens.size() < 4) fail(Errc::ParseError, "line " + std::to_string(line_no) + ": vertex needs 3 coordinates");
      geometry.vertices.emplace_back(detail::parse_double(tokens[1], line_no), detail::parse_double(tokens[2], line_no),
                                     detail::parse_double(tokens[3], line_no));
    } else if (tokens[0] == "f") {
      if (tokens.size() != 4) fail(Errc::ParseError, "line " + std::to_string(line_no) + ": only triangles are supported");
      Face face{};
      for (std::size_t k = 0; k < 3; ++k) {
        const long index = detail::parse_index(tokens[k + 1], line_no);
        if (index < 1) fail(Errc::ParseError, "line " + std::to_string(line_no) + ": face indices are 1-based");
        face[k] = static_cast<VertexId>(index - 1);
      }
      geometry.faces.push_back(face);
    }
    if (end == text.size()) break;
  }
  return geometry;
}

inline std::vector<int> parse_labels(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::ParseError, std::string("labels: ") + e.what());
  }
  if (!doc.is_array()) fail(Errc::ParseError, "labels: expected a JSON array");
  std::vector<int> labels;
  labels.reserve(doc.size());
  for (std::size_t i = 0; i < doc.size(); ++i) {
    if (!doc[i].is_number_integer()) fail(Errc::ParseError, "labels[" + std::to_string(i) + "] is not an integer");
    const auto value = doc[i].get<long long>();
    if (value < 0 || value > kPartCount)
      fail(Errc::LabelMismatch, "labels[" + std::to_string(i) + "] = " + std::to_string(value) + " outside 0..24");
    labels.push_back(static_cast<int>(value));
  }
  return labels;
}

inline SurfaceMesh load_mesh(const std::filesystem::path& mesh_file, const std::filesystem::path& labels_file) {
  auto geometry = parse_obj(detail::read_text_file(mesh_file));
  auto labels = parse_labels(detail::read_text_file(labels_file));
  return SurfaceMesh::create(std::move(geometry.vertices), std::move(geometry.faces), std::move(labels));
}

inline std::string to_obj(const SurfaceMesh& mesh) {
  std::ostringstream out;
  out.precision(17);
  for (const Vec3& p : mesh.vertices()) out << "v " << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
  for (const Face& f : mesh.faces()) out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
  return out.str();
}

/// One level of edge-midpoint subdivision. Original vertices keep their ids;
/// a midpoint takes the label of its lower-labelled endpoint, which keeps
/// every part subgraph connected.
inline SurfaceMesh subdivide_midpoints(const SurfaceMesh& mesh) {
  std::vector<Vec3> vertices = mesh.vertices();
  std::vector<int> labels = mesh.labels();
  std::map<std::pair<VertexId, VertexId>, VertexId> midpoints;
  auto midpoint = [&](VertexId a, VertexId b) {
    const auto key = std::make_pair(std::min(a, b), std::max(a, b));
    if (auto it = midpoints.find(key); it != midpoints.end()) return it->second;
    const auto id = static_cast<VertexId>(vertices.size());
    vertices.push_back(0.5 * (mesh.position(a) + mesh.position(b)));
    const int la = mesh.labels()[static_cast<std::size_t>(a)];
    const int lb = mesh.labels()[static_cast<std::size_t>(b)];
    labels.push_back(std::min(la, lb));
    midpoints.emplace(key, id);
    return id;
  };
  std::vector<Face> faces;
  faces.reserve(mesh.face_count() * 4);
  for (const Face& f : mesh.faces()) {
    const VertexId ab = midpoint(f[0], f[1]);
    const VertexId bc = midpoint(f[1], f[2]);
    const VertexId ca = midpoint(f[2], f[0]);
    faces.push_back({f[0], ab, ca});
    faces.push_back({ab, f[1], bc});
    faces.push_back({ca, bc, f[2]});
    faces.push_back({ab, bc, ca});
  }
  return SurfaceMesh::create(std::move(vertices), std::move(faces), std::move(labels));
}

}  // namespace densecorr
