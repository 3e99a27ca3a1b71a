#pragma once

#include <array>
#include <cmath>

#include "densecorr/mesh.hpp"

namespace densecorr {

/// A point on the mesh given by a face and barycentric weights of its corners.
struct SurfacePoint {
  FaceId face = -1;
  std::array<double, 3> weights{1.0, 0.0, 0.0};

  Vec3 position(const SurfaceMesh& mesh) const {
    const Face& f = mesh.face(face);
    return weights[0] * mesh.position(f[0]) + weights[1] * mesh.position(f[1]) + weights[2] * mesh.position(f[2]);
  }

  /// Corner carrying the largest weight; ties go to the lower vertex id.
  VertexId nearest_vertex(const SurfaceMesh& mesh) const {
    const Face& f = mesh.face(face);
    std::size_t pick = 0;
    for (std::size_t k = 1; k < 3; ++k) {
      if (weights[k] > weights[pick] || (weights[k] == weights[pick] && f[k] < f[pick])) pick = k;
    }
    return f[pick];
  }

  PartId part(const SurfaceMesh& mesh) const { return mesh.face_part(face); }
};

inline bool weights_valid(const std::array<double, 3>& w, double tolerance = 1e-6) {
  for (double x : w)
    if (!(x >= -tolerance)) return false;
  return std::abs(w[0] + w[1] + w[2] - 1.0) <= tolerance;
}

/// Throws unless the point sits on an existing single-part face with valid weights.
inline void validate(const SurfaceMesh& mesh, const SurfacePoint& p) {
  if (p.face < 0 || static_cast<std::size_t>(p.face) >= mesh.face_count())
    fail(Errc::IndexOutOfRange, "face " + std::to_string(p.face) + " outside mesh");
  if (!weights_valid(p.weights)) fail(Errc::InvalidArgument, "barycentric weights must be non-negative and sum to 1");
  if (!mesh.face_part(p.face).is_surface())
    fail(Errc::InvalidArgument, "face " + std::to_string(p.face) + " straddles a part boundary");
}

}  // namespace densecorr
