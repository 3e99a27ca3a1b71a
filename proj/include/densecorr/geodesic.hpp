#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <queue>
#include <vector>

#include <Eigen/Core>

#include "densecorr/mesh.hpp"
#include "densecorr/surface_point.hpp"

namespace densecorr {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Single-source distances over the vertex-edge graph. Unreachable vertices hold +inf.
struct GeodesicField {
  VertexId source = 0;
  std::vector<double> distance;
};

namespace detail {

// Path length kept as an unevaluated sum hi + lo so that the reported value
// is the correctly rounded graph distance regardless of summation order.
struct PathLength {
  double hi = 0.0;
  double lo = 0.0;

  PathLength plus(double w) const {
    const double s = hi + w;
    const double bb = s - hi;
    const double err = (hi - (s - bb)) + (w - bb);
    const double low = lo + err;
    const double top = s + low;
    return PathLength{top, low - (top - s)};
  }

  friend bool operator<(const PathLength& a, const PathLength& b) {
    return a.hi < b.hi || (a.hi == b.hi && a.lo < b.lo);
  }
  friend bool operator==(const PathLength& a, const PathLength& b) { return a.hi == b.hi && a.lo == b.lo; }
};

struct QueueEntry {
  PathLength length;
  VertexId vertex;
  bool operator>(const QueueEntry& other) const {
    if (other.length < length) return true;
    if (length < other.length) return false;
    return vertex > other.vertex;
  }
};

inline void check_vertex(const SurfaceMesh& mesh, VertexId v) {
  if (!mesh.contains(v))
    fail(Errc::IndexOutOfRange, "vertex " + std::to_string(v) + " outside mesh of " +
                                    std::to_string(mesh.vertex_count()) + " vertices");
}

// Dijkstra; stops early once `target` is settled when target >= 0.
inline std::vector<double> dijkstra(const SurfaceMesh& mesh, VertexId source, VertexId target) {
  const auto n = mesh.vertex_count();
  const PathLength unreached{kInfinity, 0.0};
  std::vector<PathLength> best(n, unreached);
  std::vector<bool> settled(n, false);
  std::priority_queue<QueueEntry, std::vector<QueueEntry>, std::greater<>> queue;
  best[static_cast<std::size_t>(source)] = PathLength{};
  queue.push({PathLength{}, source});
  while (!queue.empty()) {
    const QueueEntry top = queue.top();
    queue.pop();
    const auto u = static_cast<std::size_t>(top.vertex);
    if (settled[u]) continue;
    settled[u] = true;
    if (top.vertex == target) break;
    for (const Neighbor& nb : mesh.neighbors(top.vertex)) {
      const auto w = static_cast<std::size_t>(nb.vertex);
      if (settled[w]) continue;
      const PathLength candidate = best[u].plus(nb.length);
      if (candidate < best[w]) {
        best[w] = candidate;
        queue.push({candidate, nb.vertex});
      }
    }
  }
  std::vector<double> distance(n);
  for (std::size_t i = 0; i < n; ++i) distance[i] = best[i].hi;
  return distance;
}

}  // namespace detail

inline GeodesicField geodesic_from(const SurfaceMesh& mesh, VertexId source) {
  detail::check_vertex(mesh, source);
  return GeodesicField{source, detail::dijkstra(mesh, source, -1)};
}

inline double geodesic_between(const SurfaceMesh& mesh, VertexId i, VertexId j) {
  detail::check_vertex(mesh, i);
  detail::check_vertex(mesh, j);
  if (i == j) return 0.0;
  return detail::dijkstra(mesh, i, j)[static_cast<std::size_t>(j)];
}

/// Pairwise distances between the vertices of one part, ordered as
/// `mesh.part_vertices(part)`. Paths may cross neighbouring parts.
inline Eigen::MatrixXd part_distance_matrix(const SurfaceMesh& mesh, PartId part) {
  if (!part.is_surface()) fail(Errc::InvalidArgument, "part distance matrix needs a part in 1..24");
  const auto& members = mesh.part_vertices(part);
  const auto n = static_cast<Eigen::Index>(members.size());
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto row = detail::dijkstra(mesh, members[static_cast<std::size_t>(r)], -1);
    for (Eigen::Index c = 0; c < n; ++c) {
      const double value = row[static_cast<std::size_t>(members[static_cast<std::size_t>(c)])];
      if (!std::isfinite(value))
        fail(Errc::DisconnectedPart, "part " + std::to_string(part.value()) + " has unreachable vertex pairs");
      d(r, c) = value;
    }
  }
  // Both triangles hold correctly rounded values of the same path length;
  // mirror anyway so the matrix is symmetric bit for bit.
  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index c = r + 1; c < n; ++c) d(c, r) = d(r, c);
  return d;
}

/// Nearest source for every vertex (distance, index into `sources`);
/// ties go to the lower source index, unreachable vertices get (inf, -1).
struct NearestSource {
  std::vector<double> distance;
  std::vector<int> source;
};

inline NearestSource nearest_sources(const SurfaceMesh& mesh, std::span<const VertexId> sources) {
  const auto n = mesh.vertex_count();
  struct Entry {
    detail::PathLength length;
    int source;
    VertexId vertex;
    bool operator>(const Entry& o) const {
      if (o.length < length) return true;
      if (length < o.length) return false;
      if (source != o.source) return source > o.source;
      return vertex > o.vertex;
    }
  };
  auto better = [](const detail::PathLength& a, int sa, const detail::PathLength& b, int sb) {
    return a < b || (a == b && sa < sb);
  };
  std::vector<detail::PathLength> best(n, detail::PathLength{kInfinity, 0.0});
  std::vector<int> owner(n, -1);
  std::vector<bool> settled(n, false);
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> queue;
  for (std::size_t s = 0; s < sources.size(); ++s) {
    detail::check_vertex(mesh, sources[s]);
    const auto v = static_cast<std::size_t>(sources[s]);
    if (owner[v] < 0) {
      best[v] = detail::PathLength{};
      owner[v] = static_cast<int>(s);
      queue.push({best[v], static_cast<int>(s), sources[s]});
    }
  }
  while (!queue.empty()) {
    const Entry top = queue.top();
    queue.pop();
    const auto u = static_cast<std::size_t>(top.vertex);
    if (settled[u]) continue;
    settled[u] = true;
    for (const Neighbor& nb : mesh.neighbors(top.vertex)) {
      const auto w = static_cast<std::size_t>(nb.vertex);
      if (settled[w]) continue;
      const auto candidate = best[u].plus(nb.length);
      if (better(candidate, owner[u], best[w], owner[w])) {
        best[w] = candidate;
        owner[w] = owner[u];
        queue.push({candidate, owner[u], nb.vertex});
      }
    }
  }
  NearestSource result{std::vector<double>(n), std::move(owner)};
  for (std::size_t i = 0; i < n; ++i) result.distance[i] = best[i].hi;
  return result;
}

/// Distance between two points on faces. Exact within one face and across a
/// shared edge (by unfolding); otherwise the shortest route through the
/// faces' corners over the vertex graph.
inline double surface_distance(const SurfaceMesh& mesh, const SurfacePoint& a, const SurfacePoint& b) {
  const Vec3 pa = a.position(mesh);
  const Vec3 pb = b.position(mesh);
  if (a.face == b.face) return (pa - pb).norm();

  const Face& fa = mesh.face(a.face);
  const Face& fb = mesh.face(b.face);
  double best = kInfinity;

  std::vector<VertexId> shared;
  for (VertexId u : fa)
    for (VertexId w : fb)
      if (u == w) shared.push_back(u);

  if (shared.size() == 2) {
    const Vec3 u = mesh.position(shared[0]);
    const Vec3 w = mesh.position(shared[1]);
    const Vec3 axis = (w - u).normalized();
    const double length = (w - u).norm();
    const double xa = (pa - u).dot(axis);
    const double ya = ((pa - u) - xa * axis).norm();
    const double xb = (pb - u).dot(axis);
    const double yb = -((pb - u) - xb * axis).norm();
    const double span = ya - yb;
    const double cross = span > 0.0 ? xa + (xb - xa) * (ya / span) : xa;
    if (cross >= 0.0 && cross <= length) {
      best = std::hypot(xa - xb, ya - yb);
    } else {
      best = std::min((pa - u).norm() + (pb - u).norm(), (pa - w).norm() + (pb - w).norm());
    }
  }

  for (VertexId u : fa) {
    const auto field = detail::dijkstra(mesh, u, -1);
    const double lead = (pa - mesh.position(u)).norm();
    for (VertexId w : fb) {
      const double route = lead + field[static_cast<std::size_t>(w)] + (pb - mesh.position(w)).norm();
      best = std::min(best, route);
    }
  }
  return best;
}

}  // namespace densecorr
