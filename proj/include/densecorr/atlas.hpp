#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <future>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>
#include <json.hpp>

#include "densecorr/geodesic.hpp"
#include "densecorr/mds.hpp"
#include "densecorr/mesh.hpp"

namespace densecorr {

enum class ChartSource { Supplied, Mds };

inline std::string_view to_string(ChartSource source) { return source == ChartSource::Supplied ? "supplied" : "mds"; }

/// UV coordinates for the vertices of one part.
struct PartChart {
  PartId part;
  std::vector<VertexId> vertex_ids;
  std::vector<Vec2> uv;
  ChartSource source = ChartSource::Mds;

  std::size_t size() const noexcept { return vertex_ids.size(); }
  bool empty() const noexcept { return vertex_ids.empty(); }
};

/// Where a vertex lives inside the atlas.
struct ChartSlot {
  int part = 0;
  std::size_t index = 0;
};

/// The 24 part charts plus a reverse vertex lookup.
class UVAtlas {
 public:
  UVAtlas() {
    for (int p = 1; p <= kPartCount; ++p) charts_[static_cast<std::size_t>(p - 1)].part = PartId(p);
  }

  /// Takes exactly one chart per part id 1..24 (any order).
  static UVAtlas from_charts(std::vector<PartChart> charts) {
    UVAtlas atlas;
    std::array<bool, kPartCount> seen{};
    for (auto& chart : charts) {
      if (!chart.part.is_surface()) fail(Errc::SchemaError, "chart part id must be in 1..24");
      const auto slot = static_cast<std::size_t>(chart.part.value() - 1);
      if (seen[slot]) fail(Errc::ChartConflict, "part " + std::to_string(chart.part.value()) + " appears twice");
      seen[slot] = true;
      atlas.charts_[slot] = std::move(chart);
    }
    atlas.reindex();
    return atlas;
  }

  const PartChart& chart(PartId part) const {
    if (!part.is_surface()) fail(Errc::InvalidArgument, "background has no chart");
    return charts_[static_cast<std::size_t>(part.value() - 1)];
  }
  const std::array<PartChart, kPartCount>& charts() const noexcept { return charts_; }

  std::optional<ChartSlot> slot_of(VertexId v) const {
    if (v < 0 || static_cast<std::size_t>(v) >= slots_.size() || slots_[static_cast<std::size_t>(v)].part == 0)
      return std::nullopt;
    return slots_[static_cast<std::size_t>(v)];
  }

  std::optional<Vec2> uv_of(VertexId v) const {
    const auto slot = slot_of(v);
    if (!slot) return std::nullopt;
    return charts_[static_cast<std::size_t>(slot->part - 1)].uv[slot->index];
  }

  friend bool operator==(const UVAtlas& a, const UVAtlas& b) {
    for (std::size_t i = 0; i < a.charts_.size(); ++i) {
      const auto& x = a.charts_[i];
      const auto& y = b.charts_[i];
      if (x.part != y.part || x.source != y.source || x.vertex_ids != y.vertex_ids || x.uv.size() != y.uv.size())
        return false;
      for (std::size_t k = 0; k < x.uv.size(); ++k)
        if (x.uv[k].x() != y.uv[k].x() || x.uv[k].y() != y.uv[k].y()) return false;
    }
    return true;
  }

 private:
  void reindex() {
    VertexId max_vertex = -1;
    for (const auto& chart : charts_) {
      if (chart.uv.size() != chart.vertex_ids.size())
        fail(Errc::SchemaError, "part " + std::to_string(chart.part.value()) + ": uv count differs from vertex count");
      for (VertexId v : chart.vertex_ids) {
        if (v < 0) fail(Errc::SchemaError, "negative vertex id in chart");
        max_vertex = std::max(max_vertex, v);
      }
      for (const Vec2& uv : chart.uv)
        if (!(uv.x() >= 0.0 && uv.x() <= 1.0 && uv.y() >= 0.0 && uv.y() <= 1.0))
          fail(Errc::SchemaError, "part " + std::to_string(chart.part.value()) + ": uv outside [0,1]");
    }
    slots_.assign(static_cast<std::size_t>(max_vertex + 1), ChartSlot{});
    for (const auto& chart : charts_) {
      for (std::size_t k = 0; k < chart.vertex_ids.size(); ++k) {
        auto& slot = slots_[static_cast<std::size_t>(chart.vertex_ids[k])];
        if (slot.part != 0)
          fail(Errc::ChartConflict, "vertex " + std::to_string(chart.vertex_ids[k]) + " appears in more than one chart");
        slot = ChartSlot{chart.part.value(), k};
      }
    }
  }

  std::array<PartChart, kPartCount> charts_;
  std::vector<ChartSlot> slots_;
};

/// Rotates the principal axis of the point cloud onto U, then reflects so
/// that the first point off each bounding-box midline lies on the low side.
inline std::vector<Vec2> orient_embedding(std::vector<Vec2> points) {
  if (points.size() < 2) return points;
  Vec2 mean = Vec2::Zero();
  for (const Vec2& p : points) mean += p;
  mean /= static_cast<double>(points.size());
  Eigen::Matrix2d covariance = Eigen::Matrix2d::Zero();
  for (const Vec2& p : points) covariance += (p - mean) * (p - mean).transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> solver(covariance);
  const Vec2 major = solver.eigenvectors().col(1);
  const Vec2 minor(-major.y(), major.x());
  for (Vec2& p : points) p = Vec2((p - mean).dot(major), (p - mean).dot(minor));

  Vec2 lo = points.front();
  Vec2 hi = points.front();
  for (const Vec2& p : points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const Vec2 center = 0.5 * (lo + hi);
  const double eps = 1e-12 * std::max((hi - lo).maxCoeff(), 1e-300);
  for (int axis = 0; axis < 2; ++axis) {
    for (const Vec2& p : points) {
      const double offset = p(axis) - center(axis);
      if (std::abs(offset) <= eps) continue;
      if (offset > 0.0)
        for (Vec2& q : points) q(axis) = 2.0 * center(axis) - q(axis);
      break;
    }
  }
  return points;
}

/// Fits the bounding box into the unit square, aspect preserved and centred.
inline std::vector<Vec2> normalize_chart(const std::vector<Vec2>& points) {
  std::vector<Vec2> uv(points.size(), Vec2(0.5, 0.5));
  if (points.empty()) return uv;
  Vec2 lo = points.front();
  Vec2 hi = points.front();
  for (const Vec2& p : points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const double extent = (hi - lo).maxCoeff();
  if (!(extent > 0.0)) return uv;
  const Vec2 center = 0.5 * (lo + hi);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Vec2 q = (points[i] - center) / extent + Vec2(0.5, 0.5);
    uv[i] = q.cwiseMax(0.0).cwiseMin(1.0);
  }
  return uv;
}

/// Unwraps one part of the mesh through its geodesic distance matrix.
inline PartChart unwrap_chart(const SurfaceMesh& mesh, PartId part, const MdsOptions& options = {}) {
  PartChart chart;
  chart.part = part;
  chart.source = ChartSource::Mds;
  chart.vertex_ids = mesh.part_vertices(part);
  if (chart.vertex_ids.empty()) return chart;
  const auto embedding = unwrap_part(part_distance_matrix(mesh, part), options);
  chart.uv = normalize_chart(orient_embedding(embedding.points));
  return chart;
}

namespace detail {

inline void check_supplied_chart(const SurfaceMesh& mesh, const PartChart& chart) {
  const int part = chart.part.value();
  std::set<VertexId> ids;
  for (VertexId v : chart.vertex_ids) {
    if (!mesh.contains(v)) fail(Errc::IndexOutOfRange, "supplied chart " + std::to_string(part) + " references vertex " + std::to_string(v));
    if (mesh.part_of(v).value() != part)
      fail(Errc::ChartConflict, "supplied chart " + std::to_string(part) + " claims vertex " + std::to_string(v) +
                                    " labelled " + std::to_string(mesh.part_of(v).value()));
    if (!ids.insert(v).second) fail(Errc::ChartConflict, "supplied chart " + std::to_string(part) + " lists vertex " + std::to_string(v) + " twice");
  }
  if (ids.size() != mesh.part_vertices(chart.part).size())
    fail(Errc::ChartConflict, "supplied chart " + std::to_string(part) + " does not cover every vertex of its part");
}

}  // namespace detail

/// Supplied charts are taken verbatim; every other part is unwrapped by MDS.
inline UVAtlas build_atlas(const SurfaceMesh& mesh, const std::vector<PartChart>& supplied = {},
                           const MdsOptions& options = {}) {
  std::array<std::optional<PartChart>, kPartCount> given;
  for (const auto& chart : supplied) {
    if (!chart.part.is_surface()) fail(Errc::SchemaError, "supplied chart part id must be in 1..24");
    auto& slot = given[static_cast<std::size_t>(chart.part.value() - 1)];
    if (slot) fail(Errc::ChartConflict, "part " + std::to_string(chart.part.value()) + " supplied twice");
    detail::check_supplied_chart(mesh, chart);
    slot = chart;
    slot->source = ChartSource::Supplied;
  }

  std::vector<std::future<PartChart>> pending;
  std::vector<PartChart> charts;
  for (int p = 1; p <= kPartCount; ++p) {
    if (const auto& chart = given[static_cast<std::size_t>(p - 1)]) {
      charts.push_back(*chart);
    } else {
      pending.push_back(std::async(std::launch::async, [&mesh, p, options] { return unwrap_chart(mesh, PartId(p), options); }));
    }
  }
  for (auto& job : pending) charts.push_back(job.get());
  return UVAtlas::from_charts(std::move(charts));
}

/// Chart vertex closest to (u, v) in UV space; ties go to the lowest vertex id.
inline VertexId uv_to_vertex(const UVAtlas& atlas, PartId part, double u, double v) {
  if (!(u >= 0.0 && u <= 1.0 && v >= 0.0 && v <= 1.0)) fail(Errc::InvalidArgument, "uv query outside [0,1]");
  const PartChart& chart = atlas.chart(part);
  if (chart.empty()) fail(Errc::EmptyChart, "chart " + std::to_string(part.value()) + " is empty");
  const Vec2 query(u, v);
  VertexId best = -1;
  double best_distance = kInfinity;
  for (std::size_t k = 0; k < chart.size(); ++k) {
    const double d = (chart.uv[k] - query).squaredNorm();
    if (d < best_distance || (d == best_distance && chart.vertex_ids[k] < best)) {
      best_distance = d;
      best = chart.vertex_ids[k];
    }
  }
  return best;
}

// JSON form: {"charts": [{"part_id": p, "source": "mds", "entries": [[vertex, u, v], ...]}]}.
// A bare array of chart objects is accepted on input; "source" is optional.

inline nlohmann::json chart_to_json(const PartChart& chart, bool with_source = true) {
  nlohmann::json entries = nlohmann::json::array();
  for (std::size_t k = 0; k < chart.size(); ++k)
    entries.push_back(nlohmann::json::array({chart.vertex_ids[k], chart.uv[k].x(), chart.uv[k].y()}));
  nlohmann::json out{{"part_id", chart.part.value()}, {"entries", std::move(entries)}};
  if (with_source) out["source"] = std::string(to_string(chart.source));
  return out;
}

inline nlohmann::json atlas_to_json(const UVAtlas& atlas) {
  nlohmann::json charts = nlohmann::json::array();
  for (const auto& chart : atlas.charts()) charts.push_back(chart_to_json(chart));
  return nlohmann::json{{"charts", std::move(charts)}};
}

inline std::vector<PartChart> charts_from_json(const nlohmann::json& doc) {
  const nlohmann::json& list = doc.is_object() && doc.contains("charts") ? doc.at("charts") : doc;
  if (!list.is_array()) fail(Errc::SchemaError, "/charts: expected an array of charts");
  std::vector<PartChart> charts;
  for (std::size_t c = 0; c < list.size(); ++c) {
    const auto& item = list[c];
    const std::string where = "/charts/" + std::to_string(c);
    if (!item.is_object() || !item.contains("part_id") || !item["part_id"].is_number_integer())
      fail(Errc::SchemaError, where + "/part_id: missing or not an integer");
    const int part = item["part_id"].get<int>();
    if (part < 1 || part > kPartCount) fail(Errc::SchemaError, where + "/part_id: outside 1..24");
    PartChart chart;
    chart.part = PartId(part);
    chart.source = ChartSource::Supplied;
    if (item.contains("source")) {
      const auto& source = item["source"];
      if (source == "mds") chart.source = ChartSource::Mds;
      else if (source != "supplied") fail(Errc::SchemaError, where + "/source: expected \"mds\" or \"supplied\"");
    }
    if (!item.contains("entries") || !item["entries"].is_array()) fail(Errc::SchemaError, where + "/entries: expected an array");
    const auto& entries = item["entries"];
    for (std::size_t e = 0; e < entries.size(); ++e) {
      const auto& entry = entries[e];
      const std::string at = where + "/entries/" + std::to_string(e);
      if (!entry.is_array() || entry.size() != 3 || !entry[0].is_number_integer() || !entry[1].is_number() ||
          !entry[2].is_number())
        fail(Errc::SchemaError, at + ": expected [vertex, u, v]");
      const double u = entry[1].get<double>();
      const double v = entry[2].get<double>();
      if (!(u >= 0.0 && u <= 1.0 && v >= 0.0 && v <= 1.0)) fail(Errc::SchemaError, at + ": uv outside [0,1]");
      chart.vertex_ids.push_back(entry[0].get<VertexId>());
      chart.uv.emplace_back(u, v);
    }
    charts.push_back(std::move(chart));
  }
  return charts;
}

inline UVAtlas atlas_from_json(const nlohmann::json& doc) { return UVAtlas::from_charts(charts_from_json(doc)); }

/// Checks that the atlas covers exactly the labelled vertices of `mesh`.
inline void check_atlas_matches(const UVAtlas& atlas, const SurfaceMesh& mesh) {
  for (int p = 1; p <= kPartCount; ++p) {
    const auto& chart = atlas.chart(PartId(p));
    std::vector<VertexId> ids = chart.vertex_ids;
    std::sort(ids.begin(), ids.end());
    if (ids != mesh.part_vertices(PartId(p)))
      fail(Errc::ChartConflict, "atlas chart " + std::to_string(p) + " does not match the mesh labelling");
  }
}

}  // namespace densecorr
