#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "densecorr/error.hpp"
#include "densecorr/geodesic.hpp"
#include "densecorr/image.hpp"
#include "densecorr/mesh.hpp"

namespace densecorr {

/// Stand-in vertex id for a prediction that labels a pixel as background.
inline constexpr VertexId kBackgroundVertex = -1;

inline std::vector<double> default_gps_thresholds() {
  std::vector<double> t;
  for (int k = 0; k < 10; ++k) t.push_back((50 + 5 * k) / 100.0);
  return t;
}

struct GpsConfig {
  double kappa = 0.255;  // same length unit as the mesh (meters by default)
  std::vector<double> thresholds = default_gps_thresholds();

  void validate() const {
    if (!(kappa > 0.0) || !std::isfinite(kappa)) fail(Errc::InvalidArgument, "kappa must be positive");
    if (thresholds.empty()) fail(Errc::InvalidArgument, "at least one GPS threshold is required");
    for (std::size_t i = 0; i < thresholds.size(); ++i) {
      if (!(thresholds[i] > 0.0 && thresholds[i] < 1.0)) fail(Errc::InvalidArgument, "GPS thresholds must lie in (0,1)");
      if (i > 0 && !(thresholds[i] > thresholds[i - 1])) fail(Errc::InvalidArgument, "GPS thresholds must ascend");
    }
  }
};

struct GroundTruthPoint {
  Pixel pixel;
  VertexId vertex = 0;
};

struct GroundTruthInstance {
  std::int64_t id = 0;
  std::int64_t image_id = 0;
  std::vector<GroundTruthPoint> points;
  std::optional<std::array<double, 4>> bbox;
};

/// Model output for one detected person. Pixels without an entry are background.
struct PredictedInstance {
  std::int64_t id = 0;
  std::int64_t image_id = 0;
  double score = 0.0;
  std::map<Pixel, VertexId> vertices;

  VertexId at(Pixel p) const {
    const auto it = vertices.find(p);
    return it == vertices.end() ? kBackgroundVertex : it->second;
  }
};

inline double geodesic_error(const SurfaceMesh& mesh, VertexId truth, VertexId estimate) {
  detail::check_vertex(mesh, truth);
  if (estimate == kBackgroundVertex) return kInfinity;
  detail::check_vertex(mesh, estimate);
  return geodesic_between(mesh, truth, estimate);
}

struct RcpCurve {
  std::vector<double> thresholds;
  std::vector<double> fraction;  // share of points with error strictly below each threshold
  std::size_t count = 0;
};

struct RcpResult {
  RcpCurve curve;
  double auc = 0.0;
};

inline constexpr int kRcpGridSize = 256;

/// Ratio of correct points on the grid a/256, 2a/256, ..., a and its
/// normalized area under the curve (trapezoids, with f(0) = share of exact points).
inline RcpResult rcp_auc(std::span<const double> errors, double a) {
  if (errors.empty()) fail(Errc::EmptyInput, "no errors to summarize");
  if (!(a > 0.0) || !std::isfinite(a)) fail(Errc::InvalidArgument, "RCP range must be positive");
  for (double e : errors)
    if (std::isnan(e) || e < 0.0) fail(Errc::InvalidArgument, "geodesic errors must be non-negative");

  std::vector<double> sorted(errors.begin(), errors.end());
  std::sort(sorted.begin(), sorted.end());
  const auto n = sorted.size();
  std::vector<std::size_t> below(kRcpGridSize + 1);
  below[0] = static_cast<std::size_t>(std::upper_bound(sorted.begin(), sorted.end(), 0.0) - sorted.begin());
  RcpResult out;
  out.curve.count = n;
  for (int k = 1; k <= kRcpGridSize; ++k) {
    const double t = a * k / kRcpGridSize;
    below[static_cast<std::size_t>(k)] = static_cast<std::size_t>(std::lower_bound(sorted.begin(), sorted.end(), t) - sorted.begin());
    out.curve.thresholds.push_back(t);
    out.curve.fraction.push_back(static_cast<double>(below[static_cast<std::size_t>(k)]) / static_cast<double>(n));
  }
  // Integer trapezoid sum keeps exact cases exact.
  std::uint64_t total = 0;
  for (std::size_t k = 0; k < kRcpGridSize; ++k) total += below[k] + below[k + 1];
  out.auc = static_cast<double>(total) / (2.0 * kRcpGridSize * static_cast<double>(n));
  return out;
}

namespace detail {

// Geodesic fields keyed by source vertex, computed on first use.
class FieldCache {
 public:
  explicit FieldCache(const SurfaceMesh& mesh) : mesh_(mesh) {}
  double distance(VertexId from, VertexId to) {
    if (to == kBackgroundVertex) return kInfinity;
    check_vertex(mesh_, to);
    auto it = fields_.find(from);
    if (it == fields_.end()) it = fields_.emplace(from, geodesic_from(mesh_, from).distance).first;
    return it->second[static_cast<std::size_t>(to)];
  }

 private:
  const SurfaceMesh& mesh_;
  std::unordered_map<VertexId, std::vector<double>> fields_;
};

inline double gps_from_errors(std::span<const double> errors, double kappa) {
  double sum = 0.0;
  for (double e : errors)
    if (std::isfinite(e)) sum += std::exp(-(e * e) / (2.0 * kappa * kappa));
  return sum / static_cast<double>(errors.size());
}

inline std::vector<double> instance_errors(const GroundTruthInstance& gt, const PredictedInstance& pred,
                                           FieldCache& cache) {
  std::vector<double> errors;
  errors.reserve(gt.points.size());
  for (const auto& p : gt.points) errors.push_back(cache.distance(p.vertex, pred.at(p.pixel)));
  return errors;
}

}  // namespace detail

inline double gps(const GroundTruthInstance& gt, const PredictedInstance& pred, const SurfaceMesh& mesh,
                  const GpsConfig& cfg = {}) {
  if (gt.points.empty()) fail(Errc::EmptyInstance, "ground-truth instance " + std::to_string(gt.id) + " has no points");
  cfg.validate();
  std::vector<double> errors;
  for (const auto& p : gt.points) errors.push_back(geodesic_error(mesh, p.vertex, pred.at(p.pixel)));
  return detail::gps_from_errors(errors, cfg.kappa);
}

inline constexpr std::size_t kMaxDetectionsPerImage = 100;

struct EvalReport {
  double ap = 0.0;
  double ap50 = 0.0;
  double ap75 = 0.0;
  double ar = 0.0;
  std::vector<double> thresholds;
  std::vector<double> ap_per_threshold;
  std::vector<double> ar_per_threshold;
  std::size_t gt_count = 0;
  std::size_t prediction_count = 0;
  // Geodesic error of every ground-truth point under the highest-GPS
  // prediction in its image; +inf when the image has no predictions.
  std::vector<double> point_errors;
  // That best GPS per ground-truth instance (input order).
  std::vector<std::optional<double>> best_gps;
};

/// COCO-style evaluation with GPS in place of box IoU.
inline EvalReport evaluate_ap_ar(std::span<const GroundTruthInstance> gts, std::span<const PredictedInstance> preds,
                                 const SurfaceMesh& mesh, const GpsConfig& cfg = {}) {
  cfg.validate();
  for (const auto& g : gts)
    if (g.points.empty()) fail(Errc::EmptyInstance, "ground-truth instance " + std::to_string(g.id) + " has no points");
  for (const auto& p : preds)
    if (!std::isfinite(p.score)) fail(Errc::InvalidArgument, "prediction " + std::to_string(p.id) + " has a non-finite score");

  std::map<std::int64_t, std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> images;
  for (std::size_t i = 0; i < gts.size(); ++i) images[gts[i].image_id].first.push_back(i);
  for (std::size_t i = 0; i < preds.size(); ++i) images[preds[i].image_id].second.push_back(i);

  EvalReport report;
  report.thresholds = cfg.thresholds;
  report.gt_count = gts.size();
  report.best_gps.assign(gts.size(), std::nullopt);
  std::vector<std::vector<double>> gt_errors(gts.size());

  struct ImageScores {
    std::vector<std::size_t> gt_ids;
    std::vector<std::size_t> pred_ids;  // by descending score, capped
    std::vector<std::vector<double>> gps;  // [prediction][ground truth]
  };
  std::vector<ImageScores> scored;
  for (auto& [image, members] : images) {
    ImageScores s{members.first, members.second, {}};
    std::stable_sort(s.pred_ids.begin(), s.pred_ids.end(),
                     [&](std::size_t a, std::size_t b) { return preds[a].score > preds[b].score; });
    if (s.pred_ids.size() > kMaxDetectionsPerImage) s.pred_ids.resize(kMaxDetectionsPerImage);
    detail::FieldCache cache(mesh);
    for (std::size_t pi : s.pred_ids) {
      auto& row = s.gps.emplace_back();
      for (std::size_t gi : s.gt_ids) {
        auto errors = detail::instance_errors(gts[gi], preds[pi], cache);
        const double g = detail::gps_from_errors(errors, cfg.kappa);
        row.push_back(g);
        if (!report.best_gps[gi] || g > *report.best_gps[gi]) {
          report.best_gps[gi] = g;
          gt_errors[gi] = std::move(errors);
        }
      }
    }
    report.prediction_count += s.pred_ids.size();
    scored.push_back(std::move(s));
  }
  for (std::size_t i = 0; i < gts.size(); ++i) {
    if (gt_errors[i].empty()) gt_errors[i].assign(gts[i].points.size(), kInfinity);
    report.point_errors.insert(report.point_errors.end(), gt_errors[i].begin(), gt_errors[i].end());
  }

  const auto total_gt = gts.size();
  for (double tau : cfg.thresholds) {
    // Per threshold, each detection takes the unmatched instance with the
    // highest GPS among those reaching tau.
    std::vector<std::pair<double, bool>> detections;
    for (const auto& s : scored) {
      std::vector<bool> taken(s.gt_ids.size(), false);
      for (std::size_t r = 0; r < s.pred_ids.size(); ++r) {
        std::optional<std::size_t> best;
        for (std::size_t k = 0; k < s.gt_ids.size(); ++k)
          if (!taken[k] && s.gps[r][k] >= tau && (!best || s.gps[r][k] > s.gps[r][*best])) best = k;
        if (best) taken[*best] = true;
        detections.emplace_back(preds[s.pred_ids[r]].score, best.has_value());
      }
    }
    std::stable_sort(detections.begin(), detections.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    double ap = 0.0, ar = 0.0;
    if (total_gt > 0 && !detections.empty()) {
      std::vector<std::size_t> tp_cum(detections.size());
      std::vector<double> precision(detections.size());
      std::size_t tp = 0;
      for (std::size_t i = 0; i < detections.size(); ++i) {
        if (detections[i].second) ++tp;
        tp_cum[i] = tp;
        precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
      }
      for (std::size_t i = precision.size() - 1; i > 0; --i) precision[i - 1] = std::max(precision[i - 1], precision[i]);
      double sum = 0.0;
      for (std::size_t r = 0; r <= 100; ++r) {
        // First detection whose recall reaches r/100, compared in integers.
        const auto it = std::lower_bound(tp_cum.begin(), tp_cum.end(), r,
                                         [&](std::size_t t, std::size_t level) { return 100 * t < level * total_gt; });
        if (it != tp_cum.end()) sum += precision[static_cast<std::size_t>(it - tp_cum.begin())];
      }
      ap = sum / 101.0;
      ar = static_cast<double>(tp) / static_cast<double>(total_gt);
    }
    report.ap_per_threshold.push_back(ap);
    report.ar_per_threshold.push_back(ar);
  }
  const auto n = static_cast<double>(cfg.thresholds.size());
  report.ap = std::accumulate(report.ap_per_threshold.begin(), report.ap_per_threshold.end(), 0.0) / n;
  report.ar = std::accumulate(report.ar_per_threshold.begin(), report.ar_per_threshold.end(), 0.0) / n;
  auto at = [&](double tau) {
    for (std::size_t i = 0; i < cfg.thresholds.size(); ++i)
      if (std::abs(cfg.thresholds[i] - tau) < 1e-9) return report.ap_per_threshold[i];
    return std::numeric_limits<double>::quiet_NaN();
  };
  report.ap50 = at(0.50);
  report.ap75 = at(0.75);
  return report;
}

struct ErrorSample {
  VertexId vertex = 0;
  double error = 0.0;
};

/// Per-vertex annotator error: each image's samples are spread to every
/// labeled vertex by nearest geodesic neighbour, then averaged over images.
/// Unlabeled vertices are NaN. A vertex no sample can reach takes that image's
/// mean sample error.
inline std::vector<double> annotator_error_field(std::span<const std::vector<ErrorSample>> records,
                                                 const SurfaceMesh& mesh) {
  if (records.empty()) fail(Errc::EmptySample, "no annotated images");
  const auto n = mesh.vertex_count();
  std::vector<double> sum(n, 0.0);
  for (std::size_t k = 0; k < records.size(); ++k) {
    const auto& samples = records[k];
    if (samples.empty()) fail(Errc::EmptySample, "image " + std::to_string(k) + " has no sampled points");
    std::vector<VertexId> sources;
    double mean = 0.0;
    for (const auto& s : samples) {
      if (!(s.error >= 0.0) || !std::isfinite(s.error))
        fail(Errc::InvalidArgument, "annotator errors must be finite and non-negative");
      sources.push_back(s.vertex);
      mean += s.error;
    }
    mean /= static_cast<double>(samples.size());
    const auto nearest = nearest_sources(mesh, sources);
    for (std::size_t v = 0; v < n; ++v) {
      const int src = nearest.source[v];
      sum[v] += src < 0 ? mean : samples[static_cast<std::size_t>(src)].error;
    }
  }
  std::vector<double> field(n);
  for (std::size_t v = 0; v < n; ++v)
    field[v] = mesh.labels()[v] == 0 ? std::numeric_limits<double>::quiet_NaN()
                                     : sum[v] / static_cast<double>(records.size());
  return field;
}

}  // namespace densecorr
