#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "densecorr/atlas.hpp"
#include "densecorr/error.hpp"
#include "densecorr/metrics.hpp"

namespace densecorr {

struct DatasetImage {
  std::int64_t id = 0;
  int width = 0;
  int height = 0;
  friend bool operator==(const DatasetImage&, const DatasetImage&) = default;
};

struct DpPoint {
  double x = 0.0;
  double y = 0.0;
  int part = 1;
  double u = 0.0;
  double v = 0.0;
  std::optional<VertexId> vertex;
  friend bool operator==(const DpPoint&, const DpPoint&) = default;
};

struct DatasetAnnotation {
  std::int64_t id = 0;
  std::int64_t image_id = 0;
  std::optional<std::array<double, 4>> bbox;
  std::optional<double> score;
  std::vector<DpPoint> dp_points;
  friend bool operator==(const DatasetAnnotation&, const DatasetAnnotation&) = default;
};

/// COCO-style carrier for both ground-truth annotations and predictions.
struct DatasetFile {
  std::vector<DatasetImage> images;
  std::vector<DatasetAnnotation> annotations;
  friend bool operator==(const DatasetFile&, const DatasetFile&) = default;
};

namespace detail {

// Field access with JSON-pointer locations in the error messages.
class SchemaReader {
 public:
  SchemaReader(const nlohmann::json& node, std::string path) : node_(node), path_(std::move(path)) {}

  const nlohmann::json& node() const { return node_; }
  const std::string& path() const { return path_; }

  [[noreturn]] void reject(const std::string& field, const std::string& what) const {
    fail(Errc::SchemaError, path_ + "/" + field + ": " + what);
  }

  const nlohmann::json& field(const std::string& name) const {
    if (!node_.is_object()) fail(Errc::SchemaError, (path_.empty() ? "/" : path_) + ": expected an object");
    const auto it = node_.find(name);
    if (it == node_.end()) reject(name, "missing");
    return *it;
  }
  bool has(const std::string& name) const { return node_.is_object() && node_.contains(name) && !node_.at(name).is_null(); }

  double number(const std::string& name) const {
    const auto& v = field(name);
    if (!v.is_number()) reject(name, "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) reject(name, "expected a finite number");
    return d;
  }
  std::int64_t integer(const std::string& name) const {
    const auto& v = field(name);
    if (!v.is_number_integer()) reject(name, "expected an integer");
    return v.get<std::int64_t>();
  }
  const nlohmann::json& array(const std::string& name) const {
    const auto& v = field(name);
    if (!v.is_array()) reject(name, "expected an array");
    return v;
  }

 private:
  const nlohmann::json& node_;
  std::string path_;
};

}  // namespace detail

inline nlohmann::json dataset_to_json(const DatasetFile& ds) {
  nlohmann::json images = nlohmann::json::array();
  for (const auto& img : ds.images) images.push_back({{"id", img.id}, {"width", img.width}, {"height", img.height}});
  nlohmann::json annotations = nlohmann::json::array();
  for (const auto& a : ds.annotations) {
    nlohmann::json points = nlohmann::json::array();
    for (const auto& p : a.dp_points) {
      nlohmann::json jp{{"x", p.x}, {"y", p.y}, {"part", p.part}, {"u", p.u}, {"v", p.v}};
      if (p.vertex) jp["vertex"] = *p.vertex;
      points.push_back(std::move(jp));
    }
    nlohmann::json ja{{"id", a.id}, {"image_id", a.image_id}, {"dp_points", std::move(points)}};
    if (a.bbox) ja["bbox"] = *a.bbox;
    if (a.score) ja["score"] = *a.score;
    annotations.push_back(std::move(ja));
  }
  return {{"images", std::move(images)}, {"annotations", std::move(annotations)}};
}

inline DatasetFile dataset_from_json(const nlohmann::json& doc) {
  const detail::SchemaReader root(doc, "");
  DatasetFile ds;
  std::set<std::int64_t> image_ids;
  const auto& images = root.array("images");
  for (std::size_t i = 0; i < images.size(); ++i) {
    const detail::SchemaReader r(images[i], "/images/" + std::to_string(i));
    DatasetImage img{r.integer("id"), static_cast<int>(r.integer("width")), static_cast<int>(r.integer("height"))};
    if (img.width <= 0) r.reject("width", "must be positive");
    if (img.height <= 0) r.reject("height", "must be positive");
    if (!image_ids.insert(img.id).second) r.reject("id", "duplicate image id " + std::to_string(img.id));
    ds.images.push_back(img);
  }
  const auto& annotations = root.array("annotations");
  for (std::size_t i = 0; i < annotations.size(); ++i) {
    const detail::SchemaReader r(annotations[i], "/annotations/" + std::to_string(i));
    DatasetAnnotation a;
    a.id = r.integer("id");
    a.image_id = r.integer("image_id");
    if (!image_ids.count(a.image_id)) r.reject("image_id", "unknown image " + std::to_string(a.image_id));
    if (r.has("bbox")) {
      const auto& b = r.array("bbox");
      if (b.size() != 4) r.reject("bbox", "expected [x, y, width, height]");
      std::array<double, 4> box{};
      for (std::size_t k = 0; k < 4; ++k) {
        if (!b[k].is_number()) r.reject("bbox/" + std::to_string(k), "expected a number");
        box[k] = b[k].get<double>();
      }
      a.bbox = box;
    }
    if (r.has("score")) a.score = r.number("score");
    const auto& points = r.array("dp_points");
    for (std::size_t k = 0; k < points.size(); ++k) {
      const detail::SchemaReader p(points[k], r.path() + "/dp_points/" + std::to_string(k));
      DpPoint dp;
      dp.x = p.number("x");
      dp.y = p.number("y");
      const auto part = p.integer("part");
      if (part < 1 || part > kPartCount) p.reject("part", "expected 1..24, got " + std::to_string(part));
      dp.part = static_cast<int>(part);
      dp.u = p.number("u");
      dp.v = p.number("v");
      if (dp.u < 0.0 || dp.u > 1.0) p.reject("u", "outside [0,1]");
      if (dp.v < 0.0 || dp.v > 1.0) p.reject("v", "outside [0,1]");
      if (p.has("vertex")) {
        const auto vertex = p.integer("vertex");
        if (vertex < 0 || vertex > std::numeric_limits<VertexId>::max()) p.reject("vertex", "out of range");
        dp.vertex = static_cast<VertexId>(vertex);
      }
      a.dp_points.push_back(dp);
    }
    ds.annotations.push_back(std::move(a));
  }
  return ds;
}

/// Sorted keys, two-space indent, shortest round-trip floats.
inline std::string canonical_json(const nlohmann::json& doc) { return doc.dump(2) + "\n"; }

inline DatasetFile read_dataset(const std::filesystem::path& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(detail::read_text_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    fail(Errc::ParseError, path.string() + ": " + e.what());
  }
  return dataset_from_json(doc);
}

inline void write_dataset(const DatasetFile& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(Errc::IoError, "cannot write " + path.string());
  out << canonical_json(dataset_to_json(ds));
  if (!out) fail(Errc::IoError, "short write to " + path.string());
}

/// The pixel a point falls in.
inline Pixel point_pixel(const DpPoint& p) {
  return Pixel{static_cast<int>(std::floor(p.x)), static_cast<int>(std::floor(p.y))};
}

inline VertexId point_vertex(const DpPoint& p, const UVAtlas& atlas) {
  return p.vertex ? *p.vertex : uv_to_vertex(atlas, PartId(p.part), p.u, p.v);
}

/// Ground-truth instances; a point's explicit vertex wins over its (u, v).
inline std::vector<GroundTruthInstance> ground_truth_from(const DatasetFile& ds, const UVAtlas& atlas) {
  std::vector<GroundTruthInstance> out;
  for (const auto& a : ds.annotations) {
    GroundTruthInstance g{a.id, a.image_id, {}, a.bbox};
    for (const auto& p : a.dp_points) g.points.push_back({point_pixel(p), point_vertex(p, atlas)});
    out.push_back(std::move(g));
  }
  return out;
}

/// Predicted instances; annotations without a score count as score 1.
inline std::vector<PredictedInstance> predictions_from(const DatasetFile& ds, const UVAtlas& atlas) {
  std::vector<PredictedInstance> out;
  for (const auto& a : ds.annotations) {
    PredictedInstance p{a.id, a.image_id, a.score.value_or(1.0), {}};
    for (const auto& dp : a.dp_points) p.vertices[point_pixel(dp)] = point_vertex(dp, atlas);
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace densecorr
