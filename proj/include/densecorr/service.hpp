#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "densecorr/atlas.hpp"
#include "densecorr/dataset.hpp"
#include "densecorr/render.hpp"
#include "densecorr/sampler.hpp"
#include "densecorr/view_io.hpp"

namespace densecorr {

struct AnnotationTarget {
  PartId part;
  Pixel pixel;
};

struct CorrespondencePoint {
  Pixel pixel;
  PartId part;
  SurfacePoint surface;
  Vec2 uv = Vec2::Zero();
  VertexId vertex = 0;
  int view = 0;
  std::string annotator;
  std::int64_t timestamp_ms = 0;
};

/// Immutable state of one session; writers publish a fresh copy.
struct SessionState {
  std::string id;
  std::int64_t image_id = 0;
  int width = 0;
  int height = 0;
  std::uint64_t seed = 0;
  std::array<double, 4> bbox{};
  std::vector<AnnotationTarget> targets;
  std::vector<std::optional<CorrespondencePoint>> points;
  std::size_t cursor = 0;

  bool complete() const noexcept { return cursor == targets.size(); }
};

struct MaskInput {
  PartId part;
  std::vector<Pixel> pixels;
};

struct SessionRequest {
  std::int64_t image_id = 0;
  int width = 0;
  int height = 0;
  std::uint64_t seed = 0;
  std::vector<MaskInput> masks;
};

struct ClickResult {
  CorrespondencePoint point;
  std::array<ViewProjection, kViewCount> projections;
  std::size_t cursor = 0;
  bool complete = false;
  bool revision = false;
};

struct ServiceConfig {
  std::filesystem::path store;      // journal directory; empty keeps sessions in memory only
  std::filesystem::path views_dir;  // pre-rendered bundles; missing parts are rendered on demand
  int view_resolution = 512;
};

/// Per-part sampling seed derived from the session seed.
inline std::uint64_t part_seed(std::uint64_t seed, PartId part) {
  return seed ^ (0x9E3779B97F4A7C15ull * static_cast<std::uint64_t>(part.value()));
}

/// Targets for all masks: parts in ascending order, each in succession order.
inline std::vector<AnnotationTarget> plan_targets(const SessionRequest& request) {
  if (request.masks.empty()) fail(Errc::NoMasks, "session request carries no part masks");
  std::vector<const MaskInput*> masks;
  for (const auto& m : request.masks) masks.push_back(&m);
  std::stable_sort(masks.begin(), masks.end(), [](const MaskInput* a, const MaskInput* b) { return a->part < b->part; });
  std::vector<AnnotationTarget> targets;
  for (std::size_t i = 0; i < masks.size(); ++i) {
    if (i > 0 && masks[i]->part == masks[i - 1]->part)
      fail(Errc::InvalidArgument, "two masks for part " + std::to_string(masks[i]->part.value()));
    const auto mask = PartMask::create(request.width, request.height, masks[i]->part, masks[i]->pixels);
    for (const Pixel& p : sample_points(mask, part_seed(request.seed, mask.part())).points)
      targets.push_back({mask.part(), p});
  }
  return targets;
}

namespace detail {

inline std::int64_t now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

inline nlohmann::json point_to_json(const CorrespondencePoint& p) {
  return {{"x", p.pixel.x},
          {"y", p.pixel.y},
          {"part", p.part.value()},
          {"face", p.surface.face},
          {"weights", p.surface.weights},
          {"u", p.uv.x()},
          {"v", p.uv.y()},
          {"vertex", p.vertex},
          {"view", p.view},
          {"annotator", p.annotator},
          {"timestamp_ms", p.timestamp_ms}};
}

}  // namespace detail

inline nlohmann::json projection_to_json(const ViewProjection& p, int view) {
  return {{"view", view}, {"x", p.x}, {"y", p.y}, {"pixel_x", p.pixel_x}, {"pixel_y", p.pixel_y}, {"visible", p.visible}};
}

inline nlohmann::json session_to_json(const SessionState& s) {
  nlohmann::json targets = nlohmann::json::array();
  for (std::size_t i = 0; i < s.targets.size(); ++i) {
    nlohmann::json t{{"index", i}, {"part", s.targets[i].part.value()}, {"x", s.targets[i].pixel.x}, {"y", s.targets[i].pixel.y}};
    t["point"] = s.points[i] ? detail::point_to_json(*s.points[i]) : nlohmann::json(nullptr);
    targets.push_back(std::move(t));
  }
  return {{"id", s.id},        {"image_id", s.image_id}, {"width", s.width},       {"height", s.height},
          {"seed", s.seed},    {"cursor", s.cursor},     {"total", s.targets.size()}, {"complete", s.complete()},
          {"targets", targets}};
}

/// Session bookkeeping behind the HTTP API. Writes to one session are
/// serialized; readers take lock-free snapshots. Every change is appended to
/// `journal.ndjson` in the store and replayed on construction.
class AnnotationService {
 public:
  AnnotationService(const SurfaceMesh& mesh, const UVAtlas& atlas, ServiceConfig config = {})
      : mesh_(mesh), atlas_(atlas), config_(std::move(config)) {
    if (config_.view_resolution < 2) fail(Errc::InvalidArgument, "view resolution must be at least 2");
    if (!config_.store.empty()) {
      std::filesystem::create_directories(config_.store);
      replay(config_.store / "journal.ndjson");
      journal_.open(config_.store / "journal.ndjson", std::ios::app);
      if (!journal_) fail(Errc::IoError, "cannot open journal in " + config_.store.string());
    }
  }

  AnnotationService(const AnnotationService&) = delete;
  AnnotationService& operator=(const AnnotationService&) = delete;

  const SurfaceMesh& mesh() const noexcept { return mesh_; }
  const UVAtlas& atlas() const noexcept { return atlas_; }

  std::shared_ptr<const SessionState> create_session(const SessionRequest& request) {
    if (request.width <= 0 || request.height <= 0) fail(Errc::InvalidArgument, "image size must be positive");
    auto state = std::make_shared<SessionState>();
    state->image_id = request.image_id;
    state->width = request.width;
    state->height = request.height;
    state->seed = request.seed;
    state->targets = plan_targets(request);
    for (const auto& t : state->targets) {
      if (!mesh_.has_part(t.part) || mesh_.part_faces(t.part).empty())
        fail(Errc::EmptyPart, "mesh has no surface for part " + std::to_string(t.part.value()));
    }
    state->bbox = mask_bbox(request);
    state->points.assign(state->targets.size(), std::nullopt);

    std::unique_lock lock(sessions_mutex_);
    state->id = std::to_string(++last_id_);
    nlohmann::json event{{"event", "session_created"}, {"session", state->id}, {"image_id", state->image_id},
                         {"width", state->width},      {"height", state->height}, {"seed", state->seed},
                         {"bbox", state->bbox}};
    nlohmann::json targets = nlohmann::json::array();
    for (const auto& t : state->targets) targets.push_back({t.part.value(), t.pixel.x, t.pixel.y});
    event["targets"] = std::move(targets);
    append(event);
    auto slot = std::make_shared<Slot>();
    std::atomic_store(&slot->state, std::shared_ptr<const SessionState>(state));
    sessions_.emplace(state->id, slot);
    return state;
  }

  std::shared_ptr<const SessionState> session(const std::string& id) const { return std::atomic_load(&slot(id)->state); }

  std::vector<std::shared_ptr<const SessionState>> sessions() const {
    std::shared_lock lock(sessions_mutex_);
    std::vector<std::pair<long long, std::shared_ptr<const SessionState>>> out;
    for (const auto& [id, s] : sessions_) out.emplace_back(std::stoll(id), std::atomic_load(&s->state));
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<std::shared_ptr<const SessionState>> states;
    for (auto& [id, s] : out) states.push_back(std::move(s));
    return states;
  }

  /// Six views of a part, loaded from the views directory or rendered once.
  const ViewBundle& views(PartId part) {
    if (!part.is_surface()) fail(Errc::InvalidArgument, "background has no views");
    auto& cache = view_cache_[static_cast<std::size_t>(part.value() - 1)];
    std::call_once(cache.once, [&] {
      if (!config_.views_dir.empty() && has_view_bundle(config_.views_dir, part)) {
        cache.bundle = load_view_bundle(config_.views_dir, part);
      } else {
        cache.bundle = render_part_views(mesh_, part, config_.view_resolution);
        if (!config_.views_dir.empty()) save_view_bundle(config_.views_dir, cache.bundle);
      }
      for (const auto& v : cache.bundle) cache.png.push_back(encode_png(v.shaded));
    });
    return cache.bundle;
  }

  const std::vector<std::uint8_t>& view_png(PartId part, int view) {
    check_view(view);
    views(part);
    return view_cache_[static_cast<std::size_t>(part.value() - 1)].png[static_cast<std::size_t>(view)];
  }

  /// Resolves a click on `view` for target `target`. The cursor target is
  /// annotated and the cursor moves on; earlier targets are overwritten.
  ClickResult submit_click(const std::string& id, std::size_t target, int view, int x, int y,
                           const std::string& annotator = {}) {
    check_view(view);
    auto s = slot(id);
    std::lock_guard write(s->write);
    const auto current = std::atomic_load(&s->state);
    if (target >= current->targets.size())
      fail(Errc::IndexOutOfRange, "session " + id + " has " + std::to_string(current->targets.size()) + " targets");
    if (target > current->cursor)
      fail(Errc::StaleSession, "target " + std::to_string(target) + " is ahead of the session cursor " +
                                   std::to_string(current->cursor));
    const auto& goal = current->targets[target];
    const auto& bundle = views(goal.part);
    const ViewRender& rendered = bundle[static_cast<std::size_t>(view)];
    const SurfacePoint surface = click_to_surface(rendered, x, y);

    ClickResult result;
    result.point = make_point(goal, surface, view, annotator, detail::now_ms());
    result.projections = project_to_views(mesh_, bundle, surface);
    result.revision = target < current->cursor;

    auto next = std::make_shared<SessionState>(*current);
    apply(*next, target, result.point);
    nlohmann::json event = detail::point_to_json(result.point);
    event["event"] = result.revision ? "revision" : "click";
    event["session"] = id;
    event["target"] = target;
    event["click"] = {x, y};
    append(event);
    result.cursor = next->cursor;
    result.complete = next->complete();
    std::atomic_store(&s->state, std::shared_ptr<const SessionState>(std::move(next)));
    return result;
  }

  /// COCO-style dataset of every complete session (optionally only those listed).
  DatasetFile export_dataset(const std::vector<std::string>& only = {}) const {
    DatasetFile ds;
    std::set<std::int64_t> seen_images;
    std::int64_t annotation_id = 0;
    for (const auto& s : sessions()) {
      if (!s->complete()) continue;
      if (!only.empty() && std::find(only.begin(), only.end(), s->id) == only.end()) continue;
      if (seen_images.insert(s->image_id).second) ds.images.push_back({s->image_id, s->width, s->height});
      DatasetAnnotation a{++annotation_id, s->image_id, s->bbox, std::nullopt, {}};
      for (const auto& p : s->points)
        a.dp_points.push_back({static_cast<double>(p->pixel.x), static_cast<double>(p->pixel.y), p->part.value(),
                               p->uv.x(), p->uv.y(), p->vertex});
      ds.annotations.push_back(std::move(a));
    }
    if (ds.annotations.empty()) fail(Errc::NothingToExport, "no complete session to export");
    return ds;
  }

 private:
  struct Slot {
    std::mutex write;
    std::shared_ptr<const SessionState> state;
  };
  struct ViewCache {
    std::once_flag once;
    ViewBundle bundle;
    std::vector<std::vector<std::uint8_t>> png;
  };

  static void check_view(int view) {
    if (view < 0 || view >= kViewCount) fail(Errc::IndexOutOfRange, "view index must be 0..5");
  }

  static std::array<double, 4> mask_bbox(const SessionRequest& request) {
    int x0 = request.width, y0 = request.height, x1 = -1, y1 = -1;
    for (const auto& m : request.masks)
      for (const Pixel& p : m.pixels) {
        x0 = std::min(x0, p.x);
        y0 = std::min(y0, p.y);
        x1 = std::max(x1, p.x);
        y1 = std::max(y1, p.y);
      }
    if (x1 < 0) return {0, 0, 0, 0};
    return {static_cast<double>(x0), static_cast<double>(y0), static_cast<double>(x1 - x0 + 1),
            static_cast<double>(y1 - y0 + 1)};
  }

  std::shared_ptr<Slot> slot(const std::string& id) const {
    std::shared_lock lock(sessions_mutex_);
    const auto it = sessions_.find(id);
    if (it == sessions_.end()) fail(Errc::NotFound, "no session " + id);
    return it->second;
  }

  CorrespondencePoint make_point(const AnnotationTarget& goal, const SurfacePoint& surface, int view,
                                 const std::string& annotator, std::int64_t timestamp) const {
    validate(mesh_, surface);
    if (mesh_.face_part(surface.face) != goal.part)
      fail(Errc::InvalidArgument, "clicked surface lies on part " + std::to_string(mesh_.face_part(surface.face).value()) +
                                      ", target is on part " + std::to_string(goal.part.value()));
    CorrespondencePoint p;
    p.pixel = goal.pixel;
    p.part = goal.part;
    p.surface = surface;
    p.vertex = surface.nearest_vertex(mesh_);
    const Face& face = mesh_.face(surface.face);
    for (std::size_t k = 0; k < 3; ++k) {
      const auto uv = atlas_.uv_of(face[k]);
      if (!uv) fail(Errc::EmptyChart, "vertex " + std::to_string(face[k]) + " has no chart coordinates");
      p.uv += surface.weights[k] * *uv;
    }
    p.uv = p.uv.cwiseMax(0.0).cwiseMin(1.0);
    p.view = view;
    p.annotator = annotator;
    p.timestamp_ms = timestamp;
    return p;
  }

  static void apply(SessionState& s, std::size_t target, const CorrespondencePoint& p) {
    s.points[target] = p;
    if (target == s.cursor) ++s.cursor;
  }

  void append(const nlohmann::json& event) {
    if (!journal_.is_open()) return;
    std::lock_guard lock(journal_mutex_);
    journal_ << event.dump() << '\n';
    journal_.flush();
    if (!journal_) fail(Errc::IoError, "journal write failed");
  }

  void replay(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) return;
    std::string line;
    std::size_t number = 0;
    std::vector<std::string> lines;
    while (std::getline(in, line)) lines.push_back(line);
    for (const auto& text : lines) {
      ++number;
      if (text.empty()) continue;
      nlohmann::json event;
      try {
        event = nlohmann::json::parse(text);
      } catch (const nlohmann::json::parse_error&) {
        if (number == lines.size()) break;  // torn final write
        fail(Errc::ParseError, path.string() + ":" + std::to_string(number) + ": malformed journal line");
      }
      try {
        replay_event(event);
      } catch (const nlohmann::json::exception& e) {
        fail(Errc::ParseError, path.string() + ":" + std::to_string(number) + ": " + e.what());
      }
    }
  }

  void replay_event(const nlohmann::json& event) {
    const auto kind = event.at("event").get<std::string>();
    const auto id = event.at("session").get<std::string>();
    if (kind == "session_created") {
      auto state = std::make_shared<SessionState>();
      state->id = id;
      state->image_id = event.at("image_id").get<std::int64_t>();
      state->width = event.at("width").get<int>();
      state->height = event.at("height").get<int>();
      state->seed = event.at("seed").get<std::uint64_t>();
      state->bbox = event.at("bbox").get<std::array<double, 4>>();
      for (const auto& t : event.at("targets"))
        state->targets.push_back({PartId(t.at(0).get<int>()), Pixel{t.at(1).get<int>(), t.at(2).get<int>()}});
      state->points.assign(state->targets.size(), std::nullopt);
      auto slot = std::make_shared<Slot>();
      slot->state = std::move(state);
      sessions_[id] = slot;
      last_id_ = std::max(last_id_, std::stoll(id));
      return;
    }
    if (kind != "click" && kind != "revision") fail(Errc::ParseError, "unknown journal event " + kind);
    auto s = slot(id);
    auto next = std::make_shared<SessionState>(*s->state);
    const auto target = event.at("target").get<std::size_t>();
    if (target >= next->targets.size() || target > next->cursor)
      fail(Errc::ParseError, "journal click for target " + std::to_string(target) + " out of order");
    const SurfacePoint surface{event.at("face").get<FaceId>(), event.at("weights").get<std::array<double, 3>>()};
    CorrespondencePoint p = make_point(next->targets[target], surface, event.at("view").get<int>(),
                                       event.at("annotator").get<std::string>(), event.at("timestamp_ms").get<std::int64_t>());
    apply(*next, target, p);
    s->state = std::move(next);
  }

  const SurfaceMesh& mesh_;
  const UVAtlas& atlas_;
  ServiceConfig config_;
  mutable std::shared_mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<Slot>> sessions_;
  long long last_id_ = 0;
  std::array<ViewCache, kPartCount> view_cache_;
  std::mutex journal_mutex_;
  std::ofstream journal_;
};

// ---- request parsing shared by the HTTP layer and the CLI ----

inline SessionRequest session_request_from_json(const nlohmann::json& body) {
  const detail::SchemaReader r(body, "");
  SessionRequest req;
  req.image_id = r.integer("image_id");
  req.width = static_cast<int>(r.integer("width"));
  req.height = static_cast<int>(r.integer("height"));
  if (r.has("seed")) {
    const auto& seed = r.field("seed");
    if (!seed.is_number_unsigned() && !(seed.is_number_integer() && seed.get<std::int64_t>() >= 0))
      r.reject("seed", "expected a non-negative integer");
    req.seed = seed.get<std::uint64_t>();
  }
  const auto& masks = r.array("masks");
  if (masks.empty()) fail(Errc::NoMasks, "/masks: no part masks");
  for (std::size_t i = 0; i < masks.size(); ++i) {
    const detail::SchemaReader m(masks[i], "/masks/" + std::to_string(i));
    const auto part = m.integer("part");
    if (part < 1 || part > kPartCount) m.reject("part", "expected 1..24");
    MaskInput input{PartId(static_cast<int>(part)), {}};
    if (m.has("rle")) {
      const auto mask = mask_from_rle(m.field("rle"), input.part);
      if (mask.width() != req.width || mask.height() != req.height) m.reject("rle", "size differs from the image");
      input.pixels = mask.pixels();
    } else {
      const auto& pixels = m.array("pixels");
      for (std::size_t k = 0; k < pixels.size(); ++k) {
        const auto& px = pixels[k];
        if (!px.is_array() || px.size() != 2 || !px[0].is_number_integer() || !px[1].is_number_integer())
          m.reject("pixels/" + std::to_string(k), "expected [x, y]");
        input.pixels.push_back({px[0].get<int>(), px[1].get<int>()});
      }
    }
    req.masks.push_back(std::move(input));
  }
  return req;
}

inline nlohmann::json session_request_to_json(const SessionRequest& req) {
  nlohmann::json masks = nlohmann::json::array();
  for (const auto& m : req.masks) {
    nlohmann::json pixels = nlohmann::json::array();
    for (const Pixel& p : m.pixels) pixels.push_back({p.x, p.y});
    masks.push_back({{"part", m.part.value()}, {"pixels", std::move(pixels)}});
  }
  return {{"image_id", req.image_id}, {"width", req.width}, {"height", req.height}, {"seed", req.seed}, {"masks", masks}};
}

inline nlohmann::json next_task_json(const SessionState& s) {
  nlohmann::json out{{"session", s.id},
                     {"image_id", s.image_id},
                     {"cursor", s.cursor},
                     {"total", s.targets.size()},
                     {"complete", s.complete()}};
  if (s.complete()) {
    out["target"] = nullptr;
  } else {
    const auto& t = s.targets[s.cursor];
    out["target"] = {{"index", s.cursor}, {"part", t.part.value()}, {"x", t.pixel.x}, {"y", t.pixel.y}};
  }
  return out;
}

inline nlohmann::json click_result_json(const ClickResult& r) {
  nlohmann::json projections = nlohmann::json::array();
  for (int v = 0; v < kViewCount; ++v) projections.push_back(projection_to_json(r.projections[static_cast<std::size_t>(v)], v));
  return {{"point", detail::point_to_json(r.point)},
          {"projections", std::move(projections)},
          {"cursor", r.cursor},
          {"complete", r.complete},
          {"revision", r.revision}};
}

}  // namespace densecorr
