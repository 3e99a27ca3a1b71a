// Runs every acceptance criterion and prints one PASS/FAIL line each.
// Exit status is the number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>

#include "densecorr/densecorr.hpp"
#include "support/ray_oracle.hpp"
#include "support/server.hpp"
#include "support/synthetic.hpp"

using namespace densecorr;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  const char* name;
  double budget_s;  // wall-clock limit; <= 0 means none
  std::function<Outcome()> run;
};

std::string fmt(const char* pattern, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, pattern, args...);
  return buf;
}

GroundTruthInstance gt_instance(std::int64_t id, std::int64_t image, const std::vector<VertexId>& vertices) {
  GroundTruthInstance g{id, image, {}, std::nullopt};
  for (std::size_t k = 0; k < vertices.size(); ++k) g.points.push_back({{static_cast<int>(k), 0}, vertices[k]});
  return g;
}

PredictedInstance prediction(std::int64_t id, std::int64_t image, double score, const std::vector<VertexId>& vertices) {
  PredictedInstance p{id, image, score, {}};
  for (std::size_t k = 0; k < vertices.size(); ++k) p.vertices[{static_cast<int>(k), 0}] = vertices[k];
  return p;
}

SurfacePoint random_point(const SurfaceMesh& mesh, PartId part, std::mt19937_64& rng) {
  const auto& faces = mesh.part_faces(part);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const FaceId f = faces[rng() % faces.size()];
  const double r1 = std::sqrt(unit(rng)), r2 = unit(rng);
  return SurfacePoint{f, {1.0 - r1, r1 * (1.0 - r2), r1 * r2}};
}

double sum_squared_upper(const Eigen::MatrixXd& d) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < d.rows(); ++i)
    for (Eigen::Index j = i + 1; j < d.cols(); ++j) s += d(i, j) * d(i, j);
  return s;
}

Outcome gps_constant() {
  const auto mesh = testing::grid(2, 2, 0.3003);
  const double g = gps(gt_instance(1, 1, {0}), prediction(1, 1, 1.0, {1}), mesh);
  return {std::abs(g - 0.5) <= 1e-3, fmt("gps=%.6f at error 0.3003", g)};
}

Outcome geodesic_oracle() {
  std::mt19937_64 rng(2024);
  int meshes = 0, mismatches = 0, max_vertices = 0;
  for (; meshes < 100; ++meshes) {
    const auto mesh = testing::random_patch(rng, 50);
    max_vertices = std::max(max_vertices, static_cast<int>(mesh.vertex_count()));
    const auto oracle = testing::floyd_warshall(mesh);
    for (VertexId s = 0; s < static_cast<VertexId>(mesh.vertex_count()); ++s) {
      const auto field = geodesic_from(mesh, s);
      for (std::size_t t = 0; t < mesh.vertex_count(); ++t)
        if (field.distance[t] != oracle[static_cast<std::size_t>(s)][t]) ++mismatches;
    }
  }
  return {mismatches == 0 && max_vertices <= 50,
          fmt("%d meshes (<=%d vertices), %d distance mismatches", meshes, max_vertices, mismatches)};
}

SurfaceMesh equilateral_fan(int triangles) {
  std::vector<Vec3> vertices{Vec3::Zero()};
  for (int k = 0; k <= triangles; ++k) {
    const double a = std::numbers::pi / 3.0 * k;
    vertices.emplace_back(std::cos(a), std::sin(a), 0.0);
  }
  if (triangles == 6) vertices.pop_back();
  std::vector<Face> faces;
  for (int k = 0; k < triangles; ++k) {
    const VertexId a = 1 + k, b = triangles == 6 ? 1 + (k + 1) % 6 : 2 + k;
    faces.push_back({0, a, b});
  }
  std::vector<int> labels(vertices.size(), 1);
  return SurfaceMesh::create(std::move(vertices), std::move(faces), std::move(labels));
}

Outcome mds_fidelity() {
  std::vector<std::pair<std::string, Eigen::MatrixXd>> charts;
  const int n = 20;
  Eigen::MatrixXd path(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) path(i, j) = std::abs(i - j) * 0.1;
  charts.emplace_back("path", path);
  charts.emplace_back("strip", part_distance_matrix(testing::grid(3, 16, 0.1), PartId(1)));
  charts.emplace_back("fan3", part_distance_matrix(equilateral_fan(3), PartId(1)));
  charts.emplace_back("fan6", part_distance_matrix(equilateral_fan(6), PartId(1)));

  bool ok = true;
  std::string detail;
  for (const auto& [name, d] : charts) {
    const auto e = unwrap_part(d);
    bool monotone = !e.stress_history.empty();
    for (std::size_t k = 1; k < e.stress_history.size(); ++k) monotone = monotone && e.stress_history[k] <= e.stress_history[k - 1];
    const double ratio = raw_stress(d, e.points) / sum_squared_upper(d);
    ok = ok && monotone && ratio < 0.05;
    detail += fmt("%s ratio=%.2e%s ", name.c_str(), ratio, monotone ? "" : " NON-MONOTONE");
  }
  return {ok, detail};
}

Outcome rcp_analytic() {
  const std::vector<double> constant(1000, 0.05), zeros(1000, 0.0);
  const double half = rcp_auc(constant, 0.10).auc;
  const double one = rcp_auc(zeros, 0.10).auc;
  return {std::abs(half - 0.5) <= 1.0 / 256.0 && one == 1.0, fmt("constant 0.05: AUC=%.6f; zeros: AUC=%.17g", half, one)};
}

Outcome ap_ar_enumeration() {
  const double spacing = 0.255 * std::sqrt(-2.0 * std::log(0.72));
  const auto mesh = testing::grid(2, 6, spacing);
  std::vector<GroundTruthInstance> gts;
  std::vector<PredictedInstance> preds, perfect;
  for (int i = 0; i < 5; ++i) {
    gts.push_back(gt_instance(i, i, {i}));
    preds.push_back(prediction(i, i, 0.3 + 0.1 * i, {i + 1}));
    perfect.push_back(prediction(i, i, 0.9, {i}));
  }
  const auto r = evaluate_ap_ar(gts, preds, mesh);
  const auto p = evaluate_ap_ar(gts, perfect, mesh);
  return {r.ap == 0.5 && r.ar == 0.5 && p.ap == 1.0 && p.ar == 1.0,
          fmt("GPS %.4f: AP=%.17g AR=%.17g; perfect: AP=%.17g AR=%.17g", gps(gts[0], preds[0], mesh), r.ap, r.ar, p.ap, p.ar)};
}

Outcome click_round_trip() {
  const auto mesh = testing::ellipsoid(24, 36, Vec3(1.0, 0.6, 0.45), 4);
  std::mt19937_64 rng(99);
  std::array<ViewBundle, 4> bundles;
  for (int part = 1; part <= 4; ++part) bundles[static_cast<std::size_t>(part - 1)] = render_part_views(mesh, PartId(part), 512);

  int visible = 0, recovered = 0;
  for (int i = 0; i < 1000; ++i) {
    const PartId part(1 + i % 4);
    const auto& views = bundles[static_cast<std::size_t>(part.value() - 1)];
    const auto p = random_point(mesh, part, rng);
    const auto proj = project_to_views(mesh, views, p);
    const int best = most_frontal_view(mesh, views, proj, p);
    if (best < 0) continue;
    ++visible;
    const auto& view = views[static_cast<std::size_t>(best)];
    const auto& pr = proj[static_cast<std::size_t>(best)];
    if (!view.contains(pr.pixel_x, pr.pixel_y) || view.face_id[view.index(pr.pixel_x, pr.pixel_y)] < 0) continue;
    if (surface_distance(mesh, p, click_to_surface(view, pr.pixel_x, pr.pixel_y)) <= 2.0 * view.camera.world_per_pixel())
      ++recovered;
  }

  int agree = 0, checked = 0;
  for (int i = 0; i < 100; ++i) {
    const PartId part(1 + i % 4);
    const auto& views = bundles[static_cast<std::size_t>(part.value() - 1)];
    const auto p = random_point(mesh, part, rng);
    const auto proj = project_to_views(mesh, views, p);
    bool all = true;
    for (int v = 0; v < kViewCount; ++v)
      all = all && proj[static_cast<std::size_t>(v)].visible == testing::ray_visible(mesh, views[static_cast<std::size_t>(v)], p);
    agree += all;
    ++checked;
  }
  const double rate = visible ? static_cast<double>(recovered) / visible : 0.0;
  return {rate >= 0.99 && agree == checked,
          fmt("%d/%d visible recovered (%.1f%%); visibility agrees with ray cast on %d/%d points", recovered, visible,
              100.0 * rate, agree, checked)};
}

Outcome decoder_conformance() {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> weight(0, 3);
  std::uniform_real_distribution<float> reg(-0.5f, 1.5f);
  long pixels = 0, wrong = 0, ties = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int w = 1 + static_cast<int>(rng() % 9), h = 1 + static_cast<int>(rng() % 9);
    ScoreMaps maps = ScoreMaps::zeros(w, h);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        // Small integer weights make exact ties common.
        std::array<int, kClassCount> counts{};
        int total = 0;
        for (auto& c : counts) total += (c = weight(rng));
        if (total == 0) total = (counts[rng() % kClassCount] = 1);
        for (int c = 0; c < kClassCount; ++c) maps.posterior(c, x, y) = static_cast<float>(counts[static_cast<std::size_t>(c)]) / static_cast<float>(total);
        for (int part = 1; part <= kPartCount; ++part) {
          maps.u(part, x, y) = reg(rng);
          maps.v(part, x, y) = reg(rng);
        }
      }
    const auto iuv = decode(maps);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        ++pixels;
        int best = 0, at_max = 1;
        for (int c = 1; c < kClassCount; ++c) {
          if (maps.posterior(c, x, y) > maps.posterior(best, x, y)) {
            best = c;
            at_max = 1;
          } else if (maps.posterior(c, x, y) == maps.posterior(best, x, y)) {
            ++at_max;
          }
        }
        ties += at_max > 1;
        const auto i = iuv.index(x, y);
        bool ok = iuv.part[i] == best;
        if (best == 0) {
          ok = ok && iuv.u[i] == 0.0f && iuv.v[i] == 0.0f;
        } else {
          ok = ok && iuv.u[i] == std::clamp(maps.u(best, x, y), 0.0f, 1.0f) && iuv.v[i] == std::clamp(maps.v(best, x, y), 0.0f, 1.0f);
        }
        wrong += !ok;
      }
  }
  return {wrong == 0 && ties > 0, fmt("%ld pixels (%ld with tied maxima), %ld violations", pixels, ties, wrong)};
}

// Scripted annotation over HTTP: ground-truth vertices are clicked at their
// projections, the export is scored against the known vertices.
Outcome end_to_end() {
  const auto mesh = testing::two_part_cylinder(16, 32, 0.5, 2.0);
  const auto atlas = build_atlas(mesh);
  ServiceConfig config;
  config.view_resolution = 512;
  AnnotationService service(mesh, atlas, config);
  testing::LocalServer server(service);
  auto client = server.client();

  std::array<ViewBundle, 2> views{render_part_views(mesh, PartId(1), 512), render_part_views(mesh, PartId(2), 512)};
  for (int part = 1; part <= 2; ++part) {
    const auto meta = client.Get("/parts/" + std::to_string(part) + "/views/0/meta");
    if (!meta || meta->status != 200) return {false, "view metadata unavailable"};
    if (camera_from_json(nlohmann::json::parse(meta->body).at("camera")).scale != views[static_cast<std::size_t>(part - 1)][0].camera.scale)
      return {false, "service cameras differ from the client's renders"};
  }

  // Known points are vertices away from the rim and the seam: every face
  // around them belongs to their part. Each is paired with one such face.
  std::vector<int> foreign(mesh.vertex_count(), 0);
  std::vector<FaceId> some_face(mesh.vertex_count(), -1);
  for (FaceId f = 0; f < static_cast<FaceId>(mesh.faces().size()); ++f)
    for (const VertexId v : mesh.faces()[static_cast<std::size_t>(f)]) {
      foreign[static_cast<std::size_t>(v)] += mesh.face_part(f).value() != mesh.labels()[static_cast<std::size_t>(v)];
      some_face[static_cast<std::size_t>(v)] = f;
    }
  std::array<std::vector<std::pair<VertexId, FaceId>>, 2> interior;
  for (VertexId v = 0; v < static_cast<VertexId>(mesh.vertex_count()); ++v) {
    const auto i = static_cast<std::size_t>(v);
    const bool rim = v < 32 || v >= static_cast<VertexId>(mesh.vertex_count()) - 32;
    if (!rim && foreign[i] == 0) interior[static_cast<std::size_t>(mesh.labels()[i] - 1)].push_back({v, some_face[i]});
  }

  std::mt19937_64 rng(31);
  DatasetFile truth;
  int clicks = 0;
  for (int image = 1; image <= 3; ++image) {
    SessionRequest req{image, 640, 480, static_cast<std::uint64_t>(100 + image), {}};
    std::vector<Pixel> left, right;
    for (int y = 40; y < 440; ++y)
      for (int x = 0; x < 320; ++x) (x < 160 + 40 * image ? left : right).push_back({x + 150, y});
    req.masks = {{PartId(1), left}, {PartId(2), right}};
    const auto created = client.Post("/sessions", session_request_to_json(req).dump(), "application/json");
    if (!created || created->status != 201) return {false, "session creation failed"};
    const auto session = nlohmann::json::parse(created->body);
    const std::string id = session.at("id");

    DatasetAnnotation gt{image, image, std::nullopt, std::nullopt, {}};
    for (;;) {
      const auto task = nlohmann::json::parse(client.Get("/sessions/" + id + "/next-task")->body);
      if (task.at("complete").get<bool>()) break;
      const auto& target = task.at("target");
      const PartId part(target.at("part").get<int>());
      const auto& bundle = views[static_cast<std::size_t>(part.value() - 1)];

      const auto& pool = interior[static_cast<std::size_t>(part.value() - 1)];
      const auto [vertex, f] = pool[rng() % pool.size()];
      int corner = 0;
      while (mesh.faces()[static_cast<std::size_t>(f)][static_cast<std::size_t>(corner)] != vertex) ++corner;
      SurfacePoint p{f, {0.0, 0.0, 0.0}};
      p.weights[static_cast<std::size_t>(corner)] = 1.0;

      const auto proj = project_to_views(mesh, bundle, p);
      const int view = most_frontal_view(mesh, bundle, proj, p);
      if (view < 0) return {false, fmt("vertex %d not visible in any view", vertex)};
      const auto& pr = proj[static_cast<std::size_t>(view)];
      const nlohmann::json body{{"target", target.at("index")}, {"view", view}, {"x", pr.pixel_x}, {"y", pr.pixel_y}, {"annotator", "script"}};
      const auto r = client.Post("/sessions/" + id + "/clicks", body.dump(), "application/json");
      if (!r || r->status != 200) return {false, "click rejected: " + (r ? r->body : std::string("no response"))};
      ++clicks;

      const auto uv = *atlas.uv_of(vertex);
      gt.dp_points.push_back({target.at("x").get<double>(), target.at("y").get<double>(), part.value(),
                              std::clamp(uv.x(), 0.0, 1.0), std::clamp(uv.y(), 0.0, 1.0), vertex});
    }
    truth.images.push_back({image, req.width, req.height});
    truth.annotations.push_back(std::move(gt));
  }

  const auto exported = client.Get("/export");
  if (!exported || exported->status != 200) return {false, "export failed"};
  const auto predicted = dataset_from_json(nlohmann::json::parse(exported->body));
  const auto report = evaluate_ap_ar(ground_truth_from(truth, atlas), predictions_from(predicted, atlas), mesh);
  const double auc30 = rcp_auc(report.point_errors, 0.30).auc;
  return {auc30 >= 0.99 && report.ap == 1.0,
          fmt("3 sessions, %d clicks over HTTP: AUC30=%.4f AP=%.17g AR=%.4f", clicks, auc30, report.ap, report.ar)};
}

Outcome sampler_cap() {
  std::mt19937_64 rng(5);
  int masks = 0, over = 0, off_mask = 0, nondeterministic = 0, max_seen = 0;
  for (; masks < 200; ++masks) {
    const int w = 20 + static_cast<int>(rng() % 600), h = 20 + static_cast<int>(rng() % 600);
    std::vector<Pixel> pixels;
    const int blobs = 1 + static_cast<int>(rng() % 4);
    for (int b = 0; b < blobs; ++b) {
      const int x0 = static_cast<int>(rng() % static_cast<unsigned>(w)), y0 = static_cast<int>(rng() % static_cast<unsigned>(h));
      const int bw = 1 + static_cast<int>(rng() % static_cast<unsigned>(w - x0));
      const int bh = 1 + static_cast<int>(rng() % static_cast<unsigned>(h - y0));
      for (int y = y0; y < y0 + bh; ++y)
        for (int x = x0; x < x0 + bw; ++x) pixels.push_back({x, y});
    }
    const auto mask = PartMask::create(w, h, PartId(1 + masks % 24), pixels);
    const std::uint64_t seed = rng();
    const auto a = sample_points(mask, seed);
    const auto b = sample_points(mask, seed);
    const int count = static_cast<int>(a.points.size());
    max_seen = std::max(max_seen, count);
    over += count > kMaxPointsPerPart || count < 1;
    for (const auto& p : a.points) off_mask += !mask.contains(p);
    nondeterministic += a.points != b.points;
  }
  return {over == 0 && off_mask == 0 && nondeterministic == 0,
          fmt("%d masks, max %d points, %d over cap, %d off-mask, %d nondeterministic", masks, max_seen, over, off_mask,
              nondeterministic)};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {"gps-constant", 1.0, gps_constant},
      {"geodesic-oracle", 10.0, geodesic_oracle},
      {"mds-fidelity", 5.0, mds_fidelity},
      {"rcp-auc-analytic", 1.0, rcp_analytic},
      {"ap-ar-thresholds", 1.0, ap_ar_enumeration},
      {"click-round-trip", 60.0, click_round_trip},
      {"decoder-argmax", 0.0, decoder_conformance},
      {"end-to-end", 30.0, end_to_end},
      {"sampler-cap", 0.0, sampler_cap},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = c.budget_s <= 0.0 || seconds < c.budget_s;
    const bool pass = out.pass && in_time;
    failed += !pass;
    std::printf("%s %-18s %s [%.3f s%s]\n", pass ? "PASS" : "FAIL", c.name, out.detail.c_str(), seconds,
                c.budget_s > 0.0 ? fmt(" / %.0f s", c.budget_s).c_str() : "");
    std::fflush(stdout);
  }
  return failed;
}
