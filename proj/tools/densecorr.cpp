#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>

#include <CLI11.hpp>

#include "densecorr/densecorr.hpp"

namespace dc = densecorr;

namespace {

enum Exit { kOk = 0, kUsage = 2, kData = 3, kInternal = 4 };

struct Globals {
  std::string mesh, labels, atlas;
  std::uint64_t seed = 0;
  std::string units = "m";

  // Length of one meter in the mesh's units.
  double meter() const {
    if (units == "cm") return 100.0;
    if (units == "mm") return 1000.0;
    return 1.0;
  }
};

// Bad flag combinations discovered after parsing.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

dc::SurfaceMesh need_mesh(const Globals& g) {
  if (g.mesh.empty() || g.labels.empty()) throw UsageError("--mesh and --labels are required");
  return dc::load_mesh(g.mesh, g.labels);
}

nlohmann::json read_json(const std::string& path) {
  const auto text = dc::detail::read_text_file(path);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    dc::fail(dc::Errc::ParseError, path + ": " + e.what());
  }
}

dc::UVAtlas need_atlas(const Globals& g, const dc::SurfaceMesh& mesh) {
  if (g.atlas.empty()) throw UsageError("--atlas is required");
  auto atlas = dc::atlas_from_json(read_json(g.atlas));
  dc::check_atlas_matches(atlas, mesh);
  return atlas;
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) dc::fail(dc::Errc::IoError, "cannot write " + path);
  out << text;
  if (!out) dc::fail(dc::Errc::IoError, "write failed: " + path);
}

nlohmann::json rcp_json(const dc::RcpResult& r) {
  return {{"thresholds", r.curve.thresholds}, {"fraction", r.curve.fraction}, {"count", r.curve.count}, {"auc", r.auc}};
}

int run_unwrap(const Globals& g, const std::string& supplied, const std::string& out) {
  const auto mesh = need_mesh(g);
  std::vector<dc::PartChart> charts;
  if (!supplied.empty()) charts = dc::charts_from_json(read_json(supplied));
  const auto atlas = dc::build_atlas(mesh, charts);
  write_text(out, dc::atlas_to_json(atlas).dump(2) + "\n");
  return kOk;
}

int run_render(const Globals& g, std::optional<int> part, int resolution, const std::string& out) {
  const auto mesh = need_mesh(g);
  std::vector<dc::PartId> parts;
  if (part) {
    parts.push_back(dc::PartId(*part));
  } else {
    for (int p = 1; p <= dc::kPartCount; ++p)
      if (!mesh.part_faces(dc::PartId(p)).empty()) parts.push_back(dc::PartId(p));
  }
  for (const auto p : parts) {
    dc::save_view_bundle(out, dc::render_part_views(mesh, p, resolution));
    std::cerr << "part " << p.value() << " -> " << dc::part_view_dir(out, p).string() << "\n";
  }
  return kOk;
}

// Every non-zero grey level of the mask image is a part label.
int run_sample(const Globals& g, const std::string& mask_path, const std::string& out) {
  const auto image = dc::read_png(mask_path);
  if (image.channels != 1) dc::fail(dc::Errc::InvalidArgument, "mask must be a single-channel label image");
  nlohmann::json parts = nlohmann::json::array();
  for (int p = 1; p <= dc::kPartCount; ++p) {
    const dc::PartId part(p);
    bool present = false;
    for (auto v : image.data) present = present || v == p;
    if (!present) continue;
    const auto mask = dc::mask_from_image(image, part);
    const auto sampled = dc::sample_points(mask, dc::part_seed(g.seed, part));
    nlohmann::json points = nlohmann::json::array();
    for (const auto& q : sampled.points) points.push_back({q.x, q.y});
    parts.push_back({{"part", p}, {"area", mask.area()}, {"points", points}});
  }
  if (parts.empty()) dc::fail(dc::Errc::NoMasks, "mask image contains no part labels 1..24");
  write_text(out, nlohmann::json{{"width", image.width}, {"height", image.height}, {"seed", g.seed}, {"parts", parts}}.dump(2) + "\n");
  return kOk;
}

int run_serve(const Globals& g, const std::string& views, std::string store, const std::string& host, int port, int resolution) {
  const auto mesh = need_mesh(g);
  const auto atlas = need_atlas(g, mesh);
  if (store.empty()) {
    if (const char* env = std::getenv("DENSECORR_STORE")) store = env;
  }
  dc::ServiceConfig config;
  config.store = store;
  config.views_dir = views;
  config.view_resolution = resolution;
  dc::AnnotationService service(mesh, atlas, config);
  httplib::Server server;
  dc::register_routes(server, service);
  std::cerr << "listening on " << host << ":" << port << (store.empty() ? " (in-memory sessions)" : " store " + store) << "\n";
  if (!server.listen(host, port)) dc::fail(dc::Errc::IoError, "cannot listen on " + host + ":" + std::to_string(port));
  return kOk;
}

int run_decode(const std::string& maps, const std::string& out) {
  dc::write_png(out, dc::iuv_to_image(dc::decode(dc::read_dcsm(maps))));
  return kOk;
}

int run_evaluate(const Globals& g, const std::string& gt_path, const std::string& pred_path, const std::string& report_path) {
  const auto mesh = need_mesh(g);
  const auto atlas = need_atlas(g, mesh);
  const auto gts = dc::ground_truth_from(dc::read_dataset(gt_path), atlas);
  const auto preds = dc::predictions_from(dc::read_dataset(pred_path), atlas);
  dc::GpsConfig cfg;
  cfg.kappa *= g.meter();
  const auto report = dc::evaluate_ap_ar(gts, preds, mesh, cfg);
  const auto auc10 = dc::rcp_auc(report.point_errors, 0.10 * g.meter());
  const auto auc30 = dc::rcp_auc(report.point_errors, 0.30 * g.meter());
  nlohmann::json best = nlohmann::json::array();
  for (const auto& b : report.best_gps) best.push_back(b ? nlohmann::json(*b) : nlohmann::json(nullptr));
  const nlohmann::json doc{{"units", g.units},
                           {"kappa", cfg.kappa},
                           {"auc10", auc10.auc},
                           {"auc30", auc30.auc},
                           {"ap", report.ap},
                           {"ap50", report.ap50},
                           {"ap75", report.ap75},
                           {"ar", report.ar},
                           {"gps_thresholds", report.thresholds},
                           {"ap_per_threshold", report.ap_per_threshold},
                           {"ar_per_threshold", report.ar_per_threshold},
                           {"gt_instances", report.gt_count},
                           {"predictions", report.prediction_count},
                           {"best_gps", best},
                           {"rcp", rcp_json(auc30)}};
  if (!report_path.empty() && report_path != "-") write_text(report_path, doc.dump(2) + "\n");
  std::printf("AUC10 %.4f  AUC30 %.4f  AP %.4f  AP50 %.4f  AP75 %.4f  AR %.4f\n", auc10.auc, auc30.auc, report.ap,
              report.ap50, report.ap75, report.ar);
  if (report_path == "-") std::cout << doc.dump(2) << "\n";
  return kOk;
}

// Pairs annotation `id`s across the two files and point lists by position.
int run_annotator_accuracy(const Globals& g, const std::string& truth_path, const std::string& ann_path,
                           const std::string& csv_path, const std::string& summary_path) {
  const auto mesh = need_mesh(g);
  const auto atlas = need_atlas(g, mesh);
  const auto truth = dc::read_dataset(truth_path);
  const auto repeat = dc::read_dataset(ann_path);
  std::map<std::int64_t, const dc::DatasetAnnotation*> by_id;
  for (const auto& a : repeat.annotations) by_id[a.id] = &a;

  std::map<std::int64_t, std::vector<dc::ErrorSample>> per_image;
  std::vector<double> errors;
  for (std::size_t i = 0; i < truth.annotations.size(); ++i) {
    const auto& t = truth.annotations[i];
    const auto it = by_id.find(t.id);
    if (it == by_id.end()) continue;
    const auto& a = *it->second;
    if (a.dp_points.size() != t.dp_points.size())
      dc::fail(dc::Errc::SchemaError, "/annotations/" + std::to_string(i) + "/dp_points: annotation " + std::to_string(t.id) +
                                          " has " + std::to_string(a.dp_points.size()) + " repeated points, expected " +
                                          std::to_string(t.dp_points.size()));
    for (std::size_t k = 0; k < t.dp_points.size(); ++k) {
      const auto v = dc::point_vertex(t.dp_points[k], atlas);
      const double e = dc::geodesic_error(mesh, v, dc::point_vertex(a.dp_points[k], atlas));
      per_image[t.image_id].push_back(dc::ErrorSample{v, e});
      errors.push_back(e);
    }
  }
  if (per_image.empty()) dc::fail(dc::Errc::EmptySample, "no annotation ids shared between the two files");
  std::vector<std::vector<dc::ErrorSample>> records;
  for (auto& [image, samples] : per_image) records.push_back(std::move(samples));
  const auto field = dc::annotator_error_field(records, mesh);

  std::string csv = "vertex,part,error\n";
  std::size_t covered = 0;
  double field_sum = 0.0;
  for (std::size_t v = 0; v < field.size(); ++v) {
    csv += std::to_string(v) + "," + std::to_string(mesh.labels()[v]) + ",";
    if (!std::isnan(field[v])) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.9g", field[v]);
      csv += buf;
      ++covered;
      field_sum += field[v];
    }
    csv += "\n";
  }
  write_text(csv_path, csv);

  double mean = 0.0;
  for (double e : errors) mean += e;
  mean /= static_cast<double>(errors.size());
  const nlohmann::json summary{{"images", records.size()},
                               {"points", errors.size()},
                               {"mean_error", mean},
                               {"auc10", dc::rcp_auc(errors, 0.10 * g.meter()).auc},
                               {"auc30", dc::rcp_auc(errors, 0.30 * g.meter()).auc},
                               {"vertices_with_error", covered},
                               {"mean_vertex_error", covered ? field_sum / static_cast<double>(covered) : 0.0}};
  if (!summary_path.empty()) write_text(summary_path, summary.dump(2) + "\n");
  std::cerr << summary.dump() << "\n";
  return kOk;
}

int run_texture(const std::string& iuv, const std::string& image, const std::string& atlas, const std::string& out) {
  const auto raster = dc::iuv_from_image(dc::read_png(iuv));
  dc::write_png(out, dc::apply_texture(raster, dc::read_png(image), dc::TextureAtlas::load(atlas)));
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dense surface correspondence toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--mesh", g.mesh, "Mesh (OBJ)");
  app.add_option("--labels", g.labels, "Per-vertex part labels");
  app.add_option("--atlas", g.atlas, "UV atlas JSON");
  app.add_option("--seed", g.seed, "Random seed");
  app.add_option("--units", g.units, "Mesh length unit; scales kappa and the AUC ranges")
      ->check(CLI::IsMember({"m", "cm", "mm"}));

  std::function<int()> action;

  auto* unwrap = app.add_subcommand("unwrap", "Build the per-part UV atlas");
  std::string supplied, out;
  unwrap->add_option("--supplied", supplied, "Supplied charts JSON");
  unwrap->add_option("--out", out, "Atlas JSON (stdout if omitted)");
  unwrap->callback([&] { action = [&] { return run_unwrap(g, supplied, out); }; });

  auto* render = app.add_subcommand("render-views", "Render the six views of a part");
  std::optional<int> part;
  int resolution = 512;
  render->add_option("--part", part, "Part 1..24 (all parts if omitted)")->check(CLI::Range(1, 24));
  render->add_option("--res", resolution, "Square view resolution")->check(CLI::Range(8, 8192));
  render->add_option("--out", out, "Output directory")->required();
  render->callback([&] { action = [&] { return run_render(g, part, resolution, out); }; });

  auto* sample = app.add_subcommand("sample-points", "Pick annotation targets from a part-label mask");
  std::string mask;
  sample->add_option("--mask", mask, "Single-channel PNG of part labels")->required();
  sample->add_option("--out", out, "Targets JSON (stdout if omitted)");
  sample->callback([&] { action = [&] { return run_sample(g, mask, out); }; });

  auto* serve = app.add_subcommand("serve", "Run the annotation HTTP service");
  std::string views, store, host = "127.0.0.1";
  int port = 8080;
  serve->add_option("--views", views, "Pre-rendered view bundles");
  serve->add_option("--store", store, "Journal directory (default $DENSECORR_STORE)");
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--port", port, "Port")->check(CLI::Range(0, 65535));
  serve->add_option("--res", resolution, "Resolution for views rendered on demand")->check(CLI::Range(8, 8192));
  serve->callback([&] { action = [&] { return run_serve(g, views, store, host, port, resolution); }; });

  auto* decode = app.add_subcommand("decode", "Decode DCSM score maps into an IUV PNG");
  std::string maps;
  decode->add_option("--maps", maps, "DCSM file")->required();
  decode->add_option("--out", out, "IUV PNG")->required();
  decode->callback([&] { action = [&] { return run_decode(maps, out); }; });

  auto* evaluate = app.add_subcommand("evaluate", "Score predictions against ground truth");
  std::string gt, pred, report;
  evaluate->add_option("--gt", gt, "Ground-truth dataset")->required();
  evaluate->add_option("--pred", pred, "Prediction dataset")->required();
  evaluate->add_option("--report", report, "Report JSON ('-' for stdout)");
  evaluate->callback([&] { action = [&] { return run_evaluate(g, gt, pred, report); }; });

  auto* accuracy = app.add_subcommand("annotator-accuracy", "Per-vertex annotator error from repeated annotations");
  std::string truth, repeated, csv, summary;
  accuracy->add_option("--truth", truth, "Reference dataset")->required();
  accuracy->add_option("--annotations", repeated, "Repeated annotations, same annotation ids")->required();
  accuracy->add_option("--csv", csv, "Per-vertex CSV (stdout if omitted)");
  accuracy->add_option("--summary", summary, "Summary JSON");
  accuracy->callback([&] { action = [&] { return run_annotator_accuracy(g, truth, repeated, csv, summary); }; });

  // --atlas here is the texture atlas; it shadows the global UV atlas flag.
  auto* texture = app.add_subcommand("texture", "Paint a texture atlas through an IUV image");
  std::string iuv, image, tex_atlas;
  texture->add_option("--iuv", iuv, "IUV PNG")->required();
  texture->add_option("--image", image, "Base image")->required();
  texture->add_option("--atlas", tex_atlas, "6x4 tile PNG or directory of 24 tiles")->required();
  texture->add_option("--out", out, "Output PNG")->required();
  texture->callback([&] { action = [&] { return run_texture(iuv, image, tex_atlas, out); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }
  try {
    return action();
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const dc::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kInternal;
  }
}
