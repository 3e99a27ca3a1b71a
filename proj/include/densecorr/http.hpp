#pragma once

#include <string>

#include <httplib.h>
#include <json.hpp>

#include "densecorr/service.hpp"

namespace densecorr {

inline int http_status(Errc code) {
  switch (code) {
    case Errc::NotFound: return 404;
    case Errc::StaleSession: return 409;
    case Errc::NothingToExport: return 409;
    case Errc::NoSurface: return 422;
    case Errc::IoError:
    case Errc::NumericalFailure: return 500;
    default: return 400;
  }
}

namespace detail {

inline void send_error(httplib::Response& res, int status, std::string_view code, const std::string& message) {
  res.status = status;
  res.set_content(nlohmann::json{{"code", code}, {"message", message}}.dump(), "application/json");
}

inline void send_json(httplib::Response& res, const nlohmann::json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

// Runs a handler, turning toolkit errors into {code, message} bodies.
template <class Handler>
auto guarded(Handler handler) {
  return [handler](const httplib::Request& req, httplib::Response& res) {
    try {
      handler(req, res);
    } catch (const Error& e) {
      send_error(res, http_status(e.code()), to_string(e.code()), e.what());
    } catch (const nlohmann::json::exception& e) {
      send_error(res, 400, "ParseError", e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, "Internal", e.what());
    }
  };
}

inline int path_int(const httplib::Request& req, std::size_t index, const char* what) {
  const std::string& text = req.matches[static_cast<long>(index)];
  try {
    std::size_t used = 0;
    const int value = std::stoi(text, &used);
    if (used == text.size()) return value;
  } catch (const std::exception&) {
  }
  fail(Errc::InvalidArgument, std::string("bad ") + what + " '" + text + "'");
}

inline nlohmann::json parse_body(const httplib::Request& req) {
  try {
    return nlohmann::json::parse(req.body);
  } catch (const nlohmann::json::parse_error& e) {
    fail(Errc::ParseError, std::string("request body: ") + e.what());
  }
}

}  // namespace detail

/// Wires the annotation endpoints onto `server`.
inline void register_routes(httplib::Server& server, AnnotationService& service) {
  using detail::guarded;

  server.Post("/sessions", guarded([&](const httplib::Request& req, httplib::Response& res) {
                const auto state = service.create_session(session_request_from_json(detail::parse_body(req)));
                detail::send_json(res, session_to_json(*state), 201);
              }));

  server.Get(R"(/sessions/([^/]+))", guarded([&](const httplib::Request& req, httplib::Response& res) {
               detail::send_json(res, session_to_json(*service.session(req.matches[1])));
             }));

  server.Get(R"(/sessions/([^/]+)/next-task)", guarded([&](const httplib::Request& req, httplib::Response& res) {
               detail::send_json(res, next_task_json(*service.session(req.matches[1])));
             }));

  server.Post(R"(/sessions/([^/]+)/clicks)", guarded([&](const httplib::Request& req, httplib::Response& res) {
                const auto body = detail::parse_body(req);
                const detail::SchemaReader r(body, "");
                const auto target = r.integer("target");
                if (target < 0) r.reject("target", "must be non-negative");
                const std::string annotator = r.has("annotator") ? r.field("annotator").get<std::string>() : "";
                const auto result = service.submit_click(req.matches[1], static_cast<std::size_t>(target),
                                                         static_cast<int>(r.integer("view")), static_cast<int>(r.integer("x")),
                                                         static_cast<int>(r.integer("y")), annotator);
                detail::send_json(res, click_result_json(result));
              }));

  server.Get(R"(/parts/(\d+)/views/(\d+))", guarded([&](const httplib::Request& req, httplib::Response& res) {
               const PartId part(detail::path_int(req, 1, "part"));
               const auto& png = service.view_png(part, detail::path_int(req, 2, "view"));
               res.set_content(std::string(png.begin(), png.end()), "image/png");
             }));

  server.Get(R"(/parts/(\d+)/views/(\d+)/meta)", guarded([&](const httplib::Request& req, httplib::Response& res) {
               const PartId part(detail::path_int(req, 1, "part"));
               const int view = detail::path_int(req, 2, "view");
               if (view < 0 || view >= kViewCount) fail(Errc::IndexOutOfRange, "view index must be 0..5");
               detail::send_json(res, view_meta(service.views(part)[static_cast<std::size_t>(view)]));
             }));

  server.Get("/export", guarded([&](const httplib::Request& req, httplib::Response& res) {
               std::vector<std::string> only;
               if (req.has_param("session")) {
                 for (std::size_t i = 0; i < req.get_param_value_count("session"); ++i)
                   only.push_back(req.get_param_value("session", i));
               }
               detail::send_json(res, dataset_to_json(service.export_dataset(only)));
             }));
}

}  // namespace densecorr
