#pragma once

// HTTP routes over an AnnotationService:
//
//   GET  /api/tasks/next?annotator=ID   200 task | 204 none remaining
//   POST /api/annotations               200 | 400 | 403 | 404 | 409
//   GET  /api/progress
//   GET  /api/guidelines
//   POST /api/predict
//   GET  /api/export/annotations        line-delimited annotation file
//
// The annotator id may also come from the X-Annotator-Id header.

#include <string>

#include "httplib.h"
#include "usat/annotation_service.hpp"

namespace usat {

inline constexpr const char* kAnnotatorHeader = "X-Annotator-Id";

namespace detail {

inline void send_json(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

inline std::string annotator_of(const httplib::Request& req) {
  if (req.has_param("annotator")) return req.get_param_value("annotator");
  return req.get_header_value(kAnnotatorHeader);
}

template <class Handler>
httplib::Server::Handler guarded(Handler h) {
  return [h](const httplib::Request& req, httplib::Response& res) {
    try {
      h(req, res);
    } catch (const ServiceError& e) {
      send_json(res, e.status, e.to_json());
    } catch (const nlohmann::json::exception& e) {
      send_json(res, 400, {{"error", std::string("malformed body: ") + e.what()}});
    } catch (const std::exception& e) {
      send_json(res, 500, {{"error", e.what()}});
    }
  };
}

inline Json parse_body(const httplib::Request& req) {
  try {
    return Json::parse(req.body);
  } catch (const nlohmann::json::exception& e) {
    throw ServiceError(400, std::string("body is not valid JSON: ") + e.what(), "body");
  }
}

inline TurnAnnotation annotation_from_body(const Json& j, const std::string& header_annotator) {
  if (!j.is_object()) throw ServiceError(400, "body must be an object", "body");
  TurnAnnotation a;
  auto field = [&](const char* name) -> const Json& {
    if (!j.contains(name)) throw ServiceError(400, "missing field", name);
    return j[name];
  };
  if (j.contains("annotator_id")) {
    if (!j["annotator_id"].is_string()) throw ServiceError(400, "must be a string", "annotator_id");
    a.annotator_id = j["annotator_id"].get<std::string>();
  } else {
    a.annotator_id = header_annotator;
  }
  const Json& id = field("dialogue_id");
  if (!id.is_string()) throw ServiceError(400, "must be a string", "dialogue_id");
  a.dialogue_id = id.get<std::string>();
  const Json& turn = field("turn_index");
  if (!turn.is_number_integer()) throw ServiceError(400, "must be an integer", "turn_index");
  a.turn_index = turn.get<int>();
  const Json& rating = field("rq_rating");
  if (!rating.is_number_integer()) throw ServiceError(400, "must be an integer in 1..5", "rq_rating");
  const auto r = rating.get<long long>();
  if (r < 1 || r > 5) throw ServiceError(400, "must be an integer in 1..5", "rq_rating");
  a.rq_rating = static_cast<int>(r);
  return a;
}

}  // namespace detail

/// Registers the API routes; with a non-empty `static_dir` also serves files
/// from it at "/".
inline void mount_routes(httplib::Server& server, AnnotationService& service, const std::string& static_dir = {}) {
  using detail::guarded;
  using detail::send_json;

  server.Get("/api/tasks/next", guarded([&service](const httplib::Request& req, httplib::Response& res) {
               const auto task = service.next_task(detail::annotator_of(req));
               if (!task) {
                 res.status = 204;
                 return;
               }
               send_json(res, 200, service.task_json(*task));
             }));

  server.Post("/api/annotations", guarded([&service](const httplib::Request& req, httplib::Response& res) {
                const Json body = detail::parse_body(req);
                const auto a = detail::annotation_from_body(body, req.get_header_value(kAnnotatorHeader));
                bool overwrite = false;
                if (body.contains("overwrite")) {
                  if (!body["overwrite"].is_boolean()) throw ServiceError(400, "must be a boolean", "overwrite");
                  overwrite = body["overwrite"].get<bool>();
                }
                const auto outcome = service.submit(a, overwrite);
                send_json(res, 200, {{"status", outcome == SubmitOutcome::replaced ? "replaced" : "accepted"}});
              }));

  server.Get("/api/progress", guarded([&service](const httplib::Request&, httplib::Response& res) {
               send_json(res, 200, service.progress());
             }));

  server.Get("/api/guidelines", guarded([](const httplib::Request&, httplib::Response& res) {
               send_json(res, 200, annotation_guidelines());
             }));

  server.Post("/api/predict", guarded([&service](const httplib::Request& req, httplib::Response& res) {
                send_json(res, 200, service.predict(detail::parse_body(req)));
              }));

  server.Get("/api/export/annotations", guarded([&service](const httplib::Request&, httplib::Response& res) {
               std::string body;
               for (const auto& a : service.export_annotations()) body += to_json(a).dump() + "\n";
               res.status = 200;
               res.set_content(body, "application/x-ndjson");
             }));

  if (!static_dir.empty() && !server.set_mount_point("/", static_dir))
    throw ConfigError("static directory '" + static_dir + "' does not exist");
}

}  // namespace usat
